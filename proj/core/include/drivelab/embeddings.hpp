#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace drivelab {

// Rows are token embedding vectors.
using EmbeddingTable = Eigen::MatrixXd;

inline constexpr double kCovarianceJitter = 1e-8;

// Draws n_new rows from N(mean, cov + jitter * I) where mean and cov are the
// sample statistics of `existing`. Requires at least two existing rows.
EmbeddingTable init_token_embeddings(const EmbeddingTable& existing, Eigen::Index n_new,
                                     std::uint64_t seed, double jitter = kCovarianceJitter);

}  // namespace drivelab
