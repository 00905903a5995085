#include "drivelab/embeddings.hpp"

#include <random>

#include "drivelab/error.hpp"
#include "drivelab/rng.hpp"

namespace drivelab {

EmbeddingTable init_token_embeddings(const EmbeddingTable& existing, Eigen::Index n_new,
                                     std::uint64_t seed, double jitter) {
  if (existing.rows() < 2) {
    throw ContractError("embedding initialization needs at least two existing rows");
  }
  if (!existing.allFinite()) throw ContractError("existing embeddings are not finite");

  const Eigen::Index dim = existing.cols();
  const Eigen::RowVectorXd mean = existing.colwise().mean();
  const Eigen::MatrixXd centered = existing.rowwise() - mean;
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(existing.rows() - 1);
  cov.diagonal().array() += jitter;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::MatrixXd factor;
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    // Numerically indefinite despite the jitter: fall back to a symmetric
    // square root with negative eigenvalues clamped.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(jitter).cwiseSqrt();
    factor = eig.eigenvectors() * root.asDiagonal();
  }

  Rng rng = make_rng(seed, {0x656d62ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingTable out(n_new, dim);
  Eigen::VectorXd z(dim);
  for (Eigen::Index r = 0; r < n_new; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) z(c) = normal(rng);
    out.row(r) = mean + (factor * z).transpose();
  }
  return out;
}

}  // namespace drivelab
