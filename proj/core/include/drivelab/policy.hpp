#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "drivelab/embeddings.hpp"
#include "drivelab/sim.hpp"
#include "drivelab/tokenizer.hpp"

namespace drivelab {

inline constexpr Eigen::Index kFeatureDim = 8;
inline constexpr Eigen::Index kDefaultHidden = 16;

// Scenario summary fed to the policy (F = 8):
//   0  ego speed / 15 m/s
//   1  ego acceleration / 3 m/s^2
//   2  centerline curvature 10 m ahead, times 15
//   3  centerline curvature 20 m ahead, times 15
//   4  centerline curvature 30 m ahead, times 15
//   5  nearest obstacle distance / 50 m, capped at 1 (1 when none)
//   6  nearest obstacle bearing / pi relative to ego heading (0 when none)
//   7  command: +1 left, -1 right, 0 straight
using ScenarioFeatures = Eigen::VectorXd;

inline constexpr double kCurvatureTapSpacing = 10.0;
inline constexpr double kCurvatureScale = 15.0;
inline constexpr double kObstacleRange = 50.0;

ScenarioFeatures features(const Scenario& sc);

// Single-recurrence tanh network with tied input/output token embeddings:
//   h_0 = W_f f
//   h_t = tanh(W_s h_{t-1} + E[id_{t-1}])      t >= 1
//   logits_t = E h_t + b
struct PolicyParams {
  Eigen::MatrixXd token_embeddings;  // V x D
  Eigen::MatrixXd feature_weights;   // D x F
  Eigen::MatrixXd step_weights;      // D x D
  Eigen::VectorXd output_bias;       // V

  Eigen::Index vocab() const { return token_embeddings.rows(); }
  Eigen::Index hidden() const { return token_embeddings.cols(); }
  Eigen::Index feature_dim() const { return feature_weights.cols(); }
  Eigen::Index parameter_count() const;

  static PolicyParams zeros(Eigen::Index vocab, Eigen::Index hidden, Eigen::Index feature_dim);

  PolicyParams& add_scaled(const PolicyParams& other, double alpha);
  PolicyParams& scale(double alpha);
  bool all_finite() const;

  Eigen::VectorXd flatten() const;
  void assign_flat(const Eigen::VectorXd& flat);

  friend bool operator==(const PolicyParams& a, const PolicyParams& b);
};

// Gradients share the parameter layout.
using PolicyGradient = PolicyParams;

struct PolicyInit {
  // Stand-in for a pretrained vocabulary the trajectory tokens are appended
  // to; new token rows are drawn from its mean and covariance.
  Eigen::Index base_vocab = 64;
  double base_scale = 0.3;
  double weight_scale = 0.1;
};

PolicyParams init_policy(Eigen::Index vocab, Eigen::Index hidden, Eigen::Index feature_dim,
                         std::uint64_t seed, const PolicyInit& init = {});

struct LogProbs {
  std::vector<double> per_token;
  double total = 0.0;
};

LogProbs log_prob(const PolicyParams& p, const ScenarioFeatures& f, const TokenSequence& ids);

// Next-token distributions along `ids` (teacher forced); row t is the
// distribution the policy places on token t. One extra row past the end.
Eigen::MatrixXd step_distributions(const PolicyParams& p, const ScenarioFeatures& f,
                                   const TokenSequence& ids, double temperature = 1.0);

// Ancestral sampling with logits divided by `temperature`.
TokenSequence sample(const PolicyParams& p, const ScenarioFeatures& f, double temperature,
                     std::size_t length, std::uint64_t seed);
TokenSequence greedy(const PolicyParams& p, const ScenarioFeatures& f, std::size_t length);

// Gradient of sum_t weights[t] * log pi(id_t | prefix) by reverse
// accumulation through the recurrence.
PolicyGradient weighted_log_prob_grad(const PolicyParams& p, const ScenarioFeatures& f,
                                      const TokenSequence& ids, std::span<const double> weights);
PolicyGradient grad_log_prob(const PolicyParams& p, const ScenarioFeatures& f,
                             const TokenSequence& ids);

struct Demonstration {
  ScenarioFeatures features;
  TokenSequence ids;
};

// Expert plan of `sc` tokenized with `codebook`.
Demonstration make_demonstration(const Scenario& sc, const Codebook& codebook);

struct SftConfig {
  std::size_t steps = 150;
  double lr = 0.05;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  // lr * (1 + cos(pi * step / steps)) / 2 when set, constant otherwise.
  bool cosine_decay = true;
};

struct SftResult {
  PolicyParams params;
  // Mean per-demo negative log-likelihood of each minibatch before its step.
  std::vector<double> loss;
};

// Plain minibatch gradient descent on next-token cross-entropy.
SftResult sft_fit_traced(PolicyParams p, std::span<const Demonstration> demos,
                         const SftConfig& config);
PolicyParams sft_fit(PolicyParams p, std::span<const Demonstration> demos, std::size_t steps,
                     double lr, std::uint64_t seed);

// Mean over demos of the summed token log-likelihood.
double mean_log_likelihood(const PolicyParams& p, std::span<const Demonstration> demos);

}  // namespace drivelab
