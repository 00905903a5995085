#include "drivelab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "drivelab/error.hpp"
#include "drivelab/rng.hpp"

namespace drivelab {
namespace {

void check_ids(const PolicyParams& p, const TokenSequence& ids) {
  for (TokenId id : ids) {
    if (id < 0 || id >= p.vocab()) {
      throw VocabularyError("token id " + std::to_string(id) + " outside policy vocabulary");
    }
  }
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

// Teacher-forced hidden states h_0 .. h_{T-1} for predicting ids[0 .. T-1].
std::vector<Eigen::VectorXd> hidden_states(const PolicyParams& p, const ScenarioFeatures& f,
                                           const TokenSequence& ids, std::size_t count) {
  std::vector<Eigen::VectorXd> h;
  h.reserve(count);
  h.push_back(p.feature_weights * f);
  for (std::size_t t = 1; t < count; ++t) {
    Eigen::VectorXd a = p.step_weights * h.back() + p.token_embeddings.row(ids[t - 1]).transpose();
    h.push_back(a.array().tanh().matrix());
  }
  return h;
}

TokenId draw(const Eigen::VectorXd& probs, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (Eigen::Index v = 0; v < probs.size(); ++v) {
    u -= probs(v);
    if (u < 0.0) return static_cast<TokenId>(v);
  }
  // Rounding left a sliver of mass: fall back to the last token with any.
  for (Eigen::Index v = probs.size() - 1; v >= 0; --v) {
    if (probs(v) > 0.0) return static_cast<TokenId>(v);
  }
  return 0;
}

}  // namespace

ScenarioFeatures features(const Scenario& sc) {
  ScenarioFeatures f = ScenarioFeatures::Zero(kFeatureDim);
  f(0) = sc.ego.speed / 15.0;
  f(1) = sc.ego.accel / 3.0;
  const double s0 = project_onto(sc.corridor, sc.ego.pose.x, sc.ego.pose.y).arc_length;
  for (int tap = 0; tap < 3; ++tap) {
    f(2 + tap) = kCurvatureScale *
                 corridor_curvature(sc.corridor.shape, s0 + kCurvatureTapSpacing * (tap + 1));
  }
  f(5) = 1.0;
  double nearest = std::numeric_limits<double>::infinity();
  for (const Obstacle& ob : sc.obstacles) {
    const Waypoint local = relative(sc.ego.pose, {ob.x, ob.y, 0.0});
    const double d = std::hypot(local.x, local.y);
    if (d < nearest) {
      nearest = d;
      f(5) = std::min(d / kObstacleRange, 1.0);
      f(6) = std::atan2(local.y, local.x) / std::numbers::pi;
    }
  }
  f(7) = sc.command == Command::left ? 1.0 : (sc.command == Command::right ? -1.0 : 0.0);
  return f;
}

Eigen::Index PolicyParams::parameter_count() const {
  return token_embeddings.size() + feature_weights.size() + step_weights.size() + output_bias.size();
}

PolicyParams PolicyParams::zeros(Eigen::Index vocab, Eigen::Index hidden, Eigen::Index feature_dim) {
  return {Eigen::MatrixXd::Zero(vocab, hidden), Eigen::MatrixXd::Zero(hidden, feature_dim),
          Eigen::MatrixXd::Zero(hidden, hidden), Eigen::VectorXd::Zero(vocab)};
}

PolicyParams& PolicyParams::add_scaled(const PolicyParams& other, double alpha) {
  token_embeddings += alpha * other.token_embeddings;
  feature_weights += alpha * other.feature_weights;
  step_weights += alpha * other.step_weights;
  output_bias += alpha * other.output_bias;
  return *this;
}

PolicyParams& PolicyParams::scale(double alpha) {
  token_embeddings *= alpha;
  feature_weights *= alpha;
  step_weights *= alpha;
  output_bias *= alpha;
  return *this;
}

bool PolicyParams::all_finite() const {
  return token_embeddings.allFinite() && feature_weights.allFinite() && step_weights.allFinite() &&
         output_bias.allFinite();
}

Eigen::VectorXd PolicyParams::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index o = 0;
  for (const Eigen::MatrixXd* m : {&token_embeddings, &feature_weights, &step_weights}) {
    flat.segment(o, m->size()) = m->reshaped();
    o += m->size();
  }
  flat.segment(o, output_bias.size()) = output_bias;
  return flat;
}

void PolicyParams::assign_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw ContractError("flat parameter size mismatch");
  Eigen::Index o = 0;
  for (Eigen::MatrixXd* m : {&token_embeddings, &feature_weights, &step_weights}) {
    m->reshaped() = flat.segment(o, m->size());
    o += m->size();
  }
  output_bias = flat.segment(o, output_bias.size());
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.token_embeddings, b.token_embeddings) && same(a.feature_weights, b.feature_weights) &&
         same(a.step_weights, b.step_weights) && same(a.output_bias, b.output_bias);
}

PolicyParams init_policy(Eigen::Index vocab, Eigen::Index hidden, Eigen::Index feature_dim,
                         std::uint64_t seed, const PolicyInit& init) {
  Rng rng = make_rng(seed, {0x706f6cULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  auto randn = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * normal(rng);
    return m;
  };
  const EmbeddingTable base = randn(init.base_vocab, hidden, init.base_scale);
  PolicyParams p;
  p.token_embeddings = init_token_embeddings(base, vocab, derive_seed(seed, {1}));
  p.feature_weights = randn(hidden, feature_dim, init.weight_scale);
  p.step_weights = randn(hidden, hidden, init.weight_scale);
  p.output_bias = Eigen::VectorXd::Zero(vocab);
  return p;
}

LogProbs log_prob(const PolicyParams& p, const ScenarioFeatures& f, const TokenSequence& ids) {
  check_ids(p, ids);
  LogProbs out;
  out.per_token.reserve(ids.size());
  if (ids.empty()) return out;
  const auto h = hidden_states(p, f, ids, ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const Eigen::VectorXd logits = p.token_embeddings * h[t] + p.output_bias;
    const double lp = logits(ids[t]) - log_sum_exp(logits);
    out.per_token.push_back(lp);
    out.total += lp;
  }
  return out;
}

Eigen::MatrixXd step_distributions(const PolicyParams& p, const ScenarioFeatures& f,
                                   const TokenSequence& ids, double temperature) {
  check_ids(p, ids);
  const auto h = hidden_states(p, f, ids, ids.size() + 1);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(h.size()), p.vocab());
  for (std::size_t t = 0; t < h.size(); ++t) {
    const Eigen::VectorXd logits = (p.token_embeddings * h[t] + p.output_bias) / temperature;
    out.row(static_cast<Eigen::Index>(t)) = softmax(logits).transpose();
  }
  return out;
}

TokenSequence sample(const PolicyParams& p, const ScenarioFeatures& f, double temperature,
                     std::size_t length, std::uint64_t seed) {
  if (!(temperature > 0.0)) throw ContractError("sampling temperature must be positive");
  Rng rng = make_rng(seed, {0x73616dULL});
  TokenSequence ids;
  ids.reserve(length);
  Eigen::VectorXd h = p.feature_weights * f;
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      h = (p.step_weights * h + p.token_embeddings.row(ids.back()).transpose()).array().tanh().matrix();
    }
    const Eigen::VectorXd logits = (p.token_embeddings * h + p.output_bias) / temperature;
    ids.push_back(draw(softmax(logits), rng));
  }
  return ids;
}

TokenSequence greedy(const PolicyParams& p, const ScenarioFeatures& f, std::size_t length) {
  TokenSequence ids;
  ids.reserve(length);
  Eigen::VectorXd h = p.feature_weights * f;
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      h = (p.step_weights * h + p.token_embeddings.row(ids.back()).transpose()).array().tanh().matrix();
    }
    Eigen::Index best = 0;
    (p.token_embeddings * h + p.output_bias).maxCoeff(&best);
    ids.push_back(static_cast<TokenId>(best));
  }
  return ids;
}

PolicyGradient weighted_log_prob_grad(const PolicyParams& p, const ScenarioFeatures& f,
                                      const TokenSequence& ids, std::span<const double> weights) {
  check_ids(p, ids);
  if (weights.size() != ids.size()) throw ContractError("one weight per token required");
  PolicyGradient g = PolicyParams::zeros(p.vocab(), p.hidden(), p.feature_dim());
  const std::size_t n = ids.size();
  if (n == 0) return g;
  const auto h = hidden_states(p, f, ids, n);

  // dL/dh_t accumulated from the output head, then swept backwards.
  std::vector<Eigen::VectorXd> dh(n, Eigen::VectorXd::Zero(p.hidden()));
  for (std::size_t t = 0; t < n; ++t) {
    if (weights[t] == 0.0) continue;
    Eigen::VectorXd dlogits = -weights[t] * softmax(p.token_embeddings * h[t] + p.output_bias);
    dlogits(ids[t]) += weights[t];
    g.token_embeddings.noalias() += dlogits * h[t].transpose();
    g.output_bias += dlogits;
    dh[t].noalias() += p.token_embeddings.transpose() * dlogits;
  }
  for (std::size_t t = n - 1; t >= 1; --t) {
    const Eigen::VectorXd da = dh[t].array() * (1.0 - h[t].array().square());
    g.step_weights.noalias() += da * h[t - 1].transpose();
    g.token_embeddings.row(ids[t - 1]) += da.transpose();
    dh[t - 1].noalias() += p.step_weights.transpose() * da;
  }
  g.feature_weights.noalias() += dh[0] * f.transpose();
  return g;
}

PolicyGradient grad_log_prob(const PolicyParams& p, const ScenarioFeatures& f,
                             const TokenSequence& ids) {
  const std::vector<double> ones(ids.size(), 1.0);
  return weighted_log_prob_grad(p, f, ids, ones);
}

Demonstration make_demonstration(const Scenario& sc, const Codebook& codebook) {
  return {features(sc), encode(sc.expert, codebook)};
}

SftResult sft_fit_traced(PolicyParams p, std::span<const Demonstration> demos,
                         const SftConfig& config) {
  if (demos.empty()) throw ContractError("sft_fit needs at least one demonstration");
  SftResult result;
  Rng rng = make_rng(config.seed, {0x736674ULL});
  std::vector<std::size_t> order(demos.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t batch = std::clamp<std::size_t>(config.batch_size, 1, demos.size());

  for (std::size_t step = 0; step < config.steps; ++step) {
    PolicyGradient grad = PolicyParams::zeros(p.vocab(), p.hidden(), p.feature_dim());
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Demonstration& d = demos[order[cursor++]];
      loss -= log_prob(p, d.features, d.ids).total;
      grad.add_scaled(grad_log_prob(p, d.features, d.ids), 1.0);
    }
    result.loss.push_back(loss / static_cast<double>(batch));
    double lr = config.lr;
    if (config.cosine_decay) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                  static_cast<double>(config.steps)));
    }
    // Ascent on the mean log-likelihood is descent on the cross-entropy.
    p.add_scaled(grad, lr / static_cast<double>(batch));
  }
  result.params = std::move(p);
  return result;
}

PolicyParams sft_fit(PolicyParams p, std::span<const Demonstration> demos, std::size_t steps,
                     double lr, std::uint64_t seed) {
  SftConfig config;
  config.steps = steps;
  config.lr = lr;
  config.seed = seed;
  return sft_fit_traced(std::move(p), demos, config).params;
}

double mean_log_likelihood(const PolicyParams& p, std::span<const Demonstration> demos) {
  if (demos.empty()) return 0.0;
  double total = 0.0;
  for (const Demonstration& d : demos) total += log_prob(p, d.features, d.ids).total;
  return total / static_cast<double>(demos.size());
}

}  // namespace drivelab
