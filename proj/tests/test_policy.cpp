#include <drivelab/error.hpp>
#include <drivelab/policy.hpp>
#include <drivelab/policy_io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

using namespace drivelab;

namespace {

// Independent forward pass with explicit loops.
std::vector<double> naive_log_probs(const PolicyParams& p, const Eigen::VectorXd& f,
                                    const TokenSequence& ids) {
  const Eigen::Index V = p.vocab(), D = p.hidden(), F = p.feature_dim();
  std::vector<double> h(static_cast<std::size_t>(D), 0.0);
  for (Eigen::Index i = 0; i < D; ++i) {
    for (Eigen::Index j = 0; j < F; ++j) h[i] += p.feature_weights(i, j) * f[j];
  }
  std::vector<double> out;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (t > 0) {
      std::vector<double> next(static_cast<std::size_t>(D));
      for (Eigen::Index i = 0; i < D; ++i) {
        double a = p.token_embeddings(ids[t - 1], i);
        for (Eigen::Index j = 0; j < D; ++j) a += p.step_weights(i, j) * h[j];
        next[i] = std::tanh(a);
      }
      h = next;
    }
    std::vector<double> logits(static_cast<std::size_t>(V));
    double mx = -1e300;
    for (Eigen::Index v = 0; v < V; ++v) {
      double z = p.output_bias[v];
      for (Eigen::Index i = 0; i < D; ++i) z += p.token_embeddings(v, i) * h[i];
      logits[v] = z;
      mx = std::max(mx, z);
    }
    double s = 0.0;
    for (double z : logits) s += std::exp(z - mx);
    out.push_back(logits[ids[t]] - mx - std::log(s));
  }
  return out;
}

TokenSequence random_ids(Rng& rng, Eigen::Index vocab, std::size_t len) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab) - 1);
  TokenSequence ids(len);
  for (auto& x : ids) x = pick(rng);
  return ids;
}

double entropy(const std::vector<double>& counts) {
  double n = 0.0, h = 0.0;
  for (double c : counts) n += c;
  for (double c : counts) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace

TEST(LogProb, ZeroParamsAreUniform) {
  const PolicyParams p = PolicyParams::zeros(16, 4, kFeatureDim);
  Rng rng(1);
  const auto lp = log_prob(p, test::random_features(kFeatureDim, rng), {3, 7, 0, 15});
  for (double x : lp.per_token) EXPECT_NEAR(x, -std::log(16.0), 1e-12);
  EXPECT_NEAR(lp.total, -4.0 * std::log(16.0), 1e-12);
}

TEST(LogProb, MatchesNaiveForwardPass) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const PolicyParams p = test::random_params(12, 5, 8, rng);
    const Eigen::VectorXd f = test::random_features(8, rng);
    const TokenSequence ids = random_ids(rng, 12, 8);
    const auto got = log_prob(p, f, ids);
    const auto want = naive_log_probs(p, f, ids);
    double sum = 0.0;
    for (std::size_t t = 0; t < ids.size(); ++t) {
      EXPECT_NEAR(got.per_token[t], want[t], 1e-12);
      sum += want[t];
    }
    EXPECT_NEAR(got.total, sum, 1e-11);
  }
}

TEST(LogProb, DistributionsNormalize) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const PolicyParams p = test::random_params(20, 6, 8, rng, 1.5);
    const Eigen::VectorXd f = test::random_features(8, rng);
    const TokenSequence ids = random_ids(rng, 20, 10);
    for (double temp : {0.01, 0.5, 1.0, 3.0}) {
      const Eigen::MatrixXd d = step_distributions(p, f, ids, temp);
      ASSERT_EQ(d.rows(), 11);
      for (Eigen::Index t = 0; t < d.rows(); ++t) EXPECT_NEAR(d.row(t).sum(), 1.0, 1e-9);
    }
    const Eigen::MatrixXd d = step_distributions(p, f, ids);
    const auto lp = log_prob(p, f, ids);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      EXPECT_NEAR(std::log(d(static_cast<Eigen::Index>(t), ids[t])), lp.per_token[t], 1e-10);
    }
  }
  const PolicyParams p = PolicyParams::zeros(4, 2, 8);
  EXPECT_THROW(log_prob(p, Eigen::VectorXd::Zero(8), {4}), VocabularyError);
}

TEST(GradLogProb, MatchesCentralDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const PolicyParams p = test::random_params(8, 4, 8, rng);
    const Eigen::VectorXd f = test::random_features(8, rng);
    const TokenSequence ids = random_ids(rng, 8, 3);
    const Eigen::VectorXd analytic = grad_log_prob(p, f, ids).flatten();
    const Eigen::VectorXd numeric = test::central_difference(
        p, [&](const PolicyParams& q) { return log_prob(q, f, ids).total; });
    EXPECT_LT(test::relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(GradLogProb, WeightedVariantMatchesCentralDifferences) {
  Rng rng(5);
  std::uniform_real_distribution<double> w(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const PolicyParams p = test::random_params(8, 4, 8, rng);
    const Eigen::VectorXd f = test::random_features(8, rng);
    const TokenSequence ids = random_ids(rng, 8, 5);
    std::vector<double> weights(ids.size());
    for (auto& x : weights) x = w(rng);
    const Eigen::VectorXd analytic = weighted_log_prob_grad(p, f, ids, weights).flatten();
    const Eigen::VectorXd numeric = test::central_difference(p, [&](const PolicyParams& q) {
      const auto lp = log_prob(q, f, ids);
      double s = 0.0;
      for (std::size_t t = 0; t < ids.size(); ++t) s += weights[t] * lp.per_token[t];
      return s;
    });
    EXPECT_LT(test::relative_error(analytic, numeric), 1e-4);
  }
}

TEST(GradLogProb, SoftmaxIdentities) {
  Rng rng(6);
  const PolicyParams p = test::random_params(10, 4, 8, rng);
  const Eigen::VectorXd f = test::random_features(8, rng);
  const PolicyGradient g = grad_log_prob(p, f, random_ids(rng, 10, 6));
  EXPECT_NEAR(g.output_bias.sum(), 0.0, 1e-12);

  // Zero policy, single token: no embedding row receives gradient.
  const PolicyParams z = PolicyParams::zeros(10, 4, 8);
  const PolicyGradient gz = grad_log_prob(z, f, {3});
  EXPECT_EQ(gz.token_embeddings.norm(), 0.0);
  EXPECT_NEAR(gz.output_bias[3], 0.9, 1e-12);
}

TEST(Sample, DeterministicAndValid) {
  Rng rng(7);
  const PolicyParams p = test::random_params(12, 4, 8, rng);
  const Eigen::VectorXd f = test::random_features(8, rng);
  EXPECT_EQ(sample(p, f, 1.0, 8, 99), sample(p, f, 1.0, 8, 99));
  const TokenSequence s = sample(p, f, 1.0, 10, 3);
  ASSERT_EQ(s.size(), 10u);
  for (auto id : s) {
    EXPECT_GE(id, 0);
    EXPECT_LT(id, 12);
  }
  EXPECT_THROW(sample(p, f, 0.0, 8, 1), ContractError);
}

TEST(Sample, LowTemperatureIsGreedy) {
  Rng rng(8);
  int agree = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const PolicyParams p = test::random_params(16, 6, 8, rng, 1.5);
    const Eigen::VectorXd f = test::random_features(8, rng);
    const TokenSequence g = greedy(p, f, 8);
    if (sample(p, f, 0.01, 8, static_cast<std::uint64_t>(trial)) == g) ++agree;
  }
  EXPECT_GE(agree, 48);
}

TEST(Sample, FrequenciesMatchSoftmax) {
  Rng rng(9);
  const PolicyParams p = test::random_params(8, 4, 8, rng, 0.8);
  const Eigen::VectorXd f = test::random_features(8, rng);
  const Eigen::RowVectorXd probs = step_distributions(p, f, {}).row(0);
  const int n = 50000;
  std::vector<double> counts(8, 0.0);
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(sample(p, f, 1.0, 1, i)[0])] += 1.0;
  for (int v = 0; v < 8; ++v) {
    const double pv = probs[v];
    const double sigma = std::sqrt(n * pv * (1 - pv));
    EXPECT_LT(std::abs(counts[v] - n * pv), 3.0 * sigma) << "token " << v;
  }
}

TEST(Sample, EntropyGrowsWithTemperature) {
  Rng rng(10);
  const PolicyParams p = test::random_params(8, 4, 8, rng, 1.0);
  const Eigen::VectorXd f = test::random_features(8, rng);
  double prev = -1.0;
  for (double temp : {0.3, 0.7, 1.0, 2.0}) {
    std::vector<double> counts(8, 0.0);
    for (int i = 0; i < 20000; ++i) counts[static_cast<std::size_t>(sample(p, f, temp, 2, i)[1])] += 1;
    const double h = entropy(counts);
    EXPECT_GE(h, prev);
    prev = h;
  }
}

TEST(Sft, MemorizesSingleDemo) {
  Rng rng(11);
  PolicyParams p = init_policy(16, 8, 8, 1);
  Demonstration d{test::random_features(8, rng), {3, 9, 9, 1, 15, 0, 4, 4}};
  const std::vector<Demonstration> demos{d};
  EXPECT_NE(greedy(p, d.features, 8), d.ids);
  SftConfig cfg;
  cfg.steps = 600;
  cfg.lr = 0.5;
  cfg.cosine_decay = false;
  p = sft_fit_traced(p, demos, cfg).params;
  EXPECT_EQ(greedy(p, d.features, 8), d.ids);
}

TEST(Sft, LikelihoodImprovesAndSmallStepLossIsMonotone) {
  Rng rng(12);
  std::vector<Demonstration> demos;
  for (int i = 0; i < 6; ++i) demos.push_back({test::random_features(8, rng), random_ids(rng, 12, 8)});
  const PolicyParams p0 = init_policy(12, 6, 8, 3);
  SftConfig cfg;
  cfg.steps = 60;
  cfg.lr = 0.02;
  cfg.batch_size = 16;  // full batch
  cfg.cosine_decay = false;
  const SftResult r = sft_fit_traced(p0, demos, cfg);
  ASSERT_EQ(r.loss.size(), 60u);
  for (std::size_t i = 1; i < r.loss.size(); ++i) EXPECT_LE(r.loss[i], r.loss[i - 1] + 1e-12);
  EXPECT_GT(mean_log_likelihood(r.params, demos), mean_log_likelihood(p0, demos));
  EXPECT_EQ(sft_fit_traced(p0, demos, cfg).params, r.params);
}

TEST(InitPolicy, UsesEmbeddingInitAndIsDeterministic) {
  const PolicyParams a = init_policy(32, 8, 8, 4);
  EXPECT_EQ(a, init_policy(32, 8, 8, 4));
  EXPECT_EQ(a.vocab(), 32);
  EXPECT_EQ(a.hidden(), 8);
  EXPECT_EQ(a.output_bias.norm(), 0.0);
  EXPECT_TRUE(a.all_finite());
  EXPECT_EQ(a.parameter_count(), 32 * 8 + 8 * 8 + 8 * 8 + 32);
}

TEST(PolicyIo, BitExactRoundTrip) {
  Rng rng(13);
  const PolicyParams p = test::random_params(9, 3, 8, rng);
  std::stringstream ss;
  write_policy(ss, p);
  EXPECT_EQ(ss.str().substr(0, 9), "policy v1");
  EXPECT_EQ(read_policy(ss), p);
  std::stringstream bad("policy v1\ndims 2 2\n");
  EXPECT_THROW(read_policy(bad), ParseError);
}

TEST(Params, FlattenAndArithmetic) {
  Rng rng(14);
  PolicyParams p = test::random_params(5, 3, 8, rng);
  const Eigen::VectorXd flat = p.flatten();
  PolicyParams q = PolicyParams::zeros(5, 3, 8);
  q.assign_flat(flat);
  EXPECT_EQ(p, q);
  q.add_scaled(p, -1.0);
  EXPECT_EQ(q.flatten().norm(), 0.0);
  p.scale(2.0);
  EXPECT_NEAR((p.flatten() - 2.0 * flat).norm(), 0.0, 1e-15);
}
