#include <drivelab/error.hpp>
#include <drivelab/optim.hpp>
#include <drivelab/sim.hpp>
#include <drivelab/worker_pool.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"

using namespace drivelab;

namespace {

std::vector<double> random_rewards(Rng& rng, std::size_t g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> r(g);
  for (auto& x : r) x = u(rng);
  return r;
}

// Group whose old log-probs come from a perturbed copy of `p`, so the
// ratios differ from one.
RolloutGroup synthetic_group(const PolicyParams& p, Rng& rng, std::size_t g, std::size_t len,
                             double perturb) {
  RolloutGroup group;
  group.features = test::random_features(p.feature_dim(), rng);
  PolicyParams old = p;
  std::normal_distribution<double> n(0.0, perturb);
  Eigen::VectorXd flat = old.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += n(rng);
  old.assign_flat(flat);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(p.vocab()) - 1);
  for (std::size_t i = 0; i < g; ++i) {
    Rollout r;
    r.ids.resize(len);
    for (auto& x : r.ids) x = pick(rng);
    r.old_log_probs = log_prob(old, group.features, r.ids).per_token;
    group.rollouts.push_back(r);
  }
  return group;
}

bool near_clip_boundary(const PolicyParams& p, const RolloutGroup& group, const ClipConfig& clip) {
  for (const auto& r : group.rollouts) {
    const auto lp = log_prob(p, group.features, r.ids).per_token;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      const double rho = std::exp(lp[t] - r.old_log_probs[t]);
      if (std::abs(rho - clip.lower()) <= 1e-3 || std::abs(rho - clip.upper()) <= 1e-3) return true;
    }
  }
  return false;
}

Codebook small_codebook() {
  std::vector<Segment> segs;
  for (const auto& t : synthetic_corpus(4, 90)) {
    for (const auto& s : segment(t)) segs.push_back(canonicalize(s));
  }
  return fit_codebook(segs, 16, 3, 20);
}

}  // namespace

TEST(Advantages, HandExamples) {
  const std::vector<double> r{0.0, 1.0};
  EXPECT_EQ(grpo_advantage(r), (std::vector<double>{-1.0, 1.0}));
  EXPECT_EQ(drgrpo_advantage(r), (std::vector<double>{-0.5, 0.5}));
  const std::vector<double> flat{0.7, 0.7, 0.7, 0.7};
  for (double a : grpo_advantage(flat)) EXPECT_EQ(a, 0.0);
  for (double a : drgrpo_advantage(flat)) EXPECT_EQ(a, 0.0);
  EXPECT_NEAR(group_std(std::vector<double>{0.0, 1.0}, StdKind::sample), std::sqrt(0.5), 1e-15);
}

TEST(Advantages, ScaleRelationAndShiftInvariance) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = random_rewards(rng, 8);
    const auto g = grpo_advantage(r);
    const auto d = drgrpo_advantage(r);
    const double sd = group_std(r);
    double sum = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NEAR(g[i] * sd, d[i], 1e-12);
      sum += d[i];
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
    auto shifted = r;
    for (auto& x : shifted) x += 3.25;
    const auto g2 = grpo_advantage(shifted);
    const auto d2 = drgrpo_advantage(shifted);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NEAR(g2[i], g[i], 1e-9);
      EXPECT_NEAR(d2[i], d[i], 1e-12);
    }
  }
}

TEST(Advantages, LowVarianceGroupsAmplifiedOnlyByGrpo) {
  const std::vector<double> pattern{-1.0, 0.5, 0.25, 0.25, -0.5, 1.0, 0.0, -0.5};
  std::vector<double> a, b;
  for (double x : pattern) {
    a.push_back(0.5 + 0.01 * x);
    b.push_back(0.5 + 0.4 * x);
  }
  const auto ga = grpo_advantage(a), gb = grpo_advantage(b);
  const auto da = drgrpo_advantage(a), db = drgrpo_advantage(b);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(ga[i], gb[i], 1e-9);
    EXPECT_NEAR(db[i], 40.0 * da[i], 1e-9);
  }
}

TEST(Advantages, AlgorithmNames) {
  EXPECT_EQ(parse_algorithm("grpo"), Algorithm::grpo);
  EXPECT_EQ(parse_algorithm("drgrpo"), Algorithm::drgrpo);
  EXPECT_EQ(to_string(Algorithm::drgrpo), "drgrpo");
  EXPECT_THROW(parse_algorithm("ppo"), ParseError);
}

TEST(Clip, Validation) {
  ClipConfig c;
  EXPECT_EQ(c.lower(), 0.8);
  EXPECT_EQ(c.upper(), 1.1);
  EXPECT_NO_THROW(c.validate());
  c.eps_low = 0.0;
  EXPECT_THROW(c.validate(), ContractError);
  c.eps_low = 0.2;
  c.eps_high = 1.0;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(Surrogate, RatioOneLimit) {
  Rng rng(2);
  const PolicyParams p = test::random_params(8, 4, 8, rng);
  RolloutGroup group = synthetic_group(p, rng, 4, 3, 0.0);
  const std::vector<double> adv{0.3, -0.2, 0.5, -0.6};
  const SurrogateResult s = surrogate_loss_and_grad(p, group, adv, ClipConfig{});
  double want_loss = 0.0;
  PolicyGradient want = PolicyParams::zeros(8, 4, 8);
  for (std::size_t i = 0; i < 4; ++i) {
    want_loss -= 3.0 * adv[i];
    want.add_scaled(grad_log_prob(p, group.features, group.rollouts[i].ids), -adv[i]);
  }
  EXPECT_NEAR(s.loss, want_loss, 1e-12);
  EXPECT_LT(test::relative_error(s.grad.flatten(), want.flatten()), 1e-12);
  EXPECT_EQ(s.clipped, 0u);
  EXPECT_EQ(s.tokens, 12u);
}

TEST(Surrogate, ClippedBranchHasNoGradient) {
  // One token, rho = 1.5 against the recorded old log-prob, positive advantage.
  const PolicyParams p = PolicyParams::zeros(4, 2, 8);
  RolloutGroup group;
  group.features = Eigen::VectorXd::Zero(8);
  Rollout r;
  r.ids = {2};
  r.old_log_probs = {std::log(0.25) - std::log(1.5)};
  group.rollouts = {r, r};
  const std::vector<double> adv{0.4, 0.4};
  const SurrogateResult s = surrogate_loss_and_grad(p, group, adv, ClipConfig{});
  EXPECT_NEAR(s.loss, -2.0 * 1.1 * 0.4, 1e-12);
  EXPECT_EQ(s.grad.flatten().norm(), 0.0);
  EXPECT_EQ(s.clipped, 2u);
  EXPECT_EQ(s.clip_fraction(), 1.0);
}

TEST(Surrogate, MatchesCentralDifferencesAwayFromBoundaries) {
  Rng rng(3);
  const ClipConfig clip;
  int checked = 0;
  while (checked < 40) {
    const PolicyParams p = test::random_params(8, 4, 8, rng);
    const RolloutGroup group = synthetic_group(p, rng, 4, 3, 0.15);
    if (near_clip_boundary(p, group, clip)) continue;
    const auto adv = drgrpo_advantage(random_rewards(rng, 4));
    const Eigen::VectorXd analytic = surrogate_loss_and_grad(p, group, adv, clip).grad.flatten();
    const Eigen::VectorXd numeric = test::central_difference(
        p, [&](const PolicyParams& q) { return surrogate_loss(q, group, adv, clip); });
    if (numeric.norm() == 0.0 && analytic.norm() == 0.0) continue;
    EXPECT_LT(test::relative_error(analytic, numeric), 1e-4);
    ++checked;
  }
}

TEST(Surrogate, ZeroAdvantagesGiveZeroGradient) {
  Rng rng(4);
  const PolicyParams p = test::random_params(8, 4, 8, rng);
  const RolloutGroup group = synthetic_group(p, rng, 3, 4, 0.2);
  const SurrogateResult s = surrogate_loss_and_grad(p, group, std::vector<double>(3, 0.0), ClipConfig{});
  EXPECT_EQ(s.loss, 0.0);
  EXPECT_EQ(s.grad.flatten().norm(), 0.0);
}

TEST(Surrogate, SymmetricClipIsPpo) {
  Rng rng(5);
  ClipConfig sym;
  sym.eps_low = 0.15;
  sym.eps_high = 0.15;
  for (int trial = 0; trial < 20; ++trial) {
    const PolicyParams p = test::random_params(8, 4, 8, rng);
    const RolloutGroup group = synthetic_group(p, rng, 4, 3, 0.3);
    const auto adv = drgrpo_advantage(random_rewards(rng, 4));
    double want = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto lp = log_prob(p, group.features, group.rollouts[i].ids).per_token;
      for (std::size_t t = 0; t < lp.size(); ++t) {
        const double rho = std::exp(lp[t] - group.rollouts[i].old_log_probs[t]);
        want -= std::min(rho * adv[i], std::clamp(rho, 0.85, 1.15) * adv[i]);
      }
    }
    EXPECT_NEAR(surrogate_loss(p, group, adv, sym), want, 1e-12);
  }
}

TEST(Surrogate, RejectsMissingOldLogProbs) {
  Rng rng(6);
  const PolicyParams p = test::random_params(8, 4, 8, rng);
  RolloutGroup group = synthetic_group(p, rng, 2, 3, 0.0);
  group.rollouts[1].old_log_probs.pop_back();
  EXPECT_THROW(surrogate_loss(p, group, std::vector<double>{0.1, -0.1}, ClipConfig{}), ContractError);
  EXPECT_THROW(surrogate_loss(p, group, std::vector<double>{0.1}, ClipConfig{}), ContractError);
}

TEST(RolloutGroup, DeterministicAndFullTextPath) {
  const Codebook cb = small_codebook();
  const RolloutEnv env{&cb, {}, {}};
  const PolicyParams p = init_policy(static_cast<Eigen::Index>(cb.size()), 8, kFeatureDim, 1);
  for (auto style : {ScenarioStyle::navsim, ScenarioStyle::waymo}) {
    const Scenario sc = generate_scenario(3, Difficulty::turn, style);
    const RolloutGroup a = rollout_group(p, sc, 8, 1.0, sc.expected_tokens(), 77, env);
    const RolloutGroup b = rollout_group(p, sc, 8, 1.0, sc.expected_tokens(), 77, env);
    ASSERT_EQ(a.rollouts.size(), 8u);
    EXPECT_GE(a.group_mean, 0.0);
    EXPECT_LE(a.group_mean, 1.0);
    EXPECT_GE(a.group_std, 0.0);
    for (std::size_t i = 0; i < 8; ++i) {
      const Rollout& r = a.rollouts[i];
      EXPECT_EQ(r.ids, b.rollouts[i].ids);
      EXPECT_EQ(r.text, serialize(r.ids));
      EXPECT_EQ(r.reward.r_format, 0.25);
      EXPECT_EQ(r.reward.r_length, 0.25);
      EXPECT_EQ(r.ids.size(), sc.expected_tokens());
      const auto lp = log_prob(p, a.features, r.ids).per_token;
      EXPECT_EQ(r.old_log_probs, lp);
    }
    const auto totals = a.total_rewards();
    EXPECT_NEAR(a.group_mean, std::accumulate(totals.begin(), totals.end(), 0.0) / 8.0, 1e-12);
    EXPECT_NEAR(a.group_std, group_std(totals), 1e-12);
  }
  const Scenario sc = generate_scenario(3, Difficulty::easy);
  EXPECT_THROW(rollout_group(p, sc, 1, 1.0, 8, 1, env), ContractError);
}

TEST(Train, ZeroStepsReturnsInitialPolicy) {
  const Codebook cb = small_codebook();
  const RolloutEnv env{&cb, {}, {}};
  const auto scenarios = generate_scenario_set(1, 2);
  const PolicyParams p0 = init_policy(16, 8, kFeatureDim, 2);
  TrainConfig cfg;
  cfg.steps = 0;
  const TrainResult r = train(p0, scenarios, cfg, env, WorkerPool(1));
  EXPECT_EQ(r.params, p0);
  EXPECT_TRUE(r.history.steps.empty());
  EXPECT_THROW(train(p0, {}, cfg, env, WorkerPool(1)), ContractError);
}

TEST(Train, WorkerCountDoesNotChangeResults) {
  const Codebook cb = small_codebook();
  const RolloutEnv env{&cb, {}, {}};
  const auto scenarios = generate_scenario_set(2, 3);
  const PolicyParams p0 = init_policy(16, 8, kFeatureDim, 3);
  for (auto algo : {Algorithm::grpo, Algorithm::drgrpo}) {
    TrainConfig cfg;
    cfg.algo = algo;
    cfg.steps = 4;
    cfg.batch_scenarios = 4;
    cfg.seed = 9;
    const TrainResult one = train(p0, scenarios, cfg, env, WorkerPool(1));
    const TrainResult three = train(p0, scenarios, cfg, env, WorkerPool(3));
    EXPECT_EQ(one.params, three.params);
    EXPECT_EQ(history_csv(one.history), history_csv(three.history));
    ASSERT_EQ(one.history.steps.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(one.history.steps[i].step, i);
      EXPECT_EQ(one.history.steps[i].groups.size(), 4u);
    }
    EXPECT_NE(one.params, p0);
  }
}

TEST(Train, GradNormClipBoundsTheUpdate) {
  const Codebook cb = small_codebook();
  const RolloutEnv env{&cb, {}, {}};
  const auto scenarios = generate_scenario_set(3, 2);
  const PolicyParams p0 = init_policy(16, 8, kFeatureDim, 4);
  TrainConfig cfg;
  cfg.algo = Algorithm::grpo;
  cfg.steps = 1;
  cfg.lr = 0.5;
  cfg.max_grad_norm = 1e-3;
  const TrainResult r = train(p0, scenarios, cfg, env, WorkerPool(1));
  const double moved = (r.params.flatten() - p0.flatten()).norm();
  EXPECT_LE(moved, 0.5 * 1e-3 + 1e-12);
  EXPECT_GT(r.history.steps[0].grad_norm, 1e-3);
}

TEST(Train, HistoryCsvLayout) {
  TrainHistory h;
  h.algo = Algorithm::grpo;
  TrainStep s;
  s.step = 0;
  s.groups = {{4, 0.5, 0.1}, {7, 0.25, 0.0}};
  s.clip_fraction = 0.125;
  h.steps.push_back(s);
  const std::string csv = history_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kHistoryCsvHeader);
  EXPECT_NE(csv.find("\n0,4,"), std::string::npos);
  EXPECT_NE(csv.find("\nsummary,all,"), std::string::npos);
}
