#include "drivelab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "drivelab/error.hpp"
#include "drivelab/rng.hpp"

namespace drivelab {

std::string_view to_string(Algorithm algo) { return algo == Algorithm::grpo ? "grpo" : "drgrpo"; }

Algorithm parse_algorithm(std::string_view text) {
  if (text == "grpo") return Algorithm::grpo;
  if (text == "drgrpo") return Algorithm::drgrpo;
  throw ParseError("unknown algorithm `" + std::string(text) + "` (expected grpo or drgrpo)");
}

double group_mean(std::span<const double> rewards) {
  if (rewards.empty()) return 0.0;
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

double group_std(std::span<const double> rewards, StdKind kind) {
  const std::size_t n = rewards.size();
  if (n < 2) return 0.0;
  const double mean = group_mean(rewards);
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double denom = kind == StdKind::population ? static_cast<double>(n) : static_cast<double>(n - 1);
  return std::sqrt(ss / denom);
}

std::vector<double> drgrpo_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ContractError("advantages need a group of at least 2");
  std::vector<double> out(rewards.size(), 0.0);
  // A rounded mean would leave ulp-sized residue on tied groups.
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) return out;
  const double mean = group_mean(rewards);
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
  return out;
}

std::vector<double> grpo_advantage(std::span<const double> rewards, double eps_std, StdKind kind) {
  std::vector<double> out = drgrpo_advantage(rewards);
  const double std = group_std(rewards, kind);
  if (std < eps_std) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (double& a : out) a /= std;
  return out;
}

std::vector<double> compute_advantages(Algorithm algo, std::span<const double> rewards,
                                       double eps_std) {
  return algo == Algorithm::grpo ? grpo_advantage(rewards, eps_std) : drgrpo_advantage(rewards);
}

void ClipConfig::validate() const {
  if (!(eps_low > 0.0 && eps_low < 1.0 && eps_high > 0.0 && eps_high < 1.0)) {
    throw ContractError("clip epsilons must lie in (0, 1)");
  }
}

std::vector<double> RolloutGroup::total_rewards() const {
  std::vector<double> out;
  out.reserve(rollouts.size());
  for (const Rollout& r : rollouts) out.push_back(r.reward.r_total);
  return out;
}

std::vector<double> RolloutGroup::dataset_rewards() const {
  std::vector<double> out;
  out.reserve(rollouts.size());
  for (const Rollout& r : rollouts) out.push_back(r.reward.r_dataset);
  return out;
}

RolloutGroup rollout_group(const PolicyParams& p, const Scenario& sc, std::size_t group_size,
                           double temperature, std::size_t expected_len, std::uint64_t seed,
                           const RolloutEnv& env) {
  if (group_size < 2) throw ContractError("rollout groups need at least 2 samples");
  if (env.codebook == nullptr) throw ContractError("rollout environment has no codebook");
  RolloutGroup group;
  group.scenario_id = sc.id;
  group.features = features(sc);
  group.rollouts.reserve(group_size);
  for (std::size_t i = 0; i < group_size; ++i) {
    Rollout r;
    r.ids = sample(p, group.features, temperature, expected_len, derive_seed(seed, {i}));
    r.text = serialize(r.ids);
    r.reward = score_text(r.text, sc, *env.codebook, env.sim, env.reward);
    r.old_log_probs = log_prob(p, group.features, r.ids).per_token;
    group.rollouts.push_back(std::move(r));
  }
  const auto totals = group.total_rewards();
  const auto dataset = group.dataset_rewards();
  group.group_mean = group_mean(totals);
  group.group_std = group_std(totals);
  group.dataset_mean = group_mean(dataset);
  group.dataset_std = group_std(dataset);
  return group;
}

namespace {

// Per-token d(term)/d(log pi_new) for the clipped surrogate, plus the loss
// contribution. The clipped branch is constant in rho, so it passes no
// gradient when it wins the min.
struct TokenTerm {
  double value = 0.0;
  double dlogp = 0.0;
  bool clipped = false;
};

TokenTerm clipped_term(double new_lp, double old_lp, double adv, const ClipConfig& clip) {
  const double rho = std::exp(new_lp - old_lp);
  const double unclipped = rho * adv;
  const double bounded = std::clamp(rho, clip.lower(), clip.upper()) * adv;
  if (unclipped <= bounded) return {unclipped, unclipped, false};
  return {bounded, 0.0, true};
}

void check_group(const RolloutGroup& group, std::span<const double> advantages) {
  if (advantages.size() != group.rollouts.size()) {
    throw ContractError("one advantage per rollout required");
  }
  for (const Rollout& r : group.rollouts) {
    if (r.old_log_probs.size() != r.ids.size()) {
      throw ContractError("rollout is missing old log-probabilities");
    }
  }
}

}  // namespace

SurrogateResult surrogate_loss_and_grad(const PolicyParams& p_new, const RolloutGroup& group,
                                        std::span<const double> advantages, const ClipConfig& clip) {
  check_group(group, advantages);
  SurrogateResult result;
  result.grad = PolicyParams::zeros(p_new.vocab(), p_new.hidden(), p_new.feature_dim());
  std::vector<double> weights;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const Rollout& r = group.rollouts[i];
    const LogProbs lp = log_prob(p_new, group.features, r.ids);
    weights.assign(r.ids.size(), 0.0);
    bool any = false;
    for (std::size_t t = 0; t < r.ids.size(); ++t) {
      const TokenTerm term = clipped_term(lp.per_token[t], r.old_log_probs[t], advantages[i], clip);
      result.loss -= term.value;
      weights[t] = term.dlogp;
      any = any || term.dlogp != 0.0;
      result.clipped += term.clipped ? 1 : 0;
      ++result.tokens;
    }
    if (any) result.grad.add_scaled(weighted_log_prob_grad(p_new, group.features, r.ids, weights), -1.0);
  }
  return result;
}

double surrogate_loss(const PolicyParams& p_new, const RolloutGroup& group,
                      std::span<const double> advantages, const ClipConfig& clip) {
  check_group(group, advantages);
  double loss = 0.0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const Rollout& r = group.rollouts[i];
    const LogProbs lp = log_prob(p_new, group.features, r.ids);
    for (std::size_t t = 0; t < r.ids.size(); ++t) {
      loss -= clipped_term(lp.per_token[t], r.old_log_probs[t], advantages[i], clip).value;
    }
  }
  return loss;
}

TrainResult train(const PolicyParams& p0, std::span<const Scenario> scenarios,
                  const TrainConfig& config, const RolloutEnv& env, const WorkerPool& pool,
                  const StepCallback& on_step) {
  if (scenarios.empty()) throw ContractError("training needs at least one scenario");
  config.clip.validate();
  TrainResult result{p0, {config.algo, {}}};
  PolicyParams& params = result.params;

  const std::size_t batch = std::clamp<std::size_t>(config.batch_scenarios, 1, scenarios.size());
  std::vector<std::size_t> order(scenarios.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::size_t epoch = 0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> chosen;
    chosen.reserve(batch);
    while (chosen.size() < batch) {
      if (cursor == order.size()) {
        Rng rng = make_rng(config.seed, {0x65706fULL, epoch++});
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      chosen.push_back(order[cursor++]);
    }
    std::sort(chosen.begin(), chosen.end());

    // Rollouts read a frozen copy; no worker ever sees a partial update.
    const PolicyParams snapshot = params;
    std::vector<RolloutGroup> groups(chosen.size());
    std::vector<std::vector<double>> advantages(chosen.size());
    pool.for_each_index(chosen.size(), [&](std::size_t j) {
      const Scenario& sc = scenarios[chosen[j]];
      groups[j] = rollout_group(snapshot, sc, config.group_size, config.temperature,
                                sc.expected_tokens(), derive_seed(config.seed, {step, sc.id}), env);
      advantages[j] = compute_advantages(config.algo, groups[j].total_rewards(), config.eps_std);
    });

    TrainStep record;
    record.step = step;
    for (const RolloutGroup& g : groups) {
      record.groups.push_back({g.scenario_id, g.group_mean, g.group_std});
      record.mean_reward += g.group_mean;
    }
    record.mean_reward /= static_cast<double>(groups.size());

    std::size_t tokens = 0, clipped = 0;
    for (std::size_t u = 0; u < std::max<std::size_t>(1, config.inner_updates); ++u) {
      std::vector<SurrogateResult> parts(groups.size());
      pool.for_each_index(groups.size(), [&](std::size_t j) {
        parts[j] = surrogate_loss_and_grad(params, groups[j], advantages[j], config.clip);
      });
      // Mean over groups, reduced in scenario order.
      PolicyGradient grad = PolicyParams::zeros(params.vocab(), params.hidden(), params.feature_dim());
      double loss = 0.0;
      for (const SurrogateResult& part : parts) {
        grad.add_scaled(part.grad, 1.0);
        loss += part.loss;
        tokens += part.tokens;
        clipped += part.clipped;
      }
      loss /= static_cast<double>(parts.size());
      if (u == 0) record.loss = loss;
      if (!std::isfinite(loss) || !grad.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite surrogate at step " << step << " (update " << u << ", algo "
            << to_string(config.algo) << ", loss " << loss << ")";
        throw TrainingAborted(msg.str());
      }
      grad.scale(1.0 / static_cast<double>(parts.size()));
      const double norm = grad.flatten().norm();
      if (u == 0) record.grad_norm = norm;
      if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) {
        grad.scale(config.max_grad_norm / norm);
      }
      params.add_scaled(grad, -config.lr);
    }
    record.clip_fraction = tokens ? static_cast<double>(clipped) / static_cast<double>(tokens) : 0.0;
    if (on_step) on_step(record);
    result.history.steps.push_back(std::move(record));
  }
  return result;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << kHistoryCsvHeader << '\n' << std::setprecision(17);
  const std::string_view algo = to_string(history.algo);
  double sum_mean = 0.0, sum_std = 0.0, sum_clip = 0.0;
  std::size_t groups = 0;
  for (const TrainStep& s : history.steps) {
    for (const GroupSummary& g : s.groups) {
      out << s.step << ',' << g.scenario_id << ',' << g.group_mean << ',' << g.group_std << ','
          << algo << ',' << s.clip_fraction << '\n';
      sum_mean += g.group_mean;
      sum_std += g.group_std;
      ++groups;
    }
    sum_clip += s.clip_fraction;
  }
  const double n = groups ? static_cast<double>(groups) : 1.0;
  const double steps = history.steps.empty() ? 1.0 : static_cast<double>(history.steps.size());
  out << "summary,all," << sum_mean / n << ',' << sum_std / n << ',' << algo << ','
      << sum_clip / steps << '\n';
  return out.str();
}

}  // namespace drivelab
