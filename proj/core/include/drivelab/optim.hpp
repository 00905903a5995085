#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drivelab/policy.hpp"
#include "drivelab/rewards.hpp"
#include "drivelab/sim.hpp"
#include "drivelab/tokenizer.hpp"
#include "drivelab/worker_pool.hpp"

namespace drivelab {

enum class Algorithm { grpo, drgrpo };

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view text);

// Groups whose reward spread is below this are treated as ties.
inline constexpr double kStdEpsilon = 1e-8;

enum class StdKind { population, sample };

double group_mean(std::span<const double> rewards);
double group_std(std::span<const double> rewards, StdKind kind = StdKind::population);

// (r_i - mean) / std. Returns all zeros when std < eps_std.
std::vector<double> grpo_advantage(std::span<const double> rewards, double eps_std = kStdEpsilon,
                                   StdKind kind = StdKind::population);
// r_i - mean, with no normalization of any kind.
std::vector<double> drgrpo_advantage(std::span<const double> rewards);
std::vector<double> compute_advantages(Algorithm algo, std::span<const double> rewards,
                                       double eps_std = kStdEpsilon);

// Ratio clip interval [1 - eps_low, 1 + eps_high].
struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.1;

  double lower() const { return 1.0 - eps_low; }
  double upper() const { return 1.0 + eps_high; }
  // Throws ContractError unless both bounds lie in (0, 1).
  void validate() const;
};

// Everything needed to turn a token sequence into a reward.
struct RolloutEnv {
  const Codebook* codebook = nullptr;
  SimConfig sim;
  RewardConfig reward;
};

struct Rollout {
  TokenSequence ids;
  std::string text;
  // Per-token log-probabilities under the sampling snapshot.
  std::vector<double> old_log_probs;
  RewardBreakdown reward;
};

struct RolloutGroup {
  std::uint64_t scenario_id = 0;
  ScenarioFeatures features;
  std::vector<Rollout> rollouts;
  double group_mean = 0.0;  // of r_total
  double group_std = 0.0;   // population std of r_total
  double dataset_mean = 0.0;
  double dataset_std = 0.0;

  std::vector<double> total_rewards() const;
  std::vector<double> dataset_rewards() const;
};

// G independent samples from `p`, each pushed through the full text path
// (serialize, parse, decode, execute, score). Deterministic in seed.
RolloutGroup rollout_group(const PolicyParams& p, const Scenario& sc, std::size_t group_size,
                           double temperature, std::size_t expected_len, std::uint64_t seed,
                           const RolloutEnv& env);

struct SurrogateResult {
  double loss = 0.0;
  PolicyGradient grad;  // d loss / d params
  std::size_t tokens = 0;
  std::size_t clipped = 0;  // tokens whose clipped branch won the min

  double clip_fraction() const {
    return tokens ? static_cast<double>(clipped) / static_cast<double>(tokens) : 0.0;
  }
};

// loss = -sum_i sum_t min(rho * A_i, clip(rho) * A_i), rho the per-token
// probability ratio against the recorded old log-probs. Summed over tokens
// and rollouts with no length or group normalization, and no KL term.
SurrogateResult surrogate_loss_and_grad(const PolicyParams& p_new, const RolloutGroup& group,
                                        std::span<const double> advantages, const ClipConfig& clip);
double surrogate_loss(const PolicyParams& p_new, const RolloutGroup& group,
                      std::span<const double> advantages, const ClipConfig& clip);

struct TrainConfig {
  Algorithm algo = Algorithm::drgrpo;
  std::size_t steps = 200;
  double lr = 0.3;
  ClipConfig clip;
  std::size_t group_size = 8;
  double temperature = 1.0;
  std::size_t batch_scenarios = 32;
  // Surrogate steps per rollout batch; one keeps updates strictly on-policy.
  std::size_t inner_updates = 1;
  // Global L2 clip on the averaged gradient; 0 disables.
  double max_grad_norm = 1.0;
  double eps_std = kStdEpsilon;
  std::uint64_t seed = 0;
};

struct GroupSummary {
  std::uint64_t scenario_id = 0;
  double group_mean = 0.0;
  double group_std = 0.0;
};

struct TrainStep {
  std::size_t step = 0;
  std::vector<GroupSummary> groups;
  double mean_reward = 0.0;  // r_total averaged over the step's groups
  double clip_fraction = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;  // of the first update, before norm clipping
};

struct TrainHistory {
  Algorithm algo = Algorithm::drgrpo;
  std::vector<TrainStep> steps;
};

struct TrainResult {
  PolicyParams params;
  TrainHistory history;
};

using StepCallback = std::function<void(const TrainStep&)>;

// Group-relative policy optimization. Each step samples groups for a
// minibatch of scenarios from a frozen snapshot, forms advantages with the
// chosen estimator and applies plain gradient steps on the surrogate. Throws
// TrainingAborted if the loss or parameters stop being finite.
TrainResult train(const PolicyParams& p0, std::span<const Scenario> scenarios,
                  const TrainConfig& config, const RolloutEnv& env, const WorkerPool& pool,
                  const StepCallback& on_step = {});

inline constexpr const char* kHistoryCsvHeader = "step,scenario_id,group_mean,group_std,algo,clip_frac";
// One row per (step, scenario) followed by a `summary,all,...` row holding
// the means over every recorded group.
std::string history_csv(const TrainHistory& history);

}  // namespace drivelab
