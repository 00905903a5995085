#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "drivelab/analysis.hpp"
#include "drivelab/optim.hpp"
#include "drivelab/sim.hpp"
#include "drivelab/tokenizer.hpp"

namespace drivelab {

inline constexpr const char* kExperimentSchema = "experiment-config-v1";

struct SftRecipe {
  // Demonstrations come from a scenario set disjoint from the RL set and
  // only from the listed strata, which is what keeps the policy weak.
  std::size_t demos_per_stratum = 200;
  std::vector<Difficulty> strata{Difficulty::easy, Difficulty::turn};
  std::size_t steps = 3000;
  double lr = 0.1;
  std::size_t batch_size = 16;
  bool cosine_decay = true;
  Eigen::Index hidden = 32;
};

struct RlSettings {
  Algorithm algo = Algorithm::drgrpo;
  std::size_t group_size = 8;
  double temperature = 1.0;
  double eval_temperature = 0.01;
  std::size_t steps = 200;
  double lr = 0.3;
  double eps_low = 0.2;
  double eps_high = 0.1;
  std::size_t batch_scenarios = 32;
  double max_grad_norm = 1.0;
};

// Everything a run depends on. The worker count is deliberately absent: it
// never changes results.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t vocabulary = kDefaultVocabulary;
  std::size_t corpus_size = 2000;
  std::size_t kmeans_iters = 50;
  std::string codebook_path;  // empty: fit inline
  std::size_t per_stratum = 80;
  ScenarioStyle style = ScenarioStyle::navsim;
  SftRecipe sft;
  RlSettings rl;
  std::string output_dir = "run";

  // Throws ContractError on out-of-range settings.
  void validate() const;
  TrainConfig train_config() const;
};

std::string config_to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys and a wrong schema throw
// ParseError.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& config);

struct ReconstructionSummary {
  std::size_t trajectories = 0;
  double mean_endpoint_error = 0.0;
  double max_endpoint_error = 0.0;
  double mean_displacement = 0.0;  // over every waypoint
};

// encode -> decode from each trajectory's first waypoint.
ReconstructionSummary reconstruction_error(std::span<const Trajectory> corpus, const Codebook& codebook);

struct TokenizerReport {
  Codebook codebook;
  std::size_t segments = 0;
  std::size_t iterations = 0;
  double objective = 0.0;
  ReconstructionSummary reconstruction;
};

TokenizerReport fit_tokenizer(const ExperimentConfig& config);
std::string to_string(const TokenizerReport& report);

// Fits the codebook and writes <output_dir>/codebook.txt.
TokenizerReport cmd_fit_tokenizer(const ExperimentConfig& config, std::ostream& log);

struct RunSummaryFile {
  std::string algo;
  std::uint64_t seed = 0;
  std::string scenario_digest;
  std::size_t scenarios = 0;
  std::size_t steps = 0;
  // Mean dataset reward at the evaluation temperature, before and after RL.
  double initial_mean_reward = 0.0;
  double final_mean_reward = 0.0;
  double relative_gain = 0.0;
  // Same at the rollout temperature.
  double rollout_initial = 0.0;
  double rollout_final = 0.0;
  double tertile_low = 0.0;
  double tertile_mid = 0.0;
  double tertile_high = 0.0;
  std::string polarization;  // verdict on the initial stats
};

std::string summary_to_text(const RunSummaryFile& s);
RunSummaryFile summary_from_text(const std::string& text);

struct RunOutputs {
  RunSummaryFile summary;
  // Rollout-temperature stats, the basis of the landscape diagnostics.
  std::vector<GroupStat> initial;
  std::vector<GroupStat> final;
  // Evaluation-temperature stats, the basis of the headline gain.
  std::vector<GroupStat> eval_initial;
  std::vector<GroupStat> eval_final;
  PolarizationResult polarization;
  std::vector<TertileDelta> tertiles;
  TrainHistory history;
  PolicyParams sft_policy;
  PolicyParams final_policy;
};

// SFT, initial stats, RL, final stats, reports. Every file lands in
// config.output_dir.
RunOutputs cmd_run(const ExperimentConfig& config, std::size_t workers, std::ostream& log);

// Same pipeline without touching the filesystem (the codebook must be fit
// inline or supplied).
RunOutputs run_experiment(const ExperimentConfig& config, const Codebook& codebook,
                          const WorkerPool& pool, std::ostream* log = nullptr);

// Joins run directories. Throws ContractError unless all share a seed and
// scenario set.
ComparisonReport cmd_compare(const std::vector<std::string>& run_dirs);

// Histogram, polarization verdict and tertiles from a run directory's
// stats.csv.
std::string cmd_stats(const std::string& run_dir, std::size_t bins = 20);

std::vector<GroupStat> read_stats_csv(const std::string& text);

// FNV-1a of the text, as 16 hex digits.
std::string digest(const std::string& text);

}  // namespace drivelab
