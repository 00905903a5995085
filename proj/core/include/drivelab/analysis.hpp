#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drivelab/optim.hpp"

namespace drivelab {

// Per-scenario rollout statistics at one training step. group_mean and
// group_std are taken over the dataset reward (PDM score or normalized RFS),
// the quantity the reward-landscape diagnostics are defined on;
// total_mean tracks r_total alongside.
struct GroupStat {
  std::uint64_t scenario_id = 0;
  double group_mean = 0.0;
  double group_std = 0.0;
  double total_mean = 0.0;
  std::size_t step = 0;
};

std::vector<GroupStat> collect_stats(const PolicyParams& policy, std::span<const Scenario> scenarios,
                                     std::size_t group_size, double temperature, std::uint64_t seed,
                                     const RolloutEnv& env, const WorkerPool& pool,
                                     std::size_t step = 0);

double mean_group_mean(std::span<const GroupStat> stats);

struct BinProfile {
  std::vector<double> edges;       // bins + 1, strictly increasing
  std::vector<std::size_t> counts;
  std::vector<double> mean_std;    // 0 for empty bins

  std::size_t bins() const { return counts.size(); }
  std::size_t total() const;
  double center(std::size_t bin) const { return 0.5 * (edges[bin] + edges[bin + 1]); }
};

// Histogram of group_mean over [0, 1] with the mean group_std of each bin.
BinProfile bin_profile(std::span<const GroupStat> stats, std::size_t bins = 20);

struct PolarizationConfig {
  double low_max = 0.15;   // [0, low_max] is the low-mean extreme
  double high_min = 0.8;   // [high_min, 1] is the high-mean extreme
  double mid_lo = 0.2;     // [mid_lo, mid_hi] is the intermediate band
  double mid_hi = 0.65;
  std::size_t min_scenarios = 100;
};

enum class Verdict { pass, fail, indeterminate };
std::string_view to_string(Verdict v);

struct PolarizationResult {
  Verdict verdict = Verdict::indeterminate;
  double extreme_mean_std = 0.0;
  double mid_mean_std = 0.0;
  std::size_t extreme_count = 0;
  std::size_t mid_count = 0;
  std::string report;

  bool passed() const { return verdict == Verdict::pass; }
};

// Passes when groups whose mean lies at either extreme have a strictly
// smaller average std than groups in the intermediate band. Bins are
// assigned to a region by their center.
PolarizationResult polarization_check(const BinProfile& profile, const PolarizationConfig& config = {});

struct TertileDelta {
  std::string name;       // low / mid / high (by before-std)
  std::size_t count = 0;
  double mean_before = 0.0;
  double mean_after = 0.0;
  double delta = 0.0;     // mean_after - mean_before
};

// Splits scenarios into three std tertiles of `before` (sizes differ by at
// most one; ties broken by scenario id) and reports per-tertile change in
// group mean. Throws ContractError if the scenario sets differ.
std::vector<TertileDelta> tertile_report(std::span<const GroupStat> before,
                                         std::span<const GroupStat> after);

struct RunSummary {
  std::string label;  // usually the algorithm name
  double initial = 0.0;
  double final = 0.0;
  double gain() const;  // (final - initial) / initial, 0 when initial is 0
};

struct ComparisonReport {
  std::vector<RunSummary> rows;
  std::string csv() const;
  std::string table() const;
};

ComparisonReport comparison_report(std::vector<RunSummary> runs);

std::string bins_csv(const BinProfile& profile);
std::string tertiles_csv(std::span<const TertileDelta> tertiles);
std::string stats_csv(std::span<const GroupStat> stats);

}  // namespace drivelab
