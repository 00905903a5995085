#include "drivelab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "drivelab/error.hpp"
#include "drivelab/rng.hpp"

namespace drivelab {

std::vector<GroupStat> collect_stats(const PolicyParams& policy, std::span<const Scenario> scenarios,
                                     std::size_t group_size, double temperature, std::uint64_t seed,
                                     const RolloutEnv& env, const WorkerPool& pool, std::size_t step) {
  if (scenarios.empty()) throw ContractError("collect_stats needs at least one scenario");
  std::vector<GroupStat> out(scenarios.size());
  pool.for_each_index(scenarios.size(), [&](std::size_t i) {
    const Scenario& sc = scenarios[i];
    const RolloutGroup g = rollout_group(policy, sc, group_size, temperature, sc.expected_tokens(),
                                         derive_seed(seed, {sc.id}), env);
    out[i] = {sc.id, g.dataset_mean, g.dataset_std, g.group_mean, step};
  });
  return out;
}

double mean_group_mean(std::span<const GroupStat> stats) {
  if (stats.empty()) return 0.0;
  double total = 0.0;
  for (const GroupStat& s : stats) total += s.group_mean;
  return total / static_cast<double>(stats.size());
}

std::size_t BinProfile::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

BinProfile bin_profile(std::span<const GroupStat> stats, std::size_t bins) {
  if (bins == 0) throw ContractError("bin_profile needs at least one bin");
  if (stats.empty()) throw ContractError("bin_profile needs at least one stat");
  BinProfile p;
  p.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) p.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  p.counts.assign(bins, 0);
  p.mean_std.assign(bins, 0.0);
  for (const GroupStat& s : stats) {
    const double m = std::clamp(s.group_mean, 0.0, 1.0);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(m * static_cast<double>(bins)));
    ++p.counts[b];
    p.mean_std[b] += s.group_std;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (p.counts[b]) p.mean_std[b] /= static_cast<double>(p.counts[b]);
  }
  return p;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

PolarizationResult polarization_check(const BinProfile& profile, const PolarizationConfig& config) {
  PolarizationResult r;
  double extreme_sum = 0.0, mid_sum = 0.0;
  for (std::size_t b = 0; b < profile.bins(); ++b) {
    const double c = profile.center(b);
    const auto n = static_cast<double>(profile.counts[b]);
    if (c <= config.low_max || c >= config.high_min) {
      r.extreme_count += profile.counts[b];
      extreme_sum += n * profile.mean_std[b];
    } else if (c >= config.mid_lo && c <= config.mid_hi) {
      r.mid_count += profile.counts[b];
      mid_sum += n * profile.mean_std[b];
    }
  }
  std::ostringstream msg;
  msg << std::setprecision(6);
  if (profile.total() < config.min_scenarios) {
    msg << "indeterminate: " << profile.total() << " scenarios, need " << config.min_scenarios;
    r.report = msg.str();
    return r;
  }
  if (r.extreme_count == 0 || r.mid_count == 0) {
    msg << "indeterminate: empty comparison region (extreme " << r.extreme_count << ", mid "
        << r.mid_count << ")";
    r.report = msg.str();
    return r;
  }
  r.extreme_mean_std = extreme_sum / static_cast<double>(r.extreme_count);
  r.mid_mean_std = mid_sum / static_cast<double>(r.mid_count);
  // Equal spreads must not pass on summation round-off.
  const double margin = 1e-12 * std::max(1.0, r.mid_mean_std);
  r.verdict = r.extreme_mean_std < r.mid_mean_std - margin ? Verdict::pass : Verdict::fail;
  msg << to_string(r.verdict) << ": mean std " << r.extreme_mean_std << " over " << r.extreme_count
      << " extreme-mean groups vs " << r.mid_mean_std << " over " << r.mid_count
      << " intermediate groups";
  r.report = msg.str();
  return r;
}

std::vector<TertileDelta> tertile_report(std::span<const GroupStat> before,
                                         std::span<const GroupStat> after) {
  std::map<std::uint64_t, double> after_mean;
  for (const GroupStat& s : after) after_mean[s.scenario_id] = s.group_mean;
  if (after_mean.size() != after.size() || before.size() != after.size()) {
    throw ContractError("tertile_report: scenario sets differ");
  }
  for (const GroupStat& s : before) {
    if (!after_mean.contains(s.scenario_id)) throw ContractError("tertile_report: scenario sets differ");
  }

  std::vector<const GroupStat*> sorted;
  for (const GroupStat& s : before) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const GroupStat* a, const GroupStat* b) {
    return a->group_std != b->group_std ? a->group_std < b->group_std : a->scenario_id < b->scenario_id;
  });

  std::vector<TertileDelta> out{{"low"}, {"mid"}, {"high"}};
  const std::size_t n = sorted.size();
  std::size_t begin = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    const std::size_t size = n / 3 + (t < n % 3 ? 1 : 0);
    TertileDelta& d = out[t];
    d.count = size;
    for (std::size_t i = begin; i < begin + size; ++i) {
      d.mean_before += sorted[i]->group_mean;
      d.mean_after += after_mean[sorted[i]->scenario_id];
    }
    if (size) {
      d.mean_before /= static_cast<double>(size);
      d.mean_after /= static_cast<double>(size);
    }
    d.delta = d.mean_after - d.mean_before;
    begin += size;
  }
  return out;
}

double RunSummary::gain() const { return initial != 0.0 ? (final - initial) / initial : 0.0; }

ComparisonReport comparison_report(std::vector<RunSummary> runs) { return {std::move(runs)}; }

std::string ComparisonReport::csv() const {
  std::ostringstream out;
  out << "run,initial_mean_reward,final_mean_reward,relative_gain\n" << std::setprecision(17);
  for (const RunSummary& r : rows) out << r.label << ',' << r.initial << ',' << r.final << ',' << r.gain() << '\n';
  return out.str();
}

std::string ComparisonReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(16) << "run" << std::right << std::setw(12) << "initial"
      << std::setw(12) << "final" << std::setw(12) << "gain" << '\n';
  out << std::fixed;
  for (const RunSummary& r : rows) {
    out << std::left << std::setw(16) << r.label << std::right << std::setprecision(4)
        << std::setw(12) << r.initial << std::setw(12) << r.final << std::setw(11)
        << std::setprecision(2) << 100.0 * r.gain() << "%\n";
  }
  return out.str();
}

std::string bins_csv(const BinProfile& profile) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,mean_std\n" << std::setprecision(17);
  for (std::size_t b = 0; b < profile.bins(); ++b) {
    out << profile.edges[b] << ',' << profile.edges[b + 1] << ',' << profile.counts[b] << ','
        << profile.mean_std[b] << '\n';
  }
  return out.str();
}

std::string tertiles_csv(std::span<const TertileDelta> tertiles) {
  std::ostringstream out;
  out << "tertile,count,mean_before,mean_after,delta\n" << std::setprecision(17);
  for (const TertileDelta& t : tertiles) {
    out << t.name << ',' << t.count << ',' << t.mean_before << ',' << t.mean_after << ',' << t.delta << '\n';
  }
  return out.str();
}

std::string stats_csv(std::span<const GroupStat> stats) {
  std::ostringstream out;
  out << "step,scenario_id,group_mean,group_std,total_mean\n" << std::setprecision(17);
  for (const GroupStat& s : stats) {
    out << s.step << ',' << s.scenario_id << ',' << s.group_mean << ',' << s.group_std << ','
        << s.total_mean << '\n';
  }
  return out.str();
}

}  // namespace drivelab
