#include "drivelab/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <iomanip>

#include "drivelab/error.hpp"

namespace drivelab {
namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

bool is_binary_reward(double v, double weight) { return v == 0.0 || v == weight; }

}  // namespace

PdmComponents pdm_components(const SimOutcome& out, const RewardConfig& config) {
  PdmComponents c;
  c.nc = out.collided ? 0.0 : 1.0;
  c.dac = config.fractional_dac ? 1.0 - out.offroad_fraction
                                : (out.offroad_fraction == 0.0 ? 1.0 : 0.0);
  c.ttc = out.min_ttc < config.ttc_threshold ? 0.0 : 1.0;
  c.comfort = (out.max_accel <= config.max_accel && out.max_jerk <= config.max_jerk) ? 1.0 : 0.0;
  c.ep = std::clamp(out.progress_ratio, 0.0, 1.0);
  return c;
}

double pdm_score(const PdmComponents& c) {
  if (!in_unit(c.nc) || !in_unit(c.dac) || !in_unit(c.ttc) || !in_unit(c.comfort) || !in_unit(c.ep)) {
    throw ContractError("PDM components must lie in [0, 1]");
  }
  return c.nc * c.dac * (5.0 * c.ttc + 2.0 * c.comfort + 5.0 * c.ep) / 12.0;
}

double rater_score_at(const Trajectory& pred, const RaterReference& ref, std::size_t index,
                      double speed, const RewardConfig& config) {
  if (index >= pred.size() || index >= ref.trajectory.size()) {
    throw ContractError("RFS checkpoint beyond trajectory length");
  }
  const Waypoint local = relative(ref.trajectory[index], pred[index]);
  const double tau_lng = std::max(config.lng_floor, config.lng_gain * speed);
  const double tau_lat = std::max(config.lat_floor, config.lat_gain * speed);
  const double excess = std::max(std::abs(local.x) / tau_lng, std::abs(local.y) / tau_lat);
  if (excess <= 1.0) return ref.score;
  const double fade = std::min(1.0, (excess - 1.0) / config.decay_span);
  return ref.score - (ref.score - config.decay_floor_score) * fade;
}

double rfs(const Trajectory& pred, const std::vector<RaterReference>& refs, double speed,
           const RewardConfig& config) {
  if (refs.empty()) throw ContractError("RFS needs at least one rater reference");
  constexpr double kCheckpoints[] = {3.0, 5.0};
  double total = 0.0;
  for (double t : kCheckpoints) {
    const auto index = static_cast<std::size_t>(std::llround(t * kRateHz)) - 1;
    double best = 0.0;
    for (const RaterReference& ref : refs) {
      best = std::max(best, rater_score_at(pred, ref, index, speed, config));
    }
    total += std::max(best, 4.0);
  }
  return total / 2.0;
}

double normalized_rfs(double score) {
  if (!(score >= 3.0 && score <= 10.0)) {
    throw ContractError("RFS score outside [3, 10]");
  }
  return (std::max(score, 4.0) - 4.0) / 6.0;
}

double format_reward(std::string_view text) { return parse(text).ok() ? kFormatReward : 0.0; }

double length_reward(const TokenSequence& ids, std::size_t expected) {
  if (expected != 8 && expected != 10) {
    throw ContractError("expected token count must be 8 or 10");
  }
  return ids.size() == expected ? kLengthReward : 0.0;
}

double total_reward(double r_format, double r_length, double r_dataset) {
  if (!is_binary_reward(r_format, kFormatReward) || !is_binary_reward(r_length, kLengthReward) ||
      !in_unit(r_dataset)) {
    throw ContractError("total_reward inputs out of range");
  }
  return (r_format + r_length + r_dataset) / kRewardNormalizer;
}

RewardBreakdown score_text(std::string_view text, const Scenario& sc, const Codebook& codebook,
                           const SimConfig& sim, const RewardConfig& config) {
  RewardBreakdown r;
  r.r_format = format_reward(text);
  const ParseResult parsed = parse(text);
  r.r_length = parsed.ok() ? length_reward(parsed.ids, sc.expected_tokens()) : 0.0;

  const bool decodable =
      parsed.ok() && std::all_of(parsed.ids.begin(), parsed.ids.end(), [&](TokenId id) {
        return static_cast<std::size_t>(id) < codebook.size();
      });
  if (decodable && parsed.ids.size() * kSegmentLength >= sc.horizon_steps()) {
    const Trajectory plan = decode(parsed.ids, codebook, plan_anchor(sc));
    if (sc.style == ScenarioStyle::navsim) {
      r.r_dataset = pdm_score(pdm_components(execute(sc, plan, sim), config));
    } else {
      r.r_dataset = normalized_rfs(rfs(plan, rater_references(sc), sc.ego.speed, config));
    }
  }
  r.r_total = total_reward(r.r_format, r.r_length, r.r_dataset);
  return r;
}

std::string reward_csv_row(std::uint64_t scenario_id, std::size_t rollout_idx,
                           const RewardBreakdown& r) {
  std::ostringstream out;
  out << std::setprecision(17) << scenario_id << ',' << rollout_idx << ',' << r.r_format << ','
      << r.r_length << ',' << r.r_dataset << ',' << r.r_total;
  return out.str();
}

}  // namespace drivelab
