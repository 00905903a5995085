#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "drivelab/sim.hpp"
#include "drivelab/tokenizer.hpp"

namespace drivelab {

inline constexpr double kFormatReward = 0.25;
inline constexpr double kLengthReward = 0.25;
inline constexpr double kRewardNormalizer = 1.5;

// Thresholds that turn raw simulator measurements into PDM sub-scores, and
// the trust-region shape used by RFS. None of these constants come with the
// metrics they imitate; they are round defaults.
struct RewardConfig {
  double ttc_threshold = 1.0;  // s
  double max_accel = 4.0;      // m/s^2
  double max_jerk = 8.0;       // m/s^3
  // Binary DAC (any offroad waypoint zeroes it) unless set.
  bool fractional_dac = false;

  // tau_lng(v) = max(lng_floor, lng_gain * v), tau_lat likewise.
  double lng_floor = 1.0;
  double lng_gain = 0.4;
  double lat_floor = 0.5;
  double lat_gain = 0.15;
  // Outside the trust region the rater score decays linearly, reaching
  // `decay_floor_score` at `decay_span` + 1 times the threshold.
  double decay_span = 1.0;
  double decay_floor_score = 3.0;
};

struct PdmComponents {
  double nc = 0.0;
  double dac = 0.0;
  double ttc = 0.0;
  double comfort = 0.0;
  double ep = 0.0;
};

struct RewardBreakdown {
  double r_format = 0.0;
  double r_length = 0.0;
  double r_dataset = 0.0;
  double r_total = 0.0;
};

PdmComponents pdm_components(const SimOutcome& out, const RewardConfig& config = {});

// NC * DAC * (5 TTC + 2 C + 5 EP) / 12. Throws ContractError when a
// component lies outside [0, 1].
double pdm_score(const PdmComponents& c);

// Rated feedback score in [4, 10]. Per checkpoint t in {3, 5} s the best
// rater score is taken and floored at 4; the two checkpoints are averaged.
// `speed` scales the trust-region thresholds.
double rfs(const Trajectory& pred, const std::vector<RaterReference>& refs, double speed,
           const RewardConfig& config = {});

// Score one reference gives `pred` at waypoint `index`.
double rater_score_at(const Trajectory& pred, const RaterReference& ref, std::size_t index,
                      double speed, const RewardConfig& config = {});

// (max(s, 4) - 4) / 6 for s in [3, 10].
double normalized_rfs(double score);

double format_reward(std::string_view text);
// expected must be 8 or 10.
double length_reward(const TokenSequence& ids, std::size_t expected);
// (rf + rl + rd) / 1.5 with rf, rl in {0, 0.25} and rd in [0, 1].
double total_reward(double r_format, double r_length, double r_dataset);

// Scores a model's raw text output against a scenario: format and length
// checks on the text, then decode, execute and the dataset reward (PDM for
// navsim-style, normalized RFS for waymo-style). Unparseable text or a plan
// too short to cover the horizon earns no dataset reward.
RewardBreakdown score_text(std::string_view text, const Scenario& sc, const Codebook& codebook,
                           const SimConfig& sim = {}, const RewardConfig& config = {});

// CSV row `scenario_id,rollout_idx,r_format,r_length,r_dataset,r_total`.
inline constexpr const char* kRewardCsvHeader =
    "scenario_id,rollout_idx,r_format,r_length,r_dataset,r_total";
std::string reward_csv_row(std::uint64_t scenario_id, std::size_t rollout_idx,
                           const RewardBreakdown& r);

}  // namespace drivelab
