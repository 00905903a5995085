#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drivelab/geometry.hpp"

namespace drivelab {

enum class Difficulty { easy, turn, hard };
enum class Command { straight, left, right };
// navsim: 4 s horizon, scored by the PDM composite.
// waymo:  5 s horizon, scored by RFS against three rated references.
enum class ScenarioStyle { navsim, waymo };

std::string_view to_string(Difficulty d);
std::string_view to_string(Command c);
std::string_view to_string(ScenarioStyle s);
Difficulty parse_difficulty(std::string_view text);
Command parse_command(std::string_view text);
ScenarioStyle parse_style(std::string_view text);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Centerline recipe: a straight lead-in, a constant-curvature arc, then
// straight again. Curvature is signed (positive turns left).
struct CorridorShape {
  double lead_length = 0.0;
  double curvature = 0.0;
  double arc_length = 0.0;
  friend bool operator==(const CorridorShape&, const CorridorShape&) = default;
};

struct Corridor {
  CorridorShape shape;
  double half_width = 0.0;
  double spacing = 0.0;          // arc-length step of the polyline
  double start_arc_length = 0.0; // arc length of centerline.front()
  std::vector<Vec2> centerline;
  friend bool operator==(const Corridor&, const Corridor&) = default;
};

// Disc moving at constant velocity; (x, y) is its center at t = 0.
struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  Vec2 position_at(double t) const { return {x + vx * t, y + vy * t}; }
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct EgoState {
  Waypoint pose;
  double speed = 0.0;  // m/s
  double accel = 0.0;  // m/s^2
  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct RaterReference {
  Trajectory trajectory;
  double score = 0.0;
  friend bool operator==(const RaterReference&, const RaterReference&) = default;
};

// One micro-world. Planned trajectories start one step in the future: the
// k-th waypoint is the pose at time (k + 1) * 0.1 s.
struct Scenario {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::easy;
  ScenarioStyle style = ScenarioStyle::navsim;
  Corridor corridor;
  std::vector<Obstacle> obstacles;
  EgoState ego;
  Command command = Command::straight;
  double horizon = 4.0;  // seconds
  // Corridor-following expert plan; the SFT target.
  Trajectory expert;
  // Denominator of progress_ratio: the most centerline progress achieved by
  // any clean, comfortable plan among the expert and a few constant-
  // acceleration proposals. The expert alone may fall short of it.
  double reference_progress = 0.0;
  std::vector<RaterReference> rater_refs;  // waymo style only

  std::size_t horizon_steps() const;
  // Number of 0.5 s tokens covering the horizon (8 or 10).
  std::size_t expected_tokens() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Simulator constants that belong to the world rather than to scoring.
struct SimConfig {
  double ego_radius = 1.0;
  // Finite-difference window (in steps) for acceleration and jerk.
  std::size_t comfort_window = 5;
};

struct SimOutcome {
  bool collided = false;
  double collision_time = std::numeric_limits<double>::infinity();
  double min_ttc = std::numeric_limits<double>::infinity();
  double offroad_fraction = 0.0;
  double progress_ratio = 0.0;
  double max_accel = 0.0;
  double max_jerk = 0.0;
};

// Deterministic in (seed, difficulty, style).
//   easy: straight corridor, no obstacles
//   turn: curved corridor, at least 0.01 rad heading change per step
//   hard: narrow straight corridor with an obstacle crossing the ego's
//         constant-velocity path
Scenario generate_scenario(std::uint64_t seed, Difficulty difficulty,
                           ScenarioStyle style = ScenarioStyle::navsim,
                           const SimConfig& config = {});

// Generates `per_stratum` scenarios of every difficulty. Ids are assigned
// in order (all easy, then turn, then hard); seeds derive from base_seed.
std::vector<Scenario> generate_scenario_set(std::uint64_t base_seed, std::size_t per_stratum,
                                            ScenarioStyle style = ScenarioStyle::navsim,
                                            const SimConfig& config = {});

// Corpus for codebook fitting: expert plans of generated scenarios, strata in
// rotation. Each has horizon_s * 10 waypoints.
std::vector<Trajectory> synthetic_corpus(std::uint64_t seed, std::size_t count,
                                         double horizon_s = 4.0);

// Executes the first horizon_steps() waypoints of `traj`. Throws
// InsufficientSpanError if the trajectory is shorter than the horizon.
SimOutcome execute(const Scenario& sc, const Trajectory& traj, const SimConfig& config = {});

// Throws NoRatersError for navsim-style scenarios.
const std::vector<RaterReference>& rater_references(const Scenario& sc);

// Anchor for decoding a plan: the ego pose advanced one step at its current
// speed, i.e. where the first planned waypoint sits.
Waypoint plan_anchor(const Scenario& sc);

// Straight, constant-speed continuation of the ego state over the horizon.
Trajectory constant_velocity_plan(const Scenario& sc);

// Signed centerline curvature at arc length s (analytic, from the shape).
double corridor_curvature(const CorridorShape& shape, double s);
// Centerline pose at arc length s (analytic, from the shape).
Waypoint corridor_pose(const CorridorShape& shape, double s);

struct Projection {
  double arc_length = 0.0;
  double distance = 0.0;  // unsigned distance to the centerline
};
Projection project_onto(const Corridor& corridor, double x, double y);

}  // namespace drivelab
