#include "drivelab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drivelab/error.hpp"
#include "drivelab/rng.hpp"

namespace drivelab {
namespace {

constexpr double kCorridorBehind = 10.0;   // meters of centerline behind the ego
constexpr double kCorridorAhead = 110.0;
constexpr double kCorridorSpacing = 1.0;
constexpr double kFloorSpeed = 1.0;        // experts never slow below this
constexpr double kExpertMinTtc = 1.0;
constexpr double kMaxTurn = std::numbers::pi / 2.0;
// Progress-reference proposals: constant acceleration up to a speed cap,
// kept only if clean and within the default comfort limits.
constexpr double kProposalAccels[] = {0.5, 1.0, 1.5, 2.0};
constexpr double kSpeedCap = 15.0;
constexpr double kProposalMaxAccel = 4.0;
constexpr double kProposalMaxJerk = 8.0;

template <typename Profile>
double integrate_speed(const Profile& speed, double t_end) {
  // Midpoint rule on a fine grid; the profiles are piecewise linear so this
  // is accurate to well below a millimeter.
  constexpr int kSub = 100;
  const double h = t_end / kSub;
  double s = 0.0;
  for (int i = 0; i < kSub; ++i) s += speed((i + 0.5) * h) * h;
  return s;
}

template <typename Profile>
Trajectory follow_profile(const Scenario& sc, const Profile& speed, double scale) {
  Trajectory out;
  const std::size_t n = sc.horizon_steps();
  out.waypoints.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) * kStepSeconds;
    out.waypoints.push_back(corridor_pose(sc.corridor.shape, scale * integrate_speed(speed, t)));
  }
  return out;
}

// Expert plan following the centerline with speed profile
// max(1, v0 + a0 * min(t, 1) - brake * t), arc length scaled by `scale`.
Trajectory follow_centerline(const Scenario& sc, double brake, double scale) {
  const double v0 = sc.ego.speed, a0 = sc.ego.accel;
  return follow_profile(
      sc, [=](double t) { return std::max(kFloorSpeed, v0 + a0 * std::min(t, 1.0) - brake * t); },
      scale);
}

Corridor build_corridor(const CorridorShape& shape, double half_width) {
  Corridor c;
  c.shape = shape;
  c.half_width = half_width;
  c.spacing = kCorridorSpacing;
  c.start_arc_length = -kCorridorBehind;
  const auto n = static_cast<std::size_t>((kCorridorAhead + kCorridorBehind) / kCorridorSpacing) + 1;
  c.centerline.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Waypoint p = corridor_pose(shape, c.start_arc_length + static_cast<double>(i) * c.spacing);
    c.centerline.push_back({p.x, p.y});
  }
  return c;
}

bool expert_is_clean(const Scenario& sc, const Trajectory& plan, const SimConfig& config) {
  const SimOutcome out = execute(sc, plan, config);
  return !out.collided && out.min_ttc >= kExpertMinTtc && out.offroad_fraction == 0.0;
}

double progress_of(const Scenario& sc, const Trajectory& plan) {
  return project_onto(sc.corridor, plan.waypoints.back().x, plan.waypoints.back().y).arc_length -
         project_onto(sc.corridor, sc.ego.pose.x, sc.ego.pose.y).arc_length;
}

// Largest progress among clean, comfortable proposals, the expert included.
double reference_progress(const Scenario& sc, const SimConfig& config) {
  double best = progress_of(sc, sc.expert);
  const double v0 = sc.ego.speed;
  for (double a : kProposalAccels) {
    const Trajectory plan = follow_profile(
        sc, [=](double t) { return std::min(std::max(v0, kSpeedCap), v0 + a * t); }, 1.0);
    const SimOutcome out = execute(sc, plan, config);
    if (!out.collided && out.min_ttc >= kExpertMinTtc && out.offroad_fraction == 0.0 &&
        out.max_accel <= kProposalMaxAccel && out.max_jerk <= kProposalMaxJerk) {
      best = std::max(best, progress_of(sc, plan));
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::turn: return "turn";
    case Difficulty::hard: return "hard";
  }
  return "?";
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::straight: return "straight";
    case Command::left: return "left";
    case Command::right: return "right";
  }
  return "?";
}

std::string_view to_string(ScenarioStyle s) {
  return s == ScenarioStyle::navsim ? "navsim" : "waymo";
}

Difficulty parse_difficulty(std::string_view text) {
  if (text == "easy") return Difficulty::easy;
  if (text == "turn") return Difficulty::turn;
  if (text == "hard") return Difficulty::hard;
  throw ParseError("unknown difficulty `" + std::string(text) + "`");
}

Command parse_command(std::string_view text) {
  if (text == "straight") return Command::straight;
  if (text == "left") return Command::left;
  if (text == "right") return Command::right;
  throw ParseError("unknown command `" + std::string(text) + "`");
}

ScenarioStyle parse_style(std::string_view text) {
  if (text == "navsim") return ScenarioStyle::navsim;
  if (text == "waymo") return ScenarioStyle::waymo;
  throw ParseError("unknown scenario style `" + std::string(text) + "`");
}

std::size_t Scenario::horizon_steps() const {
  return static_cast<std::size_t>(std::llround(horizon * kRateHz));
}

std::size_t Scenario::expected_tokens() const { return horizon_steps() / kSegmentLength; }

double corridor_curvature(const CorridorShape& shape, double s) {
  const double u = s - shape.lead_length;
  return (u > 0.0 && u < shape.arc_length) ? shape.curvature : 0.0;
}

Waypoint corridor_pose(const CorridorShape& shape, double s) {
  if (s <= shape.lead_length || shape.curvature == 0.0 || shape.arc_length <= 0.0) {
    return {s, 0.0, 0.0};
  }
  const double k = shape.curvature;
  const double u = std::min(s - shape.lead_length, shape.arc_length);
  const double theta = k * u;
  Waypoint p{shape.lead_length + std::sin(theta) / k, (1.0 - std::cos(theta)) / k,
             wrap_angle(theta)};
  const double w = s - shape.lead_length - u;
  if (w > 0.0) {
    p.x += w * std::cos(theta);
    p.y += w * std::sin(theta);
  }
  return p;
}

Projection project_onto(const Corridor& corridor, double x, double y) {
  Projection best{0.0, std::numeric_limits<double>::infinity()};
  const auto& pts = corridor.centerline;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double ax = pts[i].x, ay = pts[i].y;
    const double dx = pts[i + 1].x - ax, dy = pts[i + 1].y - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = ax + t * dx - x, py = ay + t * dy - y;
    const double d = std::sqrt(px * px + py * py);
    if (d < best.distance) {
      best.distance = d;
      best.arc_length = corridor.start_arc_length + (static_cast<double>(i) + t) * corridor.spacing;
    }
  }
  return best;
}

Waypoint plan_anchor(const Scenario& sc) {
  return compose(sc.ego.pose, {sc.ego.speed * kStepSeconds, 0.0, 0.0});
}

Trajectory constant_velocity_plan(const Scenario& sc) {
  Trajectory out;
  const std::size_t n = sc.horizon_steps();
  for (std::size_t k = 1; k <= n; ++k) {
    out.waypoints.push_back(
        compose(sc.ego.pose, {sc.ego.speed * static_cast<double>(k) * kStepSeconds, 0.0, 0.0}));
  }
  return out;
}

Scenario generate_scenario(std::uint64_t seed, Difficulty difficulty, ScenarioStyle style,
                           const SimConfig& config) {
  Rng rng = make_rng(seed, {static_cast<std::uint64_t>(difficulty) + 1,
                            static_cast<std::uint64_t>(style) + 1});
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  Scenario sc;
  sc.seed = seed;
  sc.difficulty = difficulty;
  sc.style = style;
  sc.horizon = style == ScenarioStyle::navsim ? 4.0 : 5.0;
  sc.ego.pose = Waypoint{};
  sc.ego.accel = uniform(-0.5, 0.5);

  double brake = 0.0;
  switch (difficulty) {
    case Difficulty::easy: {
      sc.ego.speed = uniform(6.0, 12.0);
      sc.command = Command::straight;
      sc.corridor = build_corridor({}, 3.0);
      break;
    }
    case Difficulty::turn: {
      sc.ego.speed = uniform(5.0, 10.0);
      const bool left = uniform(0.0, 1.0) < 0.5;
      sc.command = left ? Command::left : Command::right;
      // Yaw rate at the initial speed; >= 0.15 rad/s keeps the per-step
      // heading change above 0.01 rad even with the mild initial braking.
      const double yaw_rate = uniform(0.15, 0.35);
      CorridorShape shape;
      shape.lead_length = uniform(0.0, 4.0);
      shape.curvature = (left ? 1.0 : -1.0) * yaw_rate / sc.ego.speed;
      shape.arc_length = kMaxTurn / std::abs(shape.curvature);
      sc.corridor = build_corridor(shape, 3.0);
      break;
    }
    case Difficulty::hard: {
      sc.command = Command::straight;
      sc.corridor = build_corridor({}, 2.0);
      for (int attempt = 0;; ++attempt) {
        sc.ego.speed = uniform(6.0, 11.0);
        const double t_cross = uniform(1.5, 3.0);
        const double lateral_speed = uniform(1.0, 2.0);
        const double side = uniform(0.0, 1.0) < 0.5 ? 1.0 : -1.0;
        Obstacle ob;
        ob.radius = uniform(1.2, 1.8);
        ob.x = sc.ego.speed * t_cross + uniform(-0.5, 0.5);
        ob.y = -side * lateral_speed * t_cross;
        ob.vx = 0.0;
        ob.vy = side * lateral_speed;
        sc.obstacles = {ob};
        sc.expert.waypoints.assign(sc.horizon_steps(), Waypoint{});
        bool found = false;
        for (double b = 0.5; b <= 3.5 + 1e-9; b += 0.25) {
          const Trajectory plan = follow_centerline(sc, b, 1.0);
          if (expert_is_clean(sc, plan, config)) {
            brake = b;
            found = true;
            break;
          }
        }
        if (found && execute(sc, constant_velocity_plan(sc), config).collided) break;
        if (attempt > 1000) throw Error("hard scenario generation did not converge");
      }
      break;
    }
  }

  sc.expert = follow_centerline(sc, brake, 1.0);
  sc.reference_progress = reference_progress(sc, config);

  if (style == ScenarioStyle::waymo) {
    sc.rater_refs = {{sc.expert, 10.0},
                     {follow_centerline(sc, brake, 0.8), 7.0},
                     {follow_centerline(sc, brake, 0.6), 4.0}};
    if (execute(sc, sc.rater_refs.front().trajectory, config).collided) {
      throw Error("optimal rater reference collides; generator invariant broken");
    }
  }
  return sc;
}

std::vector<Scenario> generate_scenario_set(std::uint64_t base_seed, std::size_t per_stratum,
                                            ScenarioStyle style, const SimConfig& config) {
  std::vector<Scenario> out;
  out.reserve(3 * per_stratum);
  for (Difficulty d : {Difficulty::easy, Difficulty::turn, Difficulty::hard}) {
    for (std::size_t i = 0; i < per_stratum; ++i) {
      Scenario sc = generate_scenario(
          derive_seed(base_seed, {static_cast<std::uint64_t>(d), i}), d, style, config);
      sc.id = out.size();
      out.push_back(std::move(sc));
    }
  }
  return out;
}

std::vector<Trajectory> synthetic_corpus(std::uint64_t seed, std::size_t count, double horizon_s) {
  if (horizon_s != 4.0 && horizon_s != 5.0) throw ContractError("corpus horizon must be 4 or 5 s");
  const ScenarioStyle style = horizon_s == 4.0 ? ScenarioStyle::navsim : ScenarioStyle::waymo;
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto d = static_cast<Difficulty>(i % 3);
    out.push_back(generate_scenario(derive_seed(seed, {0x636f72, i}), d, style).expert);
  }
  return out;
}

SimOutcome execute(const Scenario& sc, const Trajectory& traj, const SimConfig& config) {
  const std::size_t n = sc.horizon_steps();
  if (traj.size() < n) {
    throw InsufficientSpanError("trajectory has " + std::to_string(traj.size()) +
                                " waypoints; horizon needs " + std::to_string(n));
  }

  SimOutcome out;
  std::vector<double> speed(n);
  std::size_t offroad = 0;
  Vec2 prev{sc.ego.pose.x, sc.ego.pose.y};

  for (std::size_t k = 0; k < n; ++k) {
    const Waypoint& p = traj[k];
    const double t = static_cast<double>(k + 1) * kStepSeconds;
    const Vec2 vel{(p.x - prev.x) / kStepSeconds, (p.y - prev.y) / kStepSeconds};
    speed[k] = std::hypot(vel.x, vel.y);
    prev = {p.x, p.y};

    for (const Obstacle& ob : sc.obstacles) {
      const Vec2 o = ob.position_at(t);
      const double reach = config.ego_radius + ob.radius;
      const double dx = o.x - p.x, dy = o.y - p.y;
      const double c = dx * dx + dy * dy - reach * reach;
      if (c <= 0.0) {
        if (!out.collided) {
          out.collided = true;
          out.collision_time = t;
        }
        out.min_ttc = 0.0;
        continue;
      }
      // Constant-velocity extrapolation of both discs.
      const double wx = ob.vx - vel.x, wy = ob.vy - vel.y;
      const double a = wx * wx + wy * wy;
      const double b = 2.0 * (dx * wx + dy * wy);
      const double disc = b * b - 4.0 * a * c;
      if (a <= 0.0 || disc < 0.0 || b >= 0.0) continue;
      const double tau = (-b - std::sqrt(disc)) / (2.0 * a);
      out.min_ttc = std::min(out.min_ttc, tau);
    }

    if (project_onto(sc.corridor, p.x, p.y).distance > sc.corridor.half_width) ++offroad;
  }
  out.offroad_fraction = static_cast<double>(offroad) / static_cast<double>(n);

  const double start = project_onto(sc.corridor, sc.ego.pose.x, sc.ego.pose.y).arc_length;
  const double end = project_onto(sc.corridor, traj[n - 1].x, traj[n - 1].y).arc_length;
  out.progress_ratio =
      sc.reference_progress > 0.0 ? std::clamp((end - start) / sc.reference_progress, 0.0, 1.0) : 1.0;

  const std::size_t w = std::max<std::size_t>(1, config.comfort_window);
  const double span = static_cast<double>(w) * kStepSeconds;
  std::vector<double> accel;
  for (std::size_t k = 0; k + w < n; ++k) accel.push_back((speed[k + w] - speed[k]) / span);
  for (double a : accel) out.max_accel = std::max(out.max_accel, std::abs(a));
  for (std::size_t k = 0; k + w < accel.size(); ++k) {
    out.max_jerk = std::max(out.max_jerk, std::abs((accel[k + w] - accel[k]) / span));
  }
  return out;
}

const std::vector<RaterReference>& rater_references(const Scenario& sc) {
  if (sc.style != ScenarioStyle::waymo || sc.rater_refs.empty()) {
    throw NoRatersError("scenario " + std::to_string(sc.id) + " carries no rater references");
  }
  return sc.rater_refs;
}

}  // namespace drivelab
