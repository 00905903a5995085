#include "drivelab/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drivelab/error.hpp"

namespace drivelab {

using nlohmann::json;

namespace {

json waypoints_to_json(const Trajectory& traj) {
  json arr = json::array();
  for (const Waypoint& wp : traj.waypoints) arr.push_back({wp.x, wp.y, wp.yaw});
  return arr;
}

Trajectory waypoints_from_json(const json& arr) {
  Trajectory traj;
  for (const json& wp : arr) {
    traj.waypoints.push_back({wp.at(0).get<double>(), wp.at(1).get<double>(), wp.at(2).get<double>()});
  }
  return traj;
}

json scenario_to_json(const Scenario& sc) {
  json centerline = json::array();
  for (const Vec2& p : sc.corridor.centerline) centerline.push_back({p.x, p.y});
  json obstacles = json::array();
  for (const Obstacle& ob : sc.obstacles) {
    obstacles.push_back({{"x", ob.x}, {"y", ob.y}, {"radius", ob.radius}, {"vx", ob.vx}, {"vy", ob.vy}});
  }
  json refs = json::array();
  for (const RaterReference& r : sc.rater_refs) {
    refs.push_back({{"score", r.score}, {"waypoints", waypoints_to_json(r.trajectory)}});
  }
  return {
      {"schema", kScenarioSchema},
      {"id", sc.id},
      {"seed", sc.seed},
      {"difficulty", to_string(sc.difficulty)},
      {"style", to_string(sc.style)},
      {"command", to_string(sc.command)},
      {"horizon", sc.horizon},
      {"ego",
       {{"x", sc.ego.pose.x}, {"y", sc.ego.pose.y}, {"yaw", sc.ego.pose.yaw},
        {"speed", sc.ego.speed}, {"accel", sc.ego.accel}}},
      {"corridor",
       {{"half_width", sc.corridor.half_width},
        {"spacing", sc.corridor.spacing},
        {"start_arc_length", sc.corridor.start_arc_length},
        {"shape",
         {{"lead_length", sc.corridor.shape.lead_length},
          {"curvature", sc.corridor.shape.curvature},
          {"arc_length", sc.corridor.shape.arc_length}}},
        {"centerline", std::move(centerline)}}},
      {"obstacles", std::move(obstacles)},
      {"expert", waypoints_to_json(sc.expert)},
      {"reference_progress", sc.reference_progress},
      {"rater_refs", std::move(refs)},
  };
}

Scenario scenario_from_json(const json& j) {
  if (j.value("schema", "") != kScenarioSchema) {
    throw ParseError("scenario: expected schema " + std::string(kScenarioSchema));
  }
  Scenario sc;
  sc.id = j.at("id").get<std::uint64_t>();
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
  sc.style = parse_style(j.at("style").get<std::string>());
  sc.command = parse_command(j.at("command").get<std::string>());
  sc.horizon = j.at("horizon").get<double>();
  const json& ego = j.at("ego");
  sc.ego.pose = {ego.at("x").get<double>(), ego.at("y").get<double>(), ego.at("yaw").get<double>()};
  sc.ego.speed = ego.at("speed").get<double>();
  sc.ego.accel = ego.at("accel").get<double>();
  const json& cor = j.at("corridor");
  sc.corridor.half_width = cor.at("half_width").get<double>();
  sc.corridor.spacing = cor.at("spacing").get<double>();
  sc.corridor.start_arc_length = cor.at("start_arc_length").get<double>();
  const json& shape = cor.at("shape");
  sc.corridor.shape = {shape.at("lead_length").get<double>(), shape.at("curvature").get<double>(),
                       shape.at("arc_length").get<double>()};
  for (const json& p : cor.at("centerline")) {
    sc.corridor.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  for (const json& ob : j.at("obstacles")) {
    sc.obstacles.push_back({ob.at("x").get<double>(), ob.at("y").get<double>(),
                            ob.at("radius").get<double>(), ob.at("vx").get<double>(),
                            ob.at("vy").get<double>()});
  }
  sc.expert = waypoints_from_json(j.at("expert"));
  sc.reference_progress = j.at("reference_progress").get<double>();
  for (const json& r : j.at("rater_refs")) {
    sc.rater_refs.push_back({waypoints_from_json(r.at("waypoints")), r.at("score").get<double>()});
  }
  if (!(sc.corridor.half_width > 0.0)) throw ParseError("scenario: half_width must be positive");
  if (sc.horizon != 4.0 && sc.horizon != 5.0) throw ParseError("scenario: horizon must be 4 or 5");
  for (const RaterReference& r : sc.rater_refs) {
    if (r.score < 3.0 || r.score > 10.0) throw ParseError("scenario: rater score outside [3, 10]");
  }
  return sc;
}

}  // namespace

std::string scenarios_to_json(const std::vector<Scenario>& scenarios) {
  json doc{{"schema", kScenarioSchema}, {"scenarios", json::array()}};
  for (const Scenario& sc : scenarios) doc["scenarios"].push_back(scenario_to_json(sc));
  return doc.dump(1) + "\n";
}

std::vector<Scenario> scenarios_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("schema", "") != kScenarioSchema) {
      throw ParseError("scenario file: expected schema " + std::string(kScenarioSchema));
    }
    std::vector<Scenario> out;
    for (const json& j : doc.at("scenarios")) out.push_back(scenario_from_json(j));
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario file: ") + e.what());
  }
}

void save_scenarios(const std::string& path, const std::vector<Scenario>& scenarios) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file " + path);
  out << scenarios_to_json(scenarios);
}

std::vector<Scenario> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenarios_from_json(buf.str());
}

}  // namespace drivelab
