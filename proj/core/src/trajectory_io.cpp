#include "drivelab/trajectory_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "drivelab/error.hpp"

namespace drivelab {

Trajectory read_trajectory(std::istream& in, double rate_hz) {
  Trajectory traj;
  traj.rate_hz = rate_hz;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    Waypoint wp;
    if (!(fields >> wp.x)) continue;  // blank or comment-only
    std::string extra;
    if (!(fields >> wp.y >> wp.yaw) || (fields >> extra)) {
      throw ParseError("trajectory line " + std::to_string(line_no) +
                       ": expected exactly `x y yaw`");
    }
    if (!std::isfinite(wp.x) || !std::isfinite(wp.y) || !std::isfinite(wp.yaw)) {
      throw ParseError("trajectory line " + std::to_string(line_no) + ": non-finite value");
    }
    wp.yaw = wrap_angle(wp.yaw);
    traj.waypoints.push_back(wp);
  }
  return traj;
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
  out << std::setprecision(17);
  for (const Waypoint& wp : traj.waypoints) {
    out << wp.x << ' ' << wp.y << ' ' << wp.yaw << '\n';
  }
}

Trajectory load_trajectory(const std::string& path, double rate_hz) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory file " + path);
  return read_trajectory(in, rate_hz);
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trajectory file " + path);
  write_trajectory(out, traj);
}

}  // namespace drivelab
