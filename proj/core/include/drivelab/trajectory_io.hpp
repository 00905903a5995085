#pragma once

#include <iosfwd>
#include <string>

#include "drivelab/geometry.hpp"

namespace drivelab {

// Plain-text fixture format: one `x y yaw` waypoint per line, `#` starts a
// comment, blank lines ignored. Values are written with 17 significant digits.
Trajectory read_trajectory(std::istream& in, double rate_hz = kRateHz);
void write_trajectory(std::ostream& out, const Trajectory& traj);

Trajectory load_trajectory(const std::string& path, double rate_hz = kRateHz);
void save_trajectory(const std::string& path, const Trajectory& traj);

}  // namespace drivelab
