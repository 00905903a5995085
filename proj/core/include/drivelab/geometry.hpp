#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace drivelab {

inline constexpr double kRateHz = 10.0;
inline constexpr double kStepSeconds = 1.0 / kRateHz;
inline constexpr std::size_t kSegmentLength = 5;  // 0.5 s at 10 Hz

// Planar pose. yaw is kept wrapped to (-pi, pi].
struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

double wrap_angle(double angle);

// Rigid-transform algebra on poses. compose(a, b) maps b, expressed in a's
// frame, into the frame a lives in; relative(a, b) is the inverse question.
Waypoint compose(const Waypoint& frame, const Waypoint& local);
Waypoint relative(const Waypoint& frame, const Waypoint& global);
Waypoint inverse(const Waypoint& pose);

struct Trajectory {
  std::vector<Waypoint> waypoints;
  double rate_hz = kRateHz;

  std::size_t size() const { return waypoints.size(); }
  bool empty() const { return waypoints.empty(); }
  const Waypoint& operator[](std::size_t i) const { return waypoints[i]; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

using Segment = std::array<Waypoint, kSegmentLength>;

// Linear (x, y) and shortest-arc yaw interpolation onto a 10 Hz grid that
// starts at the first input sample. Output holds horizon_s * 10 waypoints.
// Throws InsufficientSpanError when the input does not reach the last
// output sample.
Trajectory resample_to_10hz(const Trajectory& traj, double horizon_s);

// Splits into consecutive 5-waypoint segments. Throws SegmentationError if
// the length is not a multiple of 5; nothing is ever padded.
std::vector<Segment> segment(const Trajectory& traj);
Trajectory concatenate(std::span<const Segment> segments);

// Expresses the segment in the frame of its own first waypoint.
Segment canonicalize(const Segment& seg);
// Places a canonical segment so its first waypoint lands on `anchor`.
Segment place(const Segment& canonical, const Waypoint& anchor);
bool is_canonical(const Segment& seg, double tol = 1e-9);

// Mean Euclidean distance over the aligned (x, y) pairs. No frame checks.
double mean_pointwise_distance(const Segment& a, const Segment& b);

// mean_pointwise_distance restricted to canonical inputs; throws
// ContractError otherwise.
double contour_distance(const Segment& a, const Segment& b);

// Pose one step past the segment's last waypoint, extrapolating the final
// step's displacement and heading change. This is where the next segment of
// a composed trajectory begins.
Waypoint segment_successor(const Segment& seg);

}  // namespace drivelab
