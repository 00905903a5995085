#include "drivelab/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "drivelab/error.hpp"

namespace drivelab {

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

Waypoint compose(const Waypoint& frame, const Waypoint& local) {
  const double c = std::cos(frame.yaw);
  const double s = std::sin(frame.yaw);
  return {frame.x + c * local.x - s * local.y,
          frame.y + s * local.x + c * local.y,
          wrap_angle(frame.yaw + local.yaw)};
}

Waypoint relative(const Waypoint& frame, const Waypoint& global) {
  const double c = std::cos(frame.yaw);
  const double s = std::sin(frame.yaw);
  const double dx = global.x - frame.x;
  const double dy = global.y - frame.y;
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(global.yaw - frame.yaw)};
}

Waypoint inverse(const Waypoint& pose) { return relative(pose, Waypoint{}); }

Trajectory resample_to_10hz(const Trajectory& traj, double horizon_s) {
  const auto count = static_cast<std::size_t>(std::llround(horizon_s * kRateHz));
  if (traj.size() < 2 || !(traj.rate_hz > 0.0)) {
    throw InsufficientSpanError("resample needs at least 2 waypoints and a positive rate");
  }
  const double span = static_cast<double>(traj.size() - 1) / traj.rate_hz;
  const double needed = static_cast<double>(count == 0 ? 0 : count - 1) * kStepSeconds;
  if (span + 1e-9 < needed) {
    std::ostringstream msg;
    msg << "trajectory spans " << span << " s but horizon " << horizon_s
        << " s needs " << needed << " s";
    throw InsufficientSpanError(msg.str());
  }

  Trajectory out;
  out.rate_hz = kRateHz;
  out.waypoints.reserve(count);
  const double last = static_cast<double>(traj.size() - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const double pos = std::min(static_cast<double>(k) * traj.rate_hz / kRateHz, last);
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= traj.size() - 1) i = traj.size() - 2;
    const double frac = pos - static_cast<double>(i);
    const Waypoint& a = traj[i];
    const Waypoint& b = traj[i + 1];
    if (frac == 0.0) {
      out.waypoints.push_back(a);
      continue;
    }
    const double dyaw = wrap_angle(b.yaw - a.yaw);
    out.waypoints.push_back({a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y),
                             wrap_angle(a.yaw + frac * dyaw)});
  }
  return out;
}

std::vector<Segment> segment(const Trajectory& traj) {
  if (traj.size() % kSegmentLength != 0) {
    std::ostringstream msg;
    msg << "trajectory of " << traj.size() << " waypoints is not a multiple of "
        << kSegmentLength << "; resample first";
    throw SegmentationError(msg.str());
  }
  std::vector<Segment> out(traj.size() / kSegmentLength);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < kSegmentLength; ++k) {
      out[i][k] = traj[i * kSegmentLength + k];
    }
  }
  return out;
}

Trajectory concatenate(std::span<const Segment> segments) {
  Trajectory out;
  out.waypoints.reserve(segments.size() * kSegmentLength);
  for (const Segment& seg : segments) {
    out.waypoints.insert(out.waypoints.end(), seg.begin(), seg.end());
  }
  return out;
}

Segment canonicalize(const Segment& seg) {
  Segment out;
  const Waypoint origin = seg[0];
  for (std::size_t k = 0; k < kSegmentLength; ++k) out[k] = relative(origin, seg[k]);
  out[0] = Waypoint{};
  return out;
}

Segment place(const Segment& canonical, const Waypoint& anchor) {
  Segment out;
  for (std::size_t k = 0; k < kSegmentLength; ++k) out[k] = compose(anchor, canonical[k]);
  return out;
}

bool is_canonical(const Segment& seg, double tol) {
  return std::abs(seg[0].x) <= tol && std::abs(seg[0].y) <= tol &&
         std::abs(seg[0].yaw) <= tol;
}

double mean_pointwise_distance(const Segment& a, const Segment& b) {
  double total = 0.0;
  for (std::size_t k = 0; k < kSegmentLength; ++k) {
    const double dx = a[k].x - b[k].x;
    const double dy = a[k].y - b[k].y;
    total += std::sqrt(dx * dx + dy * dy);
  }
  return total / static_cast<double>(kSegmentLength);
}

double contour_distance(const Segment& a, const Segment& b) {
  if (!is_canonical(a) || !is_canonical(b)) {
    throw ContractError("contour_distance requires canonicalized segments");
  }
  return mean_pointwise_distance(a, b);
}

Waypoint segment_successor(const Segment& seg) {
  const Waypoint& tail = seg[kSegmentLength - 1];
  const Waypoint step = relative(seg[kSegmentLength - 2], tail);
  return compose(tail, step);
}

}  // namespace drivelab
