#pragma once
// Shared fixtures for the unit tests.

#include <drivelab/geometry.hpp>
#include <drivelab/policy.hpp>
#include <drivelab/rng.hpp>

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <random>

namespace drivelab::test {

// Smooth-ish 10 Hz path with random speed and yaw-rate changes.
inline Trajectory random_walk(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> speed(1.0, 12.0);
  std::uniform_real_distribution<double> turn(-0.05, 0.05);
  Trajectory t;
  Waypoint p{};
  double v = speed(rng);
  for (std::size_t i = 0; i < n; ++i) {
    p = compose(p, {v * kStepSeconds, 0.0, turn(rng)});
    t.waypoints.push_back(p);
    v = std::max(0.5, v + 0.2 * turn(rng) * 10.0);
  }
  return t;
}

inline Segment random_segment(Rng& rng) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_real_distribution<double> a(-3.0, 3.0);
  Segment s;
  for (auto& w : s) w = {u(rng), u(rng), a(rng)};
  return s;
}

inline bool segments_near(const Segment& a, const Segment& b, double tol) {
  for (std::size_t k = 0; k < kSegmentLength; ++k) {
    if (std::abs(a[k].x - b[k].x) > tol || std::abs(a[k].y - b[k].y) > tol ||
        std::abs(wrap_angle(a[k].yaw - b[k].yaw)) > tol) {
      return false;
    }
  }
  return true;
}

inline PolicyParams random_params(Eigen::Index v, Eigen::Index d, Eigen::Index f, Rng& rng,
                                  double scale = 0.5) {
  std::normal_distribution<double> n(0.0, scale);
  PolicyParams p = PolicyParams::zeros(v, d, f);
  Eigen::VectorXd flat(p.parameter_count());
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = n(rng);
  p.assign_flat(flat);
  return p;
}

inline Eigen::VectorXd random_features(Eigen::Index f, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(f);
  for (Eigen::Index i = 0; i < f; ++i) x[i] = u(rng);
  return x;
}

// Central differences of `fn` over the flattened parameter vector.
inline Eigen::VectorXd central_difference(const PolicyParams& p,
                                          const std::function<double(const PolicyParams&)>& fn,
                                          double h = 1e-5) {
  const Eigen::VectorXd base = p.flatten();
  Eigen::VectorXd out(base.size());
  PolicyParams q = p;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Eigen::VectorXd x = base;
    x[i] = base[i] + h;
    q.assign_flat(x);
    const double up = fn(q);
    x[i] = base[i] - h;
    q.assign_flat(x);
    const double down = fn(q);
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

}  // namespace drivelab::test
