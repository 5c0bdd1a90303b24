#pragma once

#include <cmath>
#include <vector>

#include "riskplan/geometry.hpp"

namespace riskplan {

// Nominal maneuver paths. Each generator returns ticks + 1 points with the
// start included, sampled at the tick period ts.

inline std::vector<Vec2> straight_path(Vec2 start, Vec2 velocity, double ts, int ticks) {
  std::vector<Vec2> pts{start};
  for (int k = 1; k <= ticks; ++k) pts.push_back(start + velocity * (ts * k));
  return pts;
}

inline std::vector<Vec2> hold_path(Vec2 start, int ticks) {
  return std::vector<Vec2>(ticks + 1, start);
}

// Linear ramp from the initial speed to zero over decel_ticks, then hold.
inline std::vector<Vec2> decel_hold_path(Vec2 start, Vec2 direction, double speed, double ts,
                                         int decel_ticks, int hold_ticks) {
  require(decel_ticks >= 1, "decel_hold_path: need at least one deceleration tick");
  const double n = direction.norm();
  require(n > 0.0, "decel_hold_path: zero direction");
  const Vec2 u = direction * (1.0 / n);
  std::vector<Vec2> pts{start};
  double s = 0.0;
  for (int k = 1; k <= decel_ticks; ++k) {
    const double v = speed * (1.0 - (k - 0.5) / decel_ticks);  // midpoint speed over the tick
    s += v * ts;
    pts.push_back(start + u * s);
  }
  for (int k = 0; k < hold_ticks; ++k) pts.push_back(pts.back());
  return pts;
}

// Constant speed for cruise_ticks, then a linear ramp to zero over
// decel_ticks, then hold.
inline std::vector<Vec2> cruise_brake_path(Vec2 start, Vec2 direction, double speed, double ts,
                                           int cruise_ticks, int decel_ticks, int hold_ticks) {
  require(cruise_ticks >= 0, "cruise_brake_path: negative cruise duration");
  const double n = direction.norm();
  require(n > 0.0, "cruise_brake_path: zero direction");
  const Vec2 u = direction * (1.0 / n);
  std::vector<Vec2> pts = straight_path(start, u * speed, ts, cruise_ticks);
  const auto brake = decel_hold_path(pts.back(), u, speed, ts, decel_ticks, hold_ticks);
  pts.insert(pts.end(), brake.begin() + 1, brake.end());
  return pts;
}

// Circular arc at constant speed, from angle theta0 to theta1 (radians).
inline std::vector<Vec2> arc_path(Vec2 center, double radius, double theta0, double theta1,
                                  int ticks) {
  require(radius > 0.0 && ticks >= 1, "arc_path: bad parameters");
  std::vector<Vec2> pts;
  for (int k = 0; k <= ticks; ++k) {
    const double th = theta0 + (theta1 - theta0) * k / ticks;
    pts.push_back(center + Vec2{radius * std::cos(th), radius * std::sin(th)});
  }
  return pts;
}

// Constant forward speed with a smoothstep lateral shift of lateral_delta.
inline std::vector<Vec2> lane_shift_path(Vec2 start, double forward_speed, double lateral_delta,
                                         double ts, int ticks) {
  require(ticks >= 1, "lane_shift_path: bad tick count");
  std::vector<Vec2> pts;
  for (int k = 0; k <= ticks; ++k) {
    const double s = static_cast<double>(k) / ticks;
    pts.push_back(start + Vec2{forward_speed * ts * k, lateral_delta * s * s * (3.0 - 2.0 * s)});
  }
  return pts;
}

// Action deltas (displacement from the action start per tick) from a path.
inline std::vector<Vec2> path_to_deltas(const std::vector<Vec2>& path) {
  require(path.size() >= 2, "path_to_deltas: need at least two points");
  std::vector<Vec2> deltas;
  for (size_t k = 1; k < path.size(); ++k) deltas.push_back(path[k] - path[0]);
  return deltas;
}

}  // namespace riskplan
