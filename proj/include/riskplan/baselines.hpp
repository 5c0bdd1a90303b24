#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "riskplan/belief.hpp"
#include "riskplan/scenario.hpp"

namespace riskplan {

// How a planner turns the recognizer's posterior into the distribution it
// actually plans against.
//   kIntentAware    uses the posterior as-is.
//   kConservative   ignores observations and plans against a uniform prior.
//   kRisky          assumes every agent follows the scenario's most
//                   ego-convenient maneuver.
//   kAccelThreshold classifies yield vs. keep-going from a fitted
//                   acceleration and plans against that label alone.
enum class PlannerKind { kIntentAware, kConservative, kRisky, kAccelThreshold };

inline PlannerKind parse_planner(const std::string& name) {
  if (name == "ours") return PlannerKind::kIntentAware;
  if (name == "conservative") return PlannerKind::kConservative;
  if (name == "risky") return PlannerKind::kRisky;
  if (name == "accel") return PlannerKind::kAccelThreshold;
  throw std::runtime_error("unknown planner '" + name + "' (ours, conservative, risky, accel)");
}

inline std::string planner_name(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::kIntentAware: return "ours";
    case PlannerKind::kConservative: return "conservative";
    case PlannerKind::kRisky: return "risky";
    case PlannerKind::kAccelThreshold: return "accel";
  }
  return "?";
}

// Restricts a posterior to one maneuver, keeping the clock profile. Falls
// back to the maneuver's start if the posterior carries no mass for it.
inline DiscreteDistribution condition_on_maneuver(const DiscreteDistribution& posterior,
                                                  int maneuver) {
  DiscreteDistribution out;
  double mass = 0.0;
  for (const auto& e : posterior.entries) {
    if (e.state.maneuver != maneuver || e.prob <= 0.0) continue;
    out.entries.push_back(e);
    mass += e.prob;
  }
  if (out.entries.empty() || mass <= 0.0) return DiscreteDistribution::point_mass({maneuver, 1});
  for (auto& e : out.entries) e.prob /= mass;
  return out;
}

namespace detail {

// Least-squares quadratic fit of position against time over the window;
// returns the signed acceleration along the direction of travel. Windows too
// short to fit a quadratic report zero.
inline double fitted_acceleration(const std::vector<Vec2>& window, double ts, double* speed_out) {
  const int n = static_cast<int>(window.size());
  if (speed_out) *speed_out = 0.0;
  if (n < 3) return 0.0;
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  Vec2 b0{0, 0}, b1{0, 0}, b2{0, 0};
  for (int k = 0; k < n; ++k) {
    const double t = k * ts;
    const double t2 = t * t;
    s0 += 1; s1 += t; s2 += t2; s3 += t2 * t; s4 += t2 * t2;
    b0 += window[k];
    b1 += window[k] * t;
    b2 += window[k] * t2;
  }
  // Solve the 3x3 normal equations by elimination, per axis.
  auto solve3 = [&](double y0, double y1, double y2, double* lin, double* quad) {
    double m[3][4] = {{s0, s1, s2, y0}, {s1, s2, s3, y1}, {s2, s3, s4, y2}};
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
      for (int c = 0; c < 4; ++c) std::swap(m[col][c], m[piv][c]);
      require(std::abs(m[col][col]) > 1e-12, "fitted_acceleration: singular fit");
      for (int r = 0; r < 3; ++r) {
        if (r == col) continue;
        const double f = m[r][col] / m[col][col];
        for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
      }
    }
    *lin = m[1][3] / m[1][1];
    *quad = m[2][3] / m[2][2];
  };
  double bx, cx, by, cy;
  solve3(b0.x, b1.x, b2.x, &bx, &cx);
  solve3(b0.y, b1.y, b2.y, &by, &cy);
  const double t_end = (n - 1) * ts;
  const Vec2 velocity{bx + 2.0 * cx * t_end, by + 2.0 * cy * t_end};
  const Vec2 accel{2.0 * cx, 2.0 * cy};
  const double speed = velocity.norm();
  if (speed_out) *speed_out = speed;
  if (speed < 1e-9) return 0.0;
  return (accel.x * velocity.x + accel.y * velocity.y) / speed;
}

}  // namespace detail

// Acceleration-threshold recognizer: an agent decelerating harder than
// accel_threshold (or already stopped) is treated as yielding, everyone else
// as keeping speed. Only meaningful for scenarios whose library carries both
// a "forward" and a "slow_down" maneuver.
inline DiscreteDistribution accel_threshold_posterior(const Scenario& scn,
                                                      const DiscreteDistribution& posterior,
                                                      const std::vector<Vec2>& window,
                                                      double accel_threshold = -0.5,
                                                      double stopped_speed = 0.3) {
  const int forward = scn.library.index_of("forward");
  const int yielding = scn.library.index_of("slow_down");
  double speed = 0.0;
  const double along = detail::fitted_acceleration(window, scn.ts, &speed);
  const bool yields =
      static_cast<int>(window.size()) >= 3 && (speed < stopped_speed || along < accel_threshold);
  return condition_on_maneuver(posterior, yields ? yielding : forward);
}

// The distribution a planner variant hands to the predictor for one agent.
inline DiscreteDistribution planner_posterior(PlannerKind kind, const Scenario& scn,
                                              const AgentBelief& belief) {
  switch (kind) {
    case PlannerKind::kIntentAware:
      return belief.posterior;
    case PlannerKind::kConservative:
      return DiscreteDistribution::uniform(scn.library);
    case PlannerKind::kRisky:
      return condition_on_maneuver(belief.posterior, scn.risky_assumption);
    case PlannerKind::kAccelThreshold:
      return accel_threshold_posterior(scn, belief.posterior, belief.window);
  }
  throw std::runtime_error("planner_posterior: bad planner kind");
}

}  // namespace riskplan
