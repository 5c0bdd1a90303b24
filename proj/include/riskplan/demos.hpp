#pragma once

#include <vector>

#include "riskplan/rng.hpp"
#include "riskplan/trajectory.hpp"

namespace riskplan {

struct DemoNoise {
  double position_sd = 0.05;  // stationary per-axis deviation from the nominal path
  double correlation = 0.9;   // tick-to-tick noise correlation
  double pace_sd = 0.04;      // spread of the per-demo sustained pace factor
};

// Synthetic demonstrations of a nominal path: each demo is a fixed-duration
// clip of a driver traversing the path at a sustained pace drawn near one,
// plus smooth correlated noise whose per-tick marginal matches position_sd.
// Slow drivers end short of the path end; fast ones run on along the final
// heading. Zero noise and zero pace spread reproduce the nominal path exactly.
inline std::vector<Trajectory> synth_demos(const std::vector<Vec2>& nominal, double ts, int count,
                                           const DemoNoise& noise, uint64_t seed) {
  require(nominal.size() >= 2, "synth_demos: nominal path too short");
  require(count >= 1, "synth_demos: need at least one demo");
  const int last = static_cast<int>(nominal.size()) - 1;
  std::vector<Trajectory> demos;
  for (int d = 0; d < count; ++d) {
    Rng rng = Rng::stream(seed, d);
    double pace = 1.0 + noise.pace_sd * rng.normal();
    pace = std::clamp(pace, 0.8, 1.25);
    Trajectory traj;
    Vec2 e{0, 0};
    const double blend = std::sqrt(1.0 - noise.correlation * noise.correlation);
    for (int k = 0; k <= last; ++k) {
      const double u = pace * k;
      Vec2 base;
      if (u >= last) {
        base = nominal[last] + (nominal[last] - nominal[last - 1]) * (u - last);
      } else {
        const size_t i = static_cast<size_t>(u);
        const double f = u - i;
        base = nominal[i] * (1.0 - f) + nominal[i + 1] * f;
      }
      if (k == 0)
        e = {rng.normal(), rng.normal()};
      else
        e = e * noise.correlation + Vec2{rng.normal(), rng.normal()} * blend;
      traj.push_back(ts * k, base + e * noise.position_sd);
    }
    traj.validate();
    demos.push_back(std::move(traj));
  }
  return demos;
}

}  // namespace riskplan
