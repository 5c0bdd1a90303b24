#pragma once

#include <cmath>
#include <vector>

#include "riskplan/rng.hpp"
#include "riskplan/scenario.hpp"

namespace riskplan {

inline int sample_weighted(const std::vector<std::pair<int, double>>& table, Rng& rng) {
  require(!table.empty(), "sample_weighted: empty table");
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& [idx, p] : table) {
    acc += p;
    if (u < acc) return idx;
  }
  return table.back().first;
}

// One concrete draw of a maneuver: the tube mean translated to start at the
// anchor, plus smooth correlated noise whose per-clock marginal matches the
// learned covariance exactly (stationary unit AR(1) shaped by the per-clock
// Cholesky factor), mirroring how demonstrations are synthesized.
inline std::vector<Vec2> sample_activation(const ProbabilisticFlowTube& pft, Vec2 anchor,
                                           double correlation, Rng& rng) {
  require(correlation >= 0.0 && correlation < 1.0, "sample_activation: bad correlation");
  const int len = pft.length();
  std::vector<Vec2> pts(len);
  const double blend = std::sqrt(1.0 - correlation * correlation);
  Vec2 e{rng.normal(), rng.normal()};
  for (int clock = 1; clock <= len; ++clock) {
    if (clock > 1) e = e * correlation + Vec2{rng.normal(), rng.normal()} * blend;
    double l11, l21, l22;
    pft.cov_at(clock).cholesky(l11, l21, l22);
    pts[clock - 1] = anchor + (pft.mean_at(clock) - pft.mean_at(1)) +
                     Vec2{l11 * e.x, l21 * e.x + l22 * e.y};
  }
  return pts;
}

struct AgentTruth {
  int maneuver = 0;
  int clock = 1;  // 1-based index into the activation
  std::vector<Vec2> activation;

  Vec2 position() const { return activation[clock - 1]; }
  int length() const { return static_cast<int>(activation.size()); }
};

// Ground-truth simulation state. Agents follow sampled maneuver activations;
// when a maneuver's clock runs out, the guarded successor table picks the
// next maneuver, which is re-anchored at the agent's current position and
// dwells there for one tick before moving (mirroring the prediction model).
// The ego is advanced by the trial loop, which owns the action being tracked.
class World {
 public:
  World(const Scenario& scn, uint64_t master_seed, int trial_index)
      : scn_(scn), ego_(scn.ego_start) {
    const uint64_t trial_master =
        Rng::stream(master_seed, static_cast<uint64_t>(trial_index)).next_u64();
    for (size_t i = 0; i < scn.agents.size(); ++i) {
      rngs_.push_back(Rng::stream(trial_master, i));
      Rng& rng = rngs_.back();
      const AgentSpec& spec = scn.agents[i];
      AgentTruth agent;
      agent.maneuver = sample_weighted(spec.initial_maneuvers, rng);
      const Vec2 anchor = spec.spawn + Vec2{spec.spawn_jitter.x * (2.0 * rng.uniform() - 1.0),
                                            spec.spawn_jitter.y * (2.0 * rng.uniform() - 1.0)};
      agent.activation =
          sample_activation(scn.library.at(agent.maneuver), anchor, kNoiseCorrelation, rng);
      agents_.push_back(std::move(agent));
    }
  }

  const Scenario& scenario() const { return scn_; }
  int tick() const { return tick_; }
  Vec2 ego() const { return ego_; }
  void move_ego(Vec2 position) { ego_ = position; }
  const std::vector<AgentTruth>& agents() const { return agents_; }

  std::vector<Vec2> agent_positions() const {
    std::vector<Vec2> out;
    for (const auto& a : agents_) out.push_back(a.position());
    return out;
  }

  // Advances every agent by one tick. Guard predicates see the other agents
  // at their positions before anyone moves.
  void step_agents() {
    const std::vector<Vec2> snapshot = agent_positions();
    for (size_t i = 0; i < agents_.size(); ++i) {
      AgentTruth& agent = agents_[i];
      if (agent.clock < agent.length()) {
        ++agent.clock;
        continue;
      }
      std::vector<Vec2> others;
      for (size_t j = 0; j < snapshot.size(); ++j)
        if (j != i) others.push_back(snapshot[j]);
      const GuardContext ctx = scn_.guard_context(snapshot[i], others);
      agent.maneuver = sample_weighted(scn_.transitions.successors(agent.maneuver, ctx), rngs_[i]);
      agent.activation = sample_activation(scn_.library.at(agent.maneuver), snapshot[i],
                                           kNoiseCorrelation, rngs_[i]);
      agent.clock = 1;
    }
    ++tick_;
  }

  bool near_collision() const {
    for (const auto& a : agents_)
      if (distance(a.position(), ego_) < scn_.d_safe) return true;
    return false;
  }

  static constexpr double kNoiseCorrelation = 0.9;

 private:
  const Scenario& scn_;
  int tick_ = 0;
  Vec2 ego_;
  std::vector<AgentTruth> agents_;
  std::vector<Rng> rngs_;
};

}  // namespace riskplan
