#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "riskplan/intent.hpp"
#include "riskplan/risk.hpp"

namespace riskplan {

struct EgoAction {
  std::string name;
  std::vector<Vec2> deltas;  // displacement from the action start, one per tick
  double cost = 0.0;

  int ticks() const { return static_cast<int>(deltas.size()); }
};

// Chance-constrained planning model: ego picks one of a small set of
// fixed-duration motion primitives at each decision point; the agents
// evolve along their prediction trees; plans must keep the accumulated
// collision probability within the risk bound.
struct CCPOMDPModel {
  std::vector<EgoAction> actions;
  Rect goal;
  double d_safe = 2.5;
  int max_actions = 2;        // decision points per plan
  double delta = 0.05;        // risk bound over the plan
  double progress_rate = 0.0; // admissible cost per meter of remaining goal distance
  std::vector<PredictionTree> agent_trees;
  // Optional applicability filter (action index, ego position); null allows all.
  std::function<bool(int, Vec2)> applicable;

  bool action_applicable(int idx, Vec2 ego) const {
    return !applicable || applicable(idx, ego);
  }

  double terminal_cost(Vec2 ego) const {
    return goal.contains(ego) ? 0.0 : progress_rate * goal.distance_to(ego);
  }

  void validate() const {
    require(!actions.empty(), "model: no ego actions");
    require(delta >= 0.0 && delta <= 1.0, "model: risk bound outside [0, 1]");
    require(max_actions >= 1, "model: horizon must be at least one action");
    require(d_safe > 0.0, "model: safety distance must be positive");
    int max_ticks = 0;
    for (const auto& a : actions) {
      require(!a.deltas.empty(), "model: action with no ticks: " + a.name);
      require(a.cost >= 0.0, "model: negative action cost: " + a.name);
      max_ticks = std::max(max_ticks, a.ticks());
    }
    for (const auto& tree : agent_trees)
      require(tree.horizon() >= max_actions * max_ticks,
              "model: prediction horizon shorter than the worst-case plan");
  }
};

// Collision risks cache: keyed by agent, prediction node, and exact ego
// position bits. Lives for one solve, where the same node and ego tick
// recur across sibling subtrees.
class RiskMemo {
 public:
  double risk(const CCPOMDPModel& model, int agent, int node_id, Vec2 ego) {
    uint64_t xb, yb;
    std::memcpy(&xb, &ego.x, sizeof xb);
    std::memcpy(&yb, &ego.y, sizeof yb);
    Key key{agent, node_id, xb, yb};
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto& n = model.agent_trees[agent].nodes[node_id];
    const double r = collision_risk({n.mean, n.cov}, ego, model.d_safe);
    cache_.emplace(key, r);
    return r;
  }

  size_t size() const { return cache_.size(); }

 private:
  struct Key {
    int agent;
    int node;
    uint64_t x, y;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    size_t operator()(const Key& k) const {
      uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<uint64_t>(k.agent);
      for (const uint64_t v : {static_cast<uint64_t>(k.node), k.x, k.y}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      }
      return static_cast<size_t>(h);
    }
  };
  std::unordered_map<Key, double, KeyHash> cache_;
};

// Conditional distribution over one agent's prediction branches: node ids
// at a common tick, weights summing to one.
struct BranchSet {
  std::vector<int> nodes;
  std::vector<double> weights;
};

// The unconditioned starting set: every root branch of the tree.
inline BranchSet root_branch_set(const PredictionTree& tree) {
  BranchSet set;
  double total = 0.0;
  for (const int id : tree.by_depth[0]) {
    set.nodes.push_back(id);
    set.weights.push_back(tree.nodes[id].prob);
    total += tree.nodes[id].prob;
  }
  for (auto& w : set.weights) w /= total;
  return set;
}

// One joint resolution of the agents' maneuver choices over an action's
// ticks. Branches that enter the same maneuvers in the same order belong to
// one outcome: watching the agents drive reveals which maneuvers they picked,
// not their progress clocks or exact switch ticks. Those stay a weighted set.
struct Outcome {
  double prob = 1.0;
  double rb = 0.0;                // collision risk accumulated over the ticks
  std::vector<BranchSet> agents;  // per-agent branches at the final tick
};

// All joint maneuver-sequence outcomes of executing `action` from `ego` at
// tick `tick`, with the agents' branches distributed per `agents`. Outcome
// probabilities are conditional on the current sets and normalized; rb
// composes per-tick collision risks along each member branch and averages
// over the members of each group.
inline std::vector<Outcome> enumerate_outcomes(const CCPOMDPModel& model, RiskMemo& memo,
                                               Vec2 ego, int tick,
                                               const std::vector<BranchSet>& agents,
                                               const EgoAction& action) {
  const int end_tick = tick + action.ticks();
  struct Group {
    double mass = 0.0;
    double survival = 0.0;  // mass-weighted while grouping, normalized after
    BranchSet set;
  };
  std::vector<std::vector<Group>> per_agent;
  for (size_t i = 0; i < model.agent_trees.size(); ++i) {
    const auto& tree = model.agent_trees[i];
    require(end_tick <= tree.horizon(), "enumerate_outcomes: beyond prediction horizon");
    const BranchSet& current = agents[i];
    std::map<std::vector<int>, Group> groups;  // key: maneuvers entered, in order
    for (const int cand : tree.by_depth[end_tick]) {
      // Walk up to the current tick, scoring per-tick risk and recording
      // each maneuver entry (clock back at one) along the way.
      std::vector<int> entered;
      double survival = 1.0;
      int step = action.ticks();
      int cur = cand;
      while (tree.nodes[cur].depth > tick) {
        survival *= 1.0 - memo.risk(model, static_cast<int>(i), cur, ego + action.deltas[step - 1]);
        if (tree.nodes[cur].state.clock == 1) entered.push_back(tree.nodes[cur].state.maneuver);
        cur = tree.nodes[cur].parent;
        --step;
      }
      double base_weight = -1.0;
      for (size_t j = 0; j < current.nodes.size(); ++j)
        if (current.nodes[j] == cur) {
          base_weight = current.weights[j];
          break;
        }
      if (base_weight < 0.0) continue;
      std::reverse(entered.begin(), entered.end());
      const double mass = base_weight * tree.nodes[cand].prob / tree.nodes[cur].prob;
      Group& g = groups[entered];
      g.mass += mass;
      g.survival += mass * survival;
      g.set.nodes.push_back(cand);
      g.set.weights.push_back(mass);
    }
    require(!groups.empty(), "enumerate_outcomes: branch has no descendants");
    std::vector<Group> options;
    double total = 0.0;
    for (auto& [key, g] : groups) {
      g.survival /= g.mass;
      for (auto& w : g.set.weights) w /= g.mass;
      total += g.mass;
      options.push_back(std::move(g));
    }
    for (auto& g : options) g.mass /= total;
    per_agent.push_back(std::move(options));
  }

  std::vector<Outcome> outcomes;
  std::vector<size_t> idx(per_agent.size(), 0);
  while (true) {
    Outcome out;
    double survival = 1.0;
    for (size_t i = 0; i < per_agent.size(); ++i) {
      const auto& g = per_agent[i][idx[i]];
      out.prob *= g.mass;
      survival *= g.survival;
      out.agents.push_back(g.set);
    }
    out.rb = 1.0 - survival;
    outcomes.push_back(std::move(out));
    size_t pos = per_agent.size();
    while (pos > 0) {
      if (++idx[pos - 1] < per_agent[pos - 1].size()) break;
      idx[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  return outcomes;
}

}  // namespace riskplan
