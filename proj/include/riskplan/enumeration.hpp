#pragma once

#include <map>
#include <vector>

#include "riskplan/ccpomdp.hpp"

namespace riskplan {

struct EnumerationResult {
  bool feasible = false;
  double cost = 0.0;
  double er = 0.0;
  int root_action = -1;
};

namespace detail {

struct PolicyValue {
  double cost = 0.0;
  double er = 0.0;
  int root_action = -1;
};

class Enumerator {
 public:
  explicit Enumerator(const CCPOMDPModel& model, Vec2 ego_start) : model_(model) {
    require(model.actions.size() <= 3, "enumerate: more than three ego actions");
    require(model.max_actions <= 3, "enumerate: horizon longer than three actions");
    std::vector<BranchSet> roots;
    for (const auto& tree : model.agent_trees) {
      BranchSet set;
      double total = 0.0;
      for (const int id : tree.by_depth[0]) {
        set.nodes.push_back(id);
        set.weights.push_back(tree.nodes[id].prob);
        total += tree.nodes[id].prob;
      }
      for (auto& w : set.weights) w /= total;
      roots.push_back(std::move(set));
    }
    root_ = policies(ego_start, 0, 0, 0.0, roots);
  }

  const std::vector<PolicyValue>& root_policies() const { return root_; }

 private:
  // Every deterministic policy from this decision node, valued by direct
  // evaluation, in action-major, outcome-lexicographic order.
  std::vector<PolicyValue> policies(Vec2 ego, int tick, int taken, double rb,
                                    const std::vector<BranchSet>& agent_sets) {
    std::vector<int> applicable;
    if (taken < model_.max_actions && !model_.goal.contains(ego))
      for (size_t a = 0; a < model_.actions.size(); ++a)
        if (model_.action_applicable(static_cast<int>(a), ego)) applicable.push_back(a);
    if (applicable.empty()) return {{model_.terminal_cost(ego), rb, -1}};

    std::vector<PolicyValue> out;
    for (const int a : applicable) {
      const EgoAction& action = model_.actions[a];
      const int end_tick = tick + action.ticks();

      // Joint maneuver-sequence outcomes, walking the prediction trees
      // directly: member branches are grouped by the maneuvers they enter.
      struct Branch {
        double prob;
        double rb;
        std::vector<BranchSet> sets;
      };
      std::vector<Branch> outcomes{{1.0, 0.0, {}}};
      for (size_t i = 0; i < model_.agent_trees.size(); ++i) {
        const auto& tree = model_.agent_trees[i];
        struct Member {
          int node;
          double mass;
          double survive;
        };
        std::map<std::vector<int>, std::vector<Member>> groups;
        for (int cand = 0; cand < static_cast<int>(tree.nodes.size()); ++cand) {
          if (tree.nodes[cand].depth != end_tick) continue;
          std::vector<int> path;
          int cur = cand;
          while (tree.nodes[cur].depth > tick) {
            path.push_back(cur);
            cur = tree.nodes[cur].parent;
          }
          double base = -1.0;
          for (size_t j = 0; j < agent_sets[i].nodes.size(); ++j)
            if (agent_sets[i].nodes[j] == cur) {
              base = agent_sets[i].weights[j] / tree.nodes[cur].prob;
              break;
            }
          if (base < 0.0) continue;
          double survive = 1.0;
          std::vector<int> entered;
          for (size_t k = 0; k < path.size(); ++k) {
            const auto& n = tree.nodes[path[path.size() - 1 - k]];
            survive *= 1.0 - collision_risk({n.mean, n.cov}, ego + action.deltas[k],
                                            model_.d_safe);
            if (n.state.clock == 1) entered.push_back(n.state.maneuver);
          }
          groups[entered].push_back({cand, base * tree.nodes[cand].prob, survive});
        }
        std::vector<Branch> grown;
        for (const auto& [key, members] : groups) {
          double mass = 0.0;
          double survive = 0.0;
          BranchSet set;
          for (const auto& m : members) {
            mass += m.mass;
            survive += m.mass * m.survive;
            set.nodes.push_back(m.node);
            set.weights.push_back(m.mass);
          }
          survive /= mass;
          for (auto& w : set.weights) w /= mass;
          for (const auto& prefix : outcomes) {
            Branch b = prefix;
            b.prob *= mass;
            b.rb = 1.0 - (1.0 - b.rb) * survive;
            b.sets.push_back(set);
            grown.push_back(std::move(b));
          }
        }
        outcomes = std::move(grown);
      }
      double mass = 0.0;
      for (const auto& o : outcomes) mass += o.prob;
      for (auto& o : outcomes) o.prob /= mass;
      require(outcomes.size() <= 9, "enumerate: more than nine outcomes at a decision");

      std::vector<std::vector<PolicyValue>> child_values;
      size_t combos = 1;
      for (const auto& o : outcomes) {
        child_values.push_back(
            policies(ego + action.deltas.back(), end_tick, taken + 1, o.rb, o.sets));
        combos *= child_values.back().size();
        require(combos <= 1000000, "enumerate: policy count exceeds the guard");
      }
      total_combos_ += combos;
      require(total_combos_ <= 1000000, "enumerate: policy count exceeds the guard");

      std::vector<size_t> pick(outcomes.size(), 0);
      while (true) {
        PolicyValue v;
        v.root_action = a;
        v.cost = action.cost;
        double downstream = 0.0;
        for (size_t oi = 0; oi < outcomes.size(); ++oi) {
          v.cost += outcomes[oi].prob * child_values[oi][pick[oi]].cost;
          downstream += outcomes[oi].prob * child_values[oi][pick[oi]].er;
        }
        v.er = rb + (1.0 - rb) * downstream;
        out.push_back(v);
        size_t pos = pick.size();
        while (pos > 0) {
          if (++pick[pos - 1] < child_values[pos - 1].size()) break;
          pick[pos - 1] = 0;
          --pos;
        }
        if (pos == 0) break;
      }
    }
    return out;
  }

  const CCPOMDPModel& model_;
  std::vector<PolicyValue> root_;
  size_t total_combos_ = 0;
};

}  // namespace detail

// Exhaustive reference: enumerate every deterministic policy, evaluate it
// exactly, and pick the cheapest one satisfying the risk bound. Only for
// small fixtures; throws if the guard limits are exceeded.
inline EnumerationResult enumerate_oracle(const CCPOMDPModel& model, Vec2 ego_start) {
  model.validate();
  const detail::Enumerator en(model, ego_start);
  EnumerationResult best;
  for (const auto& v : en.root_policies()) {
    if (v.er > model.delta + 1e-12) continue;
    if (!best.feasible || v.cost < best.cost - 1e-15 ||
        (std::abs(v.cost - best.cost) <= 1e-15 && v.er < best.er - 1e-15)) {
      best.feasible = true;
      best.cost = v.cost;
      best.er = v.er;
      best.root_action = v.root_action;
    }
  }
  return best;
}

}  // namespace riskplan
