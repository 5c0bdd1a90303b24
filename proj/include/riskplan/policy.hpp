#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "riskplan/ccpomdp.hpp"

namespace riskplan {

struct PolicyNode {
  int action = -1;  // ego action index; -1 marks a terminal node
  Vec2 ego{0, 0};
  int tick = 0;
  double rb = 0.0;             // collision risk accumulated on arrival
  double expected_cost = 0.0;  // cost-to-go
  double execution_risk = 0.0;
  std::vector<BranchSet> agent_branches;
  struct Edge {
    double prob = 0.0;
    int child = -1;
  };
  std::vector<Edge> outcomes;
};

struct Policy {
  std::vector<PolicyNode> nodes;  // node 0 is the root
  double expected_cost = 0.0;
  double execution_risk = 0.0;

  int root_action() const { return nodes.empty() ? -1 : nodes[0].action; }
};

// Bottom-up re-evaluation of the recursion the solver claims to satisfy:
// er = rb + (1 - rb) * sum_o P(o) er(o), er = rb at terminals.
inline double recompute_execution_risk(const Policy& policy, int node_id = 0) {
  const PolicyNode& n = policy.nodes[node_id];
  if (n.outcomes.empty()) return n.rb;
  double downstream = 0.0;
  for (const auto& edge : n.outcomes)
    downstream += edge.prob * recompute_execution_risk(policy, edge.child);
  return n.rb + (1.0 - n.rb) * downstream;
}

inline nlohmann::ordered_json policy_to_json(const Policy& policy, const CCPOMDPModel& model,
                                             int node_id = 0) {
  const PolicyNode& n = policy.nodes[node_id];
  nlohmann::ordered_json j;
  j["action"] = n.action >= 0 ? model.actions[n.action].name : "terminal";
  j["ego"] = {n.ego.x, n.ego.y};
  j["tick"] = n.tick;
  j["arrival_risk"] = n.rb;
  j["cost_to_go"] = n.expected_cost;
  j["execution_risk"] = n.execution_risk;
  if (!n.outcomes.empty()) {
    j["outcomes"] = nlohmann::ordered_json::array();
    for (const auto& edge : n.outcomes) {
      nlohmann::ordered_json o = policy_to_json(policy, model, edge.child);
      o["prob"] = edge.prob;
      j["outcomes"].push_back(std::move(o));
    }
  }
  return j;
}

}  // namespace riskplan
