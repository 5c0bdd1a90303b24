#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "riskplan/ccpomdp.hpp"
#include "riskplan/policy.hpp"

namespace riskplan {

struct SolveResult {
  std::optional<Policy> policy;
  int expansions = 0;  // decision nodes whose actions were evaluated
};

namespace detail {

constexpr double kBudgetSlack = 1e-12;
constexpr size_t kMaxSearchNodes = 1000000;

// One achievable (cost, execution-risk) pair at a decision node, with the
// choices needed to reconstruct the policy that attains it.
struct FrontierEntry {
  double cost = 0.0;
  double er = 0.0;
  int act_pos = -1;                // index into SearchNode::acts; -1 terminal
  std::vector<int> child_entries;  // frontier index per outcome
};

struct SearchNode {
  Vec2 ego{0, 0};
  int tick = 0;
  double rb = 0.0;
  std::vector<BranchSet> agent_sets;
  std::vector<FrontierEntry> frontier;  // non-dominated, generation order
  struct ActEval {
    int action = -1;
    std::vector<Outcome> outcomes;
    std::vector<std::unique_ptr<SearchNode>> children;
  };
  std::vector<ActEval> acts;
};

struct SearchContext {
  const CCPOMDPModel& model;
  RiskMemo memo;
  bool use_heuristics = true;
  int expansions = 0;
  size_t nodes_created = 0;
  double min_action_cost = 0.0;
  double bound_rate = 0.0;  // admissible cost per meter of goal progress
};

// Admissible cost-to-go lower bound: covering the remaining goal distance
// costs at least bound_rate per meter (bound_rate is the terminal
// progress_rate clamped to the cheapest cost-per-meter any action can
// move, so the bound never exceeds the true cost-to-go), and a node that
// still has actions left and at least one applicable must spend one.
inline double cost_to_go_bound(const SearchContext& ctx, Vec2 ego, int remaining_actions) {
  if (ctx.model.goal.contains(ego)) return 0.0;
  const double progress = ctx.bound_rate * ctx.model.goal.distance_to(ego);
  if (remaining_actions <= 0) return progress;
  bool any_applicable = false;
  for (size_t a = 0; a < ctx.model.actions.size() && !any_applicable; ++a)
    any_applicable = ctx.model.action_applicable(static_cast<int>(a), ego);
  return any_applicable ? std::max(progress, ctx.min_action_cost) : progress;
}

// Keep only non-dominated entries, preferring earlier generation on exact
// ties. The result is sorted by ascending cost with strictly decreasing
// risk.
inline void prune_dominated(std::vector<FrontierEntry>& entries) {
  if (entries.size() <= 1) return;
  std::vector<size_t> order(entries.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    if (entries[i].cost != entries[j].cost) return entries[i].cost < entries[j].cost;
    if (entries[i].er != entries[j].er) return entries[i].er < entries[j].er;
    return i < j;
  });
  std::vector<FrontierEntry> kept;
  double best_er = std::numeric_limits<double>::infinity();
  for (const size_t idx : order) {
    if (entries[idx].er >= best_er) continue;
    best_er = entries[idx].er;
    kept.push_back(std::move(entries[idx]));
  }
  entries = std::move(kept);
}

constexpr size_t kFrontierLimit = 512;
constexpr double kFrontierBuckets = 384.0;

// Folding many stochastic outcomes can leave exponentially many
// non-dominated (cost, risk) pairs. Once a frontier outgrows the limit it
// is thinned to the cheapest entry per risk bucket plus the lowest-risk
// entry. Surviving entries keep their true cost and risk, so everything
// built from them stays exactly evaluated and the risk bound is never
// violated; only cost optimality can degrade, by at most the gap between
// neighboring buckets. Frontiers under the limit are untouched.
inline void compact_frontier(std::vector<FrontierEntry>& entries) {
  if (entries.size() <= kFrontierLimit) return;
  const double grid = entries.front().er / kFrontierBuckets;  // max er; see prune_dominated
  if (grid <= 0.0) {
    entries.resize(1);
    return;
  }
  std::vector<FrontierEntry> kept;
  long long last_bucket = std::numeric_limits<long long>::max();
  for (size_t i = 0; i + 1 < entries.size(); ++i) {
    const long long bucket = static_cast<long long>(std::ceil(entries[i].er / grid - 1e-9));
    if (bucket == last_bucket) continue;  // a cheaper entry already covers this risk level
    last_bucket = bucket;
    kept.push_back(std::move(entries[i]));
  }
  kept.push_back(std::move(entries.back()));
  entries = std::move(kept);
}

inline std::unique_ptr<SearchNode> evaluate(SearchContext& ctx, Vec2 ego, int tick,
                                            int actions_taken, double rb,
                                            std::vector<BranchSet> agent_sets, double budget) {
  require(++ctx.nodes_created <= kMaxSearchNodes, "solve: search exceeded the node budget");
  auto node = std::make_unique<SearchNode>();
  node->ego = ego;
  node->tick = tick;
  node->rb = rb;
  node->agent_sets = std::move(agent_sets);

  const CCPOMDPModel& model = ctx.model;
  std::vector<int> applicable;
  if (actions_taken < model.max_actions && !model.goal.contains(ego))
    for (size_t a = 0; a < model.actions.size(); ++a)
      if (model.action_applicable(static_cast<int>(a), ego)) applicable.push_back(a);

  if (applicable.empty()) {
    node->frontier.push_back({model.terminal_cost(ego), rb, -1, {}});
    return node;
  }

  ++ctx.expansions;
  const double sub_budget =
      ctx.use_heuristics ? std::clamp((budget - rb) / std::max(1.0 - rb, 1e-300), 0.0, 1.0)
                         : 1.0;

  for (const int a : applicable) {
    const EgoAction& action = model.actions[a];
    SearchNode::ActEval act;
    act.action = a;
    act.outcomes = enumerate_outcomes(model, ctx.memo, ego, tick, node->agent_sets, action);
    const Vec2 ego_end = ego + action.deltas.back();
    const int end_tick = tick + action.ticks();

    if (ctx.use_heuristics) {
      double er_lb_down = 0.0;
      for (const auto& o : act.outcomes) er_lb_down += o.prob * o.rb;
      const double er_lb = rb + (1.0 - rb) * er_lb_down;
      if (er_lb > budget + kBudgetSlack) continue;  // cannot satisfy the bound
      const double cost_lb =
          action.cost + cost_to_go_bound(ctx, ego_end, model.max_actions - actions_taken - 1);
      bool dominated = false;
      for (const auto& e : node->frontier)
        if (e.cost <= cost_lb && e.er <= er_lb) {
          dominated = true;
          break;
        }
      if (dominated) continue;
    }

    // Fold outcomes one at a time into partial (cost, downstream-risk) pairs.
    std::vector<FrontierEntry> partial{{action.cost, 0.0, -1, {}}};
    bool abandoned = false;
    for (size_t oi = 0; oi < act.outcomes.size() && !abandoned; ++oi) {
      const Outcome& o = act.outcomes[oi];
      const double child_budget =
          ctx.use_heuristics ? std::min(1.0, sub_budget / std::max(o.prob, 1e-300)) : 1.0;
      act.children.push_back(evaluate(ctx, ego_end, end_tick, actions_taken + 1, o.rb,
                                      o.agents, child_budget));
      const auto& child_frontier = act.children.back()->frontier;
      std::vector<FrontierEntry> next;
      for (const auto& p : partial) {
        for (size_t ci = 0; ci < child_frontier.size(); ++ci) {
          FrontierEntry cand = p;
          cand.cost += o.prob * child_frontier[ci].cost;
          cand.er += o.prob * child_frontier[ci].er;
          if (ctx.use_heuristics && cand.er > sub_budget + kBudgetSlack) continue;
          cand.child_entries.push_back(static_cast<int>(ci));
          next.push_back(std::move(cand));
        }
      }
      prune_dominated(next);
      compact_frontier(next);
      partial = std::move(next);
      if (partial.empty()) abandoned = true;
    }
    if (abandoned) continue;

    const int act_pos = static_cast<int>(node->acts.size());
    node->acts.push_back(std::move(act));
    for (auto& p : partial) {
      p.er = rb + (1.0 - rb) * p.er;
      p.act_pos = act_pos;
      node->frontier.push_back(std::move(p));
    }
  }
  prune_dominated(node->frontier);
  compact_frontier(node->frontier);
  return node;
}

inline int emit_policy(const SearchNode& node, const FrontierEntry& entry, Policy& policy) {
  const int id = static_cast<int>(policy.nodes.size());
  policy.nodes.emplace_back();
  {
    PolicyNode& out = policy.nodes[id];
    out.ego = node.ego;
    out.tick = node.tick;
    out.rb = node.rb;
    out.expected_cost = entry.cost;
    out.execution_risk = entry.er;
    out.agent_branches = node.agent_sets;
    out.action = entry.act_pos >= 0 ? node.acts[entry.act_pos].action : -1;
  }
  if (entry.act_pos >= 0) {
    const auto& act = node.acts[entry.act_pos];
    for (size_t oi = 0; oi < act.outcomes.size(); ++oi) {
      const int child = emit_policy(*act.children[oi],
                                    act.children[oi]->frontier[entry.child_entries[oi]], policy);
      policy.nodes[id].outcomes.push_back({act.outcomes[oi].prob, child});
    }
  }
  return id;
}

}  // namespace detail

// Exact bi-criteria search over the plan tree: every decision node keeps
// the full Pareto frontier of (expected cost, execution risk), so the
// returned policy is the minimum-cost one whose execution risk stays
// within the bound. Heuristics (admissible risk and cost-to-go bounds)
// only prune provably dominated or infeasible subtrees.
inline SolveResult solve(const CCPOMDPModel& model, Vec2 ego_start, bool use_heuristics = true) {
  model.validate();
  detail::SearchContext ctx{model};
  ctx.use_heuristics = use_heuristics;
  ctx.min_action_cost = model.actions[0].cost;
  ctx.bound_rate = model.progress_rate;
  for (const auto& a : model.actions) {
    ctx.min_action_cost = std::min(ctx.min_action_cost, a.cost);
    const double reach = a.deltas.back().norm();
    if (reach > 0.0) ctx.bound_rate = std::min(ctx.bound_rate, a.cost / reach);
  }

  std::vector<BranchSet> roots;
  for (const auto& tree : model.agent_trees) roots.push_back(root_branch_set(tree));
  const auto root =
      detail::evaluate(ctx, ego_start, 0, 0, 0.0, std::move(roots), model.delta);

  SolveResult result;
  result.expansions = ctx.expansions;
  const detail::FrontierEntry* best = nullptr;
  for (const auto& e : root->frontier) {
    if (e.er > model.delta + detail::kBudgetSlack) continue;
    if (!best || e.cost < best->cost - 1e-15 ||
        (std::abs(e.cost - best->cost) <= 1e-15 && e.er < best->er - 1e-15))
      best = &e;
  }
  if (!best) return result;

  Policy policy;
  detail::emit_policy(*root, *best, policy);
  policy.expected_cost = best->cost;
  policy.execution_risk = best->er;
  result.policy = std::move(policy);
  return result;
}

}  // namespace riskplan
