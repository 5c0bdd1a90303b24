#include "riskplan/solver.hpp"

#include <gtest/gtest.h>

#include "riskplan/enumeration.hpp"
#include "riskplan/rng.hpp"

namespace riskplan {
namespace {

PredictionTree hand_tree(const std::vector<std::tuple<int, double, Vec2, double>>& spec) {
  // spec rows: (parent, prob, mean, sigma^2); depth = parent depth + 1.
  // Every node poses as a freshly entered maneuver so each tree branch is
  // its own observation outcome.
  PredictionTree tree;
  for (const auto& [parent, prob, mean, var] : spec) {
    PredictionNode n;
    n.parent = parent;
    n.prob = prob;
    n.mean = mean;
    n.cov = Mat2::isotropic(var);
    n.depth = parent < 0 ? 0 : tree.nodes[parent].depth + 1;
    n.state = {static_cast<int>(tree.nodes.size()), 1};
    tree.nodes.push_back(n);
  }
  int horizon = 0;
  for (const auto& n : tree.nodes) horizon = std::max(horizon, n.depth);
  tree.by_depth.assign(horizon + 1, {});
  for (size_t i = 0; i < tree.nodes.size(); ++i)
    tree.by_depth[tree.nodes[i].depth].push_back(static_cast<int>(i));
  return tree;
}

CCPOMDPModel split_model() {
  // One agent that either swerves onto the ego path (p = 0.5, risk 0.3 by
  // construction of the variance) or drifts far away (p = 0.5, risk 0).
  const double var = 6.25 / (2.0 * std::log(1.0 / 0.7));
  CCPOMDPModel m;
  m.agent_trees.push_back(hand_tree({{-1, 1.0, {0, 5}, 0.01},
                                     {0, 0.5, {1, 0}, var},
                                     {0, 0.5, {100, 100}, 0.01}}));
  m.actions.push_back({"go", {{1, 0}}, 1.0});
  m.actions.push_back({"wait", {{0, -50}}, 3.0});
  m.goal = {50, 51, -1, 1};
  m.d_safe = 2.5;
  m.max_actions = 1;
  m.delta = 0.2;
  return m;
}

TEST(Solver, SplitRiskAveragesAcrossOutcomes) {
  // With outcome risks 0.3 and 0 at probability one half each, the risk of
  // driving on is 0.15: within a 0.2 bound the cheap action must win, and
  // a 0.1 bound must force the detour. A per-outcome split of the budget
  // would wrongly reject the cheap action at 0.2.
  CCPOMDPModel m = split_model();
  const auto res = solve(m, {0, 0});
  ASSERT_TRUE(res.policy.has_value());
  EXPECT_EQ(res.policy->root_action(), 0);
  EXPECT_NEAR(res.policy->expected_cost, 1.0, 1e-9);
  EXPECT_NEAR(res.policy->execution_risk, 0.15, 1e-6);

  m.delta = 0.1;
  const auto strict = solve(m, {0, 0});
  ASSERT_TRUE(strict.policy.has_value());
  EXPECT_EQ(strict.policy->root_action(), 1);
  EXPECT_NEAR(strict.policy->expected_cost, 3.0, 1e-9);
  EXPECT_NEAR(strict.policy->execution_risk, 0.0, 1e-9);

  const auto oracle = enumerate_oracle(m, {0, 0});
  EXPECT_TRUE(oracle.feasible);
  EXPECT_EQ(oracle.root_action, 1);
  EXPECT_NEAR(oracle.cost, 3.0, 1e-9);
}

TEST(Solver, InfeasibleRootReturnsNoPolicy) {
  CCPOMDPModel m = split_model();
  m.actions.erase(m.actions.begin() + 1);  // only the risky action remains
  m.delta = 0.01;
  const auto res = solve(m, {0, 0});
  EXPECT_FALSE(res.policy.has_value());
  EXPECT_GT(res.expansions, 0);
  EXPECT_FALSE(enumerate_oracle(m, {0, 0}).feasible);
}

// ====== randomized equivalence against exhaustive enumeration ======

struct Fixture {
  CCPOMDPModel model;
  Vec2 ego_start;
};

Fixture random_fixture(uint64_t seed) {
  Rng rng(seed);
  Fixture fx;
  CCPOMDPModel& m = fx.model;
  fx.ego_start = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};

  const int n_actions = 2 + static_cast<int>(rng.below(2));
  const int ticks = 1 + static_cast<int>(rng.below(2));
  for (int a = 0; a < n_actions; ++a) {
    EgoAction act;
    act.name = "a" + std::to_string(a);
    Vec2 at{0, 0};
    for (int t = 0; t < ticks; ++t) {
      at += {rng.uniform(-0.2, 1.2), rng.uniform(-0.7, 0.7)};
      act.deltas.push_back(at);
    }
    act.cost = rng.uniform(0.5, 3.0);
    m.actions.push_back(std::move(act));
  }
  m.max_actions = 2;
  m.d_safe = rng.uniform(0.8, 1.5);
  m.progress_rate = rng.uniform(0.0, 1.0);
  m.goal = {3.0, 6.0, -2.0, 2.0};
  const double deltas[] = {0.01, 0.05, 0.1, 0.3, 1.0};
  m.delta = deltas[rng.below(5)];

  // Agent tube library: two maneuvers wandering across the ego corridor.
  PftLibrary lib;
  lib.ts = 0.1;
  for (int mi = 0; mi < 2; ++mi) {
    ProbabilisticFlowTube pft;
    pft.label = "m" + std::to_string(mi);
    pft.ts = 0.1;
    Vec2 p{rng.uniform(-0.5, 1.5), rng.uniform(-1.5, 1.5)};
    const int len = 2 + static_cast<int>(rng.below(2));
    for (int i = 0; i < len; ++i) {
      pft.means.push_back(p);
      pft.covs.push_back(Mat2::isotropic(rng.uniform(0.02, 0.3)));
      p += {rng.uniform(-0.3, 0.9), rng.uniform(-0.8, 0.8)};
    }
    pft.demo_count = 1;
    lib.maneuvers.push_back(std::move(pft));
  }

  DiscreteTransitionModel td;
  td.per_maneuver.resize(2);
  const double split = rng.uniform(0.2, 0.8);
  td.per_maneuver[0].recurrent = true;
  td.per_maneuver[0].rules = {{Guard::always(), {{0, split}, {1, 1.0 - split}}}};
  td.per_maneuver[1].rules = {{Guard::always(), {{0, 1.0}}}};

  GuardContext ctx;
  ctx.self = {0, 0};
  ctx.lane_centers_y = {0.0};
  const int horizon = m.max_actions * ticks;
  const int n_agents = rng.below(4) == 0 ? 2 : 1;
  for (int agent = 0; agent < n_agents; ++agent) {
    DiscreteDistribution post;
    if (n_agents == 2) {
      // Keep joint outcomes within the enumeration guard: deterministic
      // chains only.
      DiscreteTransitionModel chain;
      chain.per_maneuver.resize(2);
      chain.per_maneuver[0].rules = {{Guard::always(), {{1, 1.0}}}};
      chain.per_maneuver[1].recurrent = true;
      chain.per_maneuver[1].rules = {{Guard::always(), {{1, 1.0}}}};
      post = DiscreteDistribution::point_mass({static_cast<int>(rng.below(2)), 1});
      m.agent_trees.push_back(predict_hybrid(
          post, {rng.uniform(-1, 2), rng.uniform(-1.5, 1.5)}, chain, lib, ctx, horizon, 0.0));
    } else {
      post = DiscreteDistribution::point_mass({0, 1 + static_cast<int>(rng.below(2))});
      m.agent_trees.push_back(predict_hybrid(
          post, {rng.uniform(-1, 2), rng.uniform(-1.5, 1.5)}, td, lib, ctx, horizon, 0.0));
    }
  }
  return fx;
}

TEST(Solver, MatchesExhaustiveEnumerationOnRandomFixtures) {
  int feasible_count = 0;
  int risky_count = 0;
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    const Fixture fx = random_fixture(seed);
    const auto oracle = enumerate_oracle(fx.model, fx.ego_start);
    const auto with_h = solve(fx.model, fx.ego_start, true);
    const auto without_h = solve(fx.model, fx.ego_start, false);

    ASSERT_EQ(with_h.policy.has_value(), oracle.feasible) << "seed " << seed;
    ASSERT_EQ(without_h.policy.has_value(), oracle.feasible) << "seed " << seed;
    EXPECT_LE(with_h.expansions, without_h.expansions) << "seed " << seed;
    if (!oracle.feasible) continue;
    ++feasible_count;
    if (oracle.er > 1e-3) ++risky_count;
    for (const auto* res : {&with_h, &without_h}) {
      EXPECT_NEAR(res->policy->expected_cost, oracle.cost, 1e-9) << "seed " << seed;
      EXPECT_NEAR(res->policy->execution_risk, oracle.er, 1e-9) << "seed " << seed;
      EXPECT_EQ(res->policy->root_action(), oracle.root_action) << "seed " << seed;
      EXPECT_LE(res->policy->execution_risk, fx.model.delta + 1e-12) << "seed " << seed;
      EXPECT_NEAR(recompute_execution_risk(*res->policy), res->policy->execution_risk, 1e-9)
          << "seed " << seed;
    }
  }
  // The generator should produce a healthy mix of feasible, infeasible,
  // and risk-bearing instances; if not, the comparison is vacuous.
  EXPECT_GE(feasible_count, 20);
  EXPECT_GE(50 - feasible_count, 5);
  EXPECT_GE(risky_count, 10);
}

TEST(Solver, CostIsMonotoneInRiskBound) {
  Fixture fx = random_fixture(3);
  double prev_cost = std::numeric_limits<double>::infinity();
  bool was_feasible = false;
  for (const double delta : {0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0}) {
    fx.model.delta = delta;
    const auto res = solve(fx.model, fx.ego_start);
    if (!res.policy.has_value()) {
      EXPECT_FALSE(was_feasible) << "feasibility must be monotone in the bound";
      continue;
    }
    if (was_feasible) EXPECT_LE(res.policy->expected_cost, prev_cost + 1e-12);
    prev_cost = res.policy->expected_cost;
    was_feasible = true;
    EXPECT_LE(res.policy->execution_risk, delta + 1e-12);
  }
  EXPECT_TRUE(was_feasible);
}

TEST(Solver, HeuristicsPruneWithoutChangingTheAnswer) {
  // A high-risk corridor action whose subtree should never be expanded
  // under a tight bound.
  CCPOMDPModel m;
  m.agent_trees.push_back(hand_tree({{-1, 1.0, {1, 0}, 0.02},
                                     {0, 1.0, {2, 0}, 0.02},
                                     {1, 1.0, {3, 0}, 0.02},
                                     {2, 1.0, {4, 0}, 0.02},
                                     {3, 1.0, {5, 0}, 0.02}}));
  m.actions.push_back({"through", {{1, 0}, {2, 0}}, 1.0});
  m.actions.push_back({"around", {{0, -4}, {0, -8}}, 2.0});
  m.goal = {30, 31, -1, 1};
  m.d_safe = 1.0;
  m.max_actions = 2;
  m.delta = 0.05;
  const auto with_h = solve(m, {0, 0}, true);
  const auto without_h = solve(m, {0, 0}, false);
  ASSERT_TRUE(with_h.policy.has_value());
  ASSERT_TRUE(without_h.policy.has_value());
  EXPECT_EQ(with_h.policy->root_action(), 1);
  EXPECT_EQ(without_h.policy->root_action(), 1);
  EXPECT_NEAR(with_h.policy->expected_cost, without_h.policy->expected_cost, 1e-12);
  EXPECT_LT(with_h.expansions, without_h.expansions);
}

TEST(Solver, UnconstrainedBoundPicksCheapestPolicy) {
  Fixture fx = random_fixture(11);
  fx.model.delta = 1.0;
  const auto res = solve(fx.model, fx.ego_start);
  const auto oracle = enumerate_oracle(fx.model, fx.ego_start);
  ASSERT_TRUE(res.policy.has_value());
  ASSERT_TRUE(oracle.feasible);
  EXPECT_NEAR(res.policy->expected_cost, oracle.cost, 1e-9);
}

TEST(Solver, GoalStartIsTerminal) {
  CCPOMDPModel m = split_model();
  const auto res = solve(m, {50.5, 0.0});
  ASSERT_TRUE(res.policy.has_value());
  EXPECT_EQ(res.policy->root_action(), -1);
  EXPECT_DOUBLE_EQ(res.policy->expected_cost, 0.0);
  EXPECT_DOUBLE_EQ(res.policy->execution_risk, 0.0);
  EXPECT_EQ(res.expansions, 0);
}

TEST(Solver, ApplicabilityFilterIsRespected) {
  CCPOMDPModel m = split_model();
  m.delta = 1.0;  // the cheap action would win if allowed
  m.applicable = [](int action, Vec2) { return action != 0; };
  const auto res = solve(m, {0, 0});
  ASSERT_TRUE(res.policy.has_value());
  EXPECT_EQ(res.policy->root_action(), 1);
}

TEST(Solver, PolicyTreeIsConsistent) {
  const Fixture fx = random_fixture(17);
  const auto res = solve(fx.model, fx.ego_start);
  if (!res.policy.has_value()) GTEST_SKIP() << "fixture infeasible";
  const Policy& p = *res.policy;
  for (const auto& node : p.nodes) {
    if (node.outcomes.empty()) continue;
    double mass = 0.0;
    for (const auto& e : node.outcomes) {
      mass += e.prob;
      const auto& child = p.nodes[e.child];
      EXPECT_EQ(child.tick, node.tick + fx.model.actions[node.action].ticks());
    }
    EXPECT_NEAR(mass, 1.0, 1e-9);
  }
  const auto j = policy_to_json(p, fx.model);
  EXPECT_TRUE(j.contains("action"));
  EXPECT_TRUE(j.contains("execution_risk"));
}

TEST(Solver, RejectsShortPredictionHorizon) {
  CCPOMDPModel m = split_model();
  m.max_actions = 3;  // needs horizon 3, tree only covers 1
  EXPECT_THROW(solve(m, {0, 0}), std::runtime_error);
}

}  // namespace
}  // namespace riskplan
