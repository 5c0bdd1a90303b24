#include "riskplan/trial.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "riskplan/scenario.hpp"
#include "riskplan/world.hpp"

namespace riskplan {
namespace {

Scenario tweaked_left_turn(int forced_maneuver, Vec2 spawn, Vec2 jitter) {
  Scenario s = left_turn_scenario();
  s.agents[0].initial_maneuvers = {{forced_maneuver, 1.0}};
  s.agents[0].spawn = spawn;
  s.agents[0].spawn_jitter = jitter;
  s.validate();
  return s;
}

TEST(ScenarioTest, BuiltInScenariosValidate) {
  const Scenario left = left_turn_scenario();
  EXPECT_EQ(left.name, "left_turn");
  EXPECT_EQ(left.library.size(), 2);
  EXPECT_EQ(left.agents.size(), 1u);
  const Scenario lane = lane_change_scenario();
  EXPECT_EQ(lane.name, "lane_change");
  EXPECT_EQ(lane.library.size(), 3);
  EXPECT_EQ(lane.agents.size(), 3u);
  EXPECT_EQ(lane.ego_actions.size(), 4u);
}

TEST(ScenarioTest, RoundTripsThroughJsonWithLibraryReattached) {
  const Scenario s = left_turn_scenario();
  Scenario back = Scenario::from_json(nlohmann::json::parse(s.to_json().dump()));
  back.attach_library(s.library);
  back.validate();
  EXPECT_EQ(back.name, s.name);
  EXPECT_EQ(back.max_actions, s.max_actions);
  EXPECT_DOUBLE_EQ(back.default_delta, s.default_delta);
  ASSERT_EQ(back.ego_actions.size(), s.ego_actions.size());
  for (size_t a = 0; a < s.ego_actions.size(); ++a) {
    EXPECT_EQ(back.ego_actions[a].name, s.ego_actions[a].name);
    ASSERT_EQ(back.ego_actions[a].deltas.size(), s.ego_actions[a].deltas.size());
    for (size_t k = 0; k < s.ego_actions[a].deltas.size(); ++k) {
      EXPECT_DOUBLE_EQ(back.ego_actions[a].deltas[k].x, s.ego_actions[a].deltas[k].x);
      EXPECT_DOUBLE_EQ(back.ego_actions[a].deltas[k].y, s.ego_actions[a].deltas[k].y);
    }
  }
  ASSERT_EQ(back.transitions.per_maneuver.size(), s.transitions.per_maneuver.size());
  EXPECT_EQ(back.transitions.per_maneuver[0].rules[0].guard.kind, Guard::Kind::kInRegion);

  Scenario wrong_order = Scenario::from_json(s.to_json());
  PftLibrary reversed;
  reversed.add(s.library.at(1));
  reversed.add(s.library.at(0));
  EXPECT_THROW(wrong_order.attach_library(reversed), std::runtime_error);
}

TEST(ScenarioTest, ScenarioFileSaveLoadMatches) {
  const Scenario s = lane_change_scenario();
  const std::string path = ::testing::TempDir() + "riskplan_scenario.json";
  save_scenario(s, path);
  Scenario back = load_scenario_file(path);
  back.attach_library(s.library);
  back.validate();
  EXPECT_EQ(back.name, s.name);
  EXPECT_EQ(back.ego_actions[2].required_lane, 0);
  EXPECT_EQ(back.ego_actions[3].required_lane, 1);
  std::remove(path.c_str());
}

TEST(ScenarioTest, LeftTurnGeometryCrossesOncomingLaneIntoGoal) {
  const Scenario s = left_turn_scenario();
  const auto& turn = s.ego_actions[s.action_index("turn_left")];
  const Vec2 end = s.ego_start + turn.deltas.back();
  EXPECT_TRUE(s.goal.contains(end));
  EXPECT_FALSE(s.goal.contains(s.ego_start));
  // The turn sweeps across the oncoming lane at x = -1.875.
  EXPECT_GT(s.ego_start.x, -1.875);
  EXPECT_LT(end.x, -1.875);
  const auto& stop = s.ego_actions[s.action_index("stop")];
  for (const auto& d : stop.deltas) EXPECT_DOUBLE_EQ(d.norm(), 0.0);
}

TEST(ScenarioTest, LaneChangeActionsLandOnLaneCenters) {
  const Scenario s = lane_change_scenario();
  const Vec2 left_end = s.ego_start + s.ego_actions[s.action_index("change_left")].deltas.back();
  EXPECT_NEAR(left_end.y, 1.875, 1e-12);
  const Vec2 fwd_end = s.ego_start + s.ego_actions[s.action_index("forward")].deltas.back();
  EXPECT_NEAR(fwd_end.y, s.ego_start.y, 1e-12);
  const auto applicable = s.applicability();
  ASSERT_TRUE(static_cast<bool>(applicable));
  EXPECT_TRUE(applicable(s.action_index("change_left"), s.ego_start));
  EXPECT_FALSE(applicable(s.action_index("change_right"), s.ego_start));
  EXPECT_TRUE(applicable(s.action_index("change_right"), {0.0, 1.875}));
  EXPECT_TRUE(applicable(s.action_index("forward"), s.ego_start));
}

TEST(WorldTest, ActivationStartsAtAnchorWithDampedTubeSpread) {
  const Scenario s = left_turn_scenario();
  const auto& pft = s.library.by_label("forward");
  const Vec2 anchor{3.0, -2.0};
  const int len = pft.length();
  const int n = 4000;
  Rng rng(7);
  std::vector<Vec2> sum(len, {0, 0});
  std::vector<Vec2> sum_sq(len, {0, 0});
  for (int i = 0; i < n; ++i) {
    const auto pts = sample_activation(pft, anchor, World::kNoiseCorrelation, rng);
    ASSERT_EQ(static_cast<int>(pts.size()), len);
    EXPECT_DOUBLE_EQ(pts[0].x, anchor.x);
    EXPECT_DOUBLE_EQ(pts[0].y, anchor.y);
    for (int c = 0; c < len; ++c) {
      sum[c] += pts[c];
      sum_sq[c] += {pts[c].x * pts[c].x, pts[c].y * pts[c].y};
    }
  }
  // AR(1) noise started at zero has marginal variance damped by
  // 1 - rho^(2 (clock - 1)) relative to the tube covariance.
  for (const int clock : {1, 2, 6, len}) {
    const int c = clock - 1;
    const Vec2 mean = sum[c] * (1.0 / n);
    const Vec2 expected = anchor + (pft.mean_at(clock) - pft.mean_at(1));
    const Mat2 cov = pft.cov_at(clock);
    const double damp = 1.0 - std::pow(World::kNoiseCorrelation, 2.0 * (clock - 1));
    const double vx = damp * cov.a;
    const double vy = damp * cov.d;
    EXPECT_NEAR(mean.x, expected.x, 5.0 * std::sqrt(vx / n) + 1e-12);
    EXPECT_NEAR(mean.y, expected.y, 5.0 * std::sqrt(vy / n) + 1e-12);
    const double sample_vx = sum_sq[c].x / n - mean.x * mean.x;
    const double sample_vy = sum_sq[c].y / n - mean.y * mean.y;
    EXPECT_NEAR(sample_vx, vx, 0.12 * vx + 1e-9);
    EXPECT_NEAR(sample_vy, vy, 0.12 * vy + 1e-9);
  }
}

TEST(WorldTest, AgentDwellsOneTickAtManeuverCompletionThenContinues) {
  const Scenario s = tweaked_left_turn(1, {-1.875, 11.5}, {0, 0});
  World world(s, 99, 0);
  const int len = s.library.by_label("slow_down").length();
  std::vector<Vec2> track{world.agent_positions()[0]};
  for (int k = 1; k <= len + 10; ++k) {
    world.step_agents();
    track.push_back(world.agent_positions()[0]);
    if (k <= len - 1) EXPECT_EQ(world.agents()[0].maneuver, 1) << "tick " << k;
  }
  // Clock runs 1..len over len-1 ticks; the switch tick re-anchors the
  // successor at the current position, so that tick does not move.
  EXPECT_EQ(track[len].x, track[len - 1].x);
  EXPECT_EQ(track[len].y, track[len - 1].y);
  EXPECT_EQ(world.agents()[0].maneuver, 0);
  // Total deceleration displacement is ~4.8 m south, within the tube spread.
  EXPECT_NEAR(track[len - 1].y - track[0].y, -4.8, 0.8);
  EXPECT_NEAR(track[len - 1].x - track[0].x, 0.0, 0.5);
  // After resuming the forward maneuver the agent moves south again.
  EXPECT_LT(track[len + 10].y, track[len].y - 2.0);
  for (size_t k = 1; k < track.size(); ++k)
    EXPECT_LE(distance(track[k], track[k - 1]), 6.0 * s.ts + 0.6);
}

TEST(WorldTest, GuardedSwitchOnlyFiresInsideApproachRegion) {
  // Completing the forward maneuver below the junction leaves the always
  // rule, which never yields; completing inside the approach region mixes in
  // the slow-down successor.
  const Scenario below = tweaked_left_turn(0, {-1.875, 1.0}, {0, 0});
  for (int trial = 0; trial < 40; ++trial) {
    World world(below, 5, trial);
    for (int k = 0; k < 26; ++k) world.step_agents();
    EXPECT_EQ(world.agents()[0].maneuver, 0);
  }
  const Scenario inside = tweaked_left_turn(0, {-1.875, 25.0}, {0, 0});
  int switched = 0;
  for (int trial = 0; trial < 200; ++trial) {
    World world(inside, 5, trial);
    for (int k = 0; k < 26; ++k) world.step_agents();
    switched += world.agents()[0].maneuver == 1 ? 1 : 0;
  }
  EXPECT_GE(switched, 1);
  EXPECT_LE(switched, 40);
}

TEST(WorldTest, SpawnJitterStaysInBoundsAndManeuverDrawMixes) {
  const Scenario s = left_turn_scenario();
  int forward = 0;
  for (int trial = 0; trial < 200; ++trial) {
    World world(s, 11, trial);
    const Vec2 pos = world.agent_positions()[0];
    EXPECT_DOUBLE_EQ(pos.x, -1.875);
    EXPECT_GE(pos.y, 10.0);
    EXPECT_LE(pos.y, 13.0);
    forward += world.agents()[0].maneuver == 0 ? 1 : 0;
  }
  EXPECT_GE(forward, 60);
  EXPECT_LE(forward, 140);
}

TEST(WorldTest, NearCollisionUsesSafetyDistance) {
  const Scenario s = tweaked_left_turn(0, {-1.875, 11.5}, {0, 0});
  World world(s, 3, 0);
  const Vec2 agent = world.agent_positions()[0];
  world.move_ego(agent + Vec2{s.d_safe - 0.01, 0.0});
  EXPECT_TRUE(world.near_collision());
  world.move_ego(agent + Vec2{s.d_safe + 0.01, 0.0});
  EXPECT_FALSE(world.near_collision());
}

TEST(WorldTest, SameSeedSameTrialReplaysIdentically) {
  const Scenario s = left_turn_scenario();
  World a(s, 21, 4);
  World b(s, 21, 4);
  World other(s, 21, 5);
  bool any_difference = false;
  for (int k = 0; k < 50; ++k) {
    a.step_agents();
    b.step_agents();
    other.step_agents();
    EXPECT_EQ(a.agent_positions()[0].x, b.agent_positions()[0].x);
    EXPECT_EQ(a.agent_positions()[0].y, b.agent_positions()[0].y);
    any_difference = any_difference ||
                     a.agent_positions()[0].y != other.agent_positions()[0].y;
  }
  EXPECT_TRUE(any_difference);
}

TEST(BaselineTest, QuadraticFitRecoversAccelerationExactly) {
  // x(t) = 2 t - 0.9 t^2 has acceleration -1.8 along the direction of travel.
  std::vector<Vec2> window;
  for (int k = 0; k < 5; ++k) {
    const double t = 0.1 * k;
    window.push_back({2.0 * t - 0.9 * t * t, 0.0});
  }
  double speed = 0.0;
  const double along = detail::fitted_acceleration(window, 0.1, &speed);
  EXPECT_NEAR(along, -1.8, 1e-9);
  EXPECT_NEAR(speed, 2.0 - 1.8 * 0.4, 1e-9);

  // Two points cannot support a quadratic fit.
  EXPECT_DOUBLE_EQ(detail::fitted_acceleration({{0, 0}, {1, 0}}, 0.1, nullptr), 0.0);
}

TEST(BaselineTest, AccelThresholdSplitsYieldingFromKeepingSpeed) {
  const Scenario s = left_turn_scenario();
  const DiscreteDistribution posterior = DiscreteDistribution::uniform(s.library);
  std::vector<Vec2> braking, cruising, stopped;
  for (int k = 0; k < 5; ++k) {
    const double t = 0.1 * k;
    braking.push_back({0.0, -(6.0 * t - 1.0 * t * t)});
    cruising.push_back({0.0, -6.0 * t});
    stopped.push_back({0.0, 3.0});
  }
  const int slow = s.library.index_of("slow_down");
  const int fwd = s.library.index_of("forward");
  auto mass_on = [&](const DiscreteDistribution& d, int m) {
    double total = 0.0;
    for (const auto& e : d.entries)
      if (e.state.maneuver == m) total += e.prob;
    return total;
  };
  EXPECT_NEAR(mass_on(accel_threshold_posterior(s, posterior, braking), slow), 1.0, 1e-12);
  EXPECT_NEAR(mass_on(accel_threshold_posterior(s, posterior, cruising), fwd), 1.0, 1e-12);
  EXPECT_NEAR(mass_on(accel_threshold_posterior(s, posterior, stopped), slow), 1.0, 1e-12);
}

TEST(BaselineTest, ConditionOnManeuverKeepsClockProfile) {
  DiscreteDistribution dist;
  dist.entries = {{{0, 1}, 0.2}, {{0, 5}, 0.2}, {{1, 3}, 0.6}};
  const DiscreteDistribution kept = condition_on_maneuver(dist, 0);
  ASSERT_EQ(kept.entries.size(), 2u);
  EXPECT_DOUBLE_EQ(kept.entries[0].prob, 0.5);
  EXPECT_DOUBLE_EQ(kept.entries[1].prob, 0.5);
  EXPECT_EQ(kept.entries[1].state.clock, 5);

  DiscreteDistribution no_mass;
  no_mass.entries = {{{1, 3}, 1.0}};
  const DiscreteDistribution fallback = condition_on_maneuver(no_mass, 0);
  ASSERT_EQ(fallback.entries.size(), 1u);
  EXPECT_EQ(fallback.entries[0].state.maneuver, 0);
  EXPECT_EQ(fallback.entries[0].state.clock, 1);
  EXPECT_DOUBLE_EQ(fallback.entries[0].prob, 1.0);
}

TEST(TrialTest, EmptyRoadTurnsImmediatelyWithExactTiming) {
  // With the agent spawned far away every action is risk free, so the
  // planner turns at the first decision point and finishes in one action.
  const Scenario s = tweaked_left_turn(0, {-1.875, 300.0}, {0, 0});
  TrialConfig config;
  config.seed = 5;
  const TrialResult result = run_trial(s, config);
  EXPECT_TRUE(result.reached_goal);
  EXPECT_FALSE(result.collision);
  const auto& turn = s.ego_actions[s.action_index("turn_left")].deltas;
  int entry_tick = -1;
  for (size_t k = 0; k < turn.size() && entry_tick < 0; ++k)
    if (s.goal.contains(s.ego_start + turn[k])) entry_tick = static_cast<int>(k) + 1;
  ASSERT_GT(entry_tick, 0);
  EXPECT_EQ(result.ticks, entry_tick);
  EXPECT_DOUBLE_EQ(result.time_to_goal, entry_tick * s.ts);
  EXPECT_EQ(result.replans, 1);
  EXPECT_EQ(result.fallbacks, 0);
}

TEST(TrialTest, RiskAwarePlannerYieldsToOncomingTraffic) {
  const Scenario s = left_turn_scenario();
  int collisions = 0;
  int reached = 0;
  for (int trial = 0; trial < 10; ++trial) {
    TrialConfig config;
    config.seed = 31;
    config.trial_index = trial;
    const TrialResult result = run_trial(s, config);
    collisions += result.collision ? 1 : 0;
    reached += result.reached_goal ? 1 : 0;
  }
  EXPECT_LE(collisions, 1);
  EXPECT_GE(reached, 8);
}

TEST(TrialTest, FallsBackToSafeActionWhenNothingMeetsBound) {
  // An agent bearing straight down on the stop line makes every action
  // risky; with a zero risk bound the planner must fall back.
  Scenario s = tweaked_left_turn(0, {1.875, 8.0}, {0, 0});
  s.default_delta = 0.0;
  const TrialResult result = run_trial(s, {});
  EXPECT_GE(result.fallbacks, 1);
  EXPECT_LE(result.fallbacks, result.replans);
  EXPECT_TRUE(result.collision);
}

TEST(TrialTest, RecognizesForcedYieldAndLogsConsistently) {
  const Scenario s = tweaked_left_turn(1, {-1.875, 11.5}, {0, 1.5});
  TrialConfig config;
  config.seed = 17;
  config.keep_log = true;
  const TrialResult result = run_trial(s, config);
  EXPECT_TRUE(result.reached_goal);
  ASSERT_GT(result.recognition_total, 0);
  EXPECT_GE(static_cast<double>(result.recognition_correct) / result.recognition_total, 0.8);
  ASSERT_EQ(static_cast<int>(result.log.size()), result.ticks);

  std::ostringstream csv;
  write_trial_log(csv, s, result.log);
  std::istringstream lines(csv.str());
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line, "k,ego_x,ego_y,action,agent0_x,agent0_y,agent0_maneuver,posterior_top,plan_ms");
  int rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8) << line;
    ++rows;
  }
  EXPECT_EQ(rows, result.ticks);
}

TEST(TrialTest, MaturedPredictionsScoreDisplacementAgainstTruth) {
  // A conservative planner keeps waiting, so the trial lives long enough for
  // the first predictions to mature at the full horizon.
  const Scenario s = tweaked_left_turn(1, {-1.875, 11.5}, {0, 0});
  TrialConfig config;
  config.planner = PlannerKind::kConservative;
  config.seed = 23;
  const TrialResult result = run_trial(s, config);
  ASSERT_GE(result.displacement_errors.size(), 2u);
  // The first forecast is made before the observation window fills, so it
  // blends both maneuver hypotheses and lands far from the yielding truth.
  EXPECT_GT(result.displacement_errors.front(), 3.0);
  for (size_t i = 1; i < result.displacement_errors.size(); ++i)
    EXPECT_LT(result.displacement_errors[i], 1.0) << "forecast " << i;
}

TEST(TrialTest, RepeatTrialsAreDeterministic) {
  const Scenario s = left_turn_scenario();
  TrialConfig config;
  config.seed = 41;
  config.trial_index = 2;
  config.keep_log = true;
  const TrialResult a = run_trial(s, config);
  const TrialResult b = run_trial(s, config);
  EXPECT_EQ(a.collision, b.collision);
  EXPECT_EQ(a.reached_goal, b.reached_goal);
  EXPECT_EQ(a.ticks, b.ticks);
  EXPECT_EQ(a.replans, b.replans);
  EXPECT_EQ(a.fallbacks, b.fallbacks);
  EXPECT_EQ(a.expansions_total, b.expansions_total);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (size_t k = 0; k < a.log.size(); ++k) {
    EXPECT_EQ(a.log[k].ego.x, b.log[k].ego.x);
    EXPECT_EQ(a.log[k].action, b.log[k].action);
    EXPECT_EQ(a.log[k].agents[0].position.y, b.log[k].agents[0].position.y);
    EXPECT_EQ(a.log[k].posterior_top, b.log[k].posterior_top);
  }
}

}  // namespace
}  // namespace riskplan
