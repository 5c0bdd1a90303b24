#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "riskplan/baselines.hpp"
#include "riskplan/belief.hpp"
#include "riskplan/csv.hpp"
#include "riskplan/solver.hpp"
#include "riskplan/world.hpp"

namespace riskplan {

struct TrialConfig {
  PlannerKind planner = PlannerKind::kIntentAware;
  double delta = -1.0;   // risk bound; negative picks the scenario default
  uint64_t seed = 1;
  int trial_index = 0;
  int max_actions = -1;  // decision points per plan; negative picks the scenario default
  bool use_heuristics = true;
  bool keep_log = false;

  double resolved_delta(const Scenario& scn) const {
    return delta < 0.0 ? scn.default_delta : delta;
  }
  int resolved_max_actions(const Scenario& scn) const {
    return max_actions < 0 ? scn.max_actions : max_actions;
  }
};

struct TrialLogRow {
  int tick = 0;
  Vec2 ego{0, 0};
  std::string action;
  struct AgentColumns {
    Vec2 position{0, 0};
    std::string maneuver;
  };
  std::vector<AgentColumns> agents;
  std::string posterior_top;
  double plan_ms = 0.0;
};

struct TrialResult {
  bool collision = false;
  bool reached_goal = false;
  bool timeout = false;
  int ticks = 0;
  double time_to_goal = std::numeric_limits<double>::quiet_NaN();
  int replans = 0;
  int fallbacks = 0;  // replans where no plan met the risk bound
  double plan_ms_total = 0.0;
  double plan_ms_max = 0.0;
  std::vector<double> plan_ms_samples;
  long expansions_total = 0;
  int recognition_correct = 0;
  int recognition_total = 0;
  std::vector<double> displacement_errors;  // prediction vs. truth once the horizon matures
  std::vector<TrialLogRow> log;
};

// Marginal maneuver probabilities of a posterior over (maneuver, clock).
inline std::vector<double> maneuver_marginal(const DiscreteDistribution& dist, int maneuvers) {
  std::vector<double> out(maneuvers, 0.0);
  for (const auto& e : dist.entries)
    if (e.prob > 0.0) out[e.state.maneuver] += e.prob;
  return out;
}

// Assembles the planning model a given planner variant sees at one decision
// point: per-agent prediction trees from that planner's posterior plus the
// scenario's ego actions and constraint parameters.
inline CCPOMDPModel build_model(const Scenario& scn, PlannerKind kind, const BeliefState& belief,
                                double delta, int max_actions) {
  int max_ticks = 0;
  for (const auto& a : scn.ego_actions)
    max_ticks = std::max(max_ticks, static_cast<int>(a.deltas.size()));
  const int depth = std::max(scn.horizon_ticks, max_actions * max_ticks);

  CCPOMDPModel model;
  model.actions = scn.planner_actions();
  model.goal = scn.goal;
  model.d_safe = scn.d_safe;
  model.max_actions = max_actions;
  model.delta = delta;
  model.progress_rate = scn.progress_rate;
  model.applicable = scn.applicability();
  for (size_t i = 0; i < belief.agents.size(); ++i) {
    std::vector<Vec2> others;
    for (size_t j = 0; j < belief.agents.size(); ++j)
      if (j != i) others.push_back(belief.agents[j].position);
    const GuardContext ctx = scn.guard_context(belief.agents[i].position, others);
    model.agent_trees.push_back(predict_hybrid(planner_posterior(kind, scn, belief.agents[i]),
                                               belief.agents[i].position, scn.transitions,
                                               scn.library, ctx, depth, scn.epsilon));
  }
  model.validate();
  return model;
}

// Runs one closed-loop episode: observe, update the belief, re-plan at
// action boundaries (falling back to the designated safe action when no plan
// meets the risk bound), and advance the world until the ego reaches the
// goal, gets too close to an agent, or times out.
inline TrialResult run_trial(const Scenario& scn, const TrialConfig& config) {
  const double delta = config.resolved_delta(scn);
  const int max_actions = config.resolved_max_actions(scn);

  World world(scn, config.seed, config.trial_index);
  BeliefState belief = make_belief(scn.library, world.agent_positions(), scn.window_size);
  TrialResult result;

  struct PendingPrediction {
    int target_tick = 0;
    int agent = 0;
    Vec2 predicted{0, 0};
  };
  std::vector<PendingPrediction> pending;

  int current_action = -1;
  int action_tick = 0;
  Vec2 action_start = world.ego();

  for (int k = 0;; ++k) {
    const std::vector<Vec2> positions = world.agent_positions();
    if (k > 0)
      update_belief(belief, positions, scn.library, scn.transitions, scn.lane_centers_y);

    for (size_t idx = 0; idx < pending.size();) {
      if (pending[idx].target_tick == k) {
        result.displacement_errors.push_back(
            distance(pending[idx].predicted, positions[pending[idx].agent]));
        pending.erase(pending.begin() + idx);
      } else {
        ++idx;
      }
    }

    for (size_t i = 0; i < belief.agents.size(); ++i) {
      if (static_cast<int>(belief.agents[i].window.size()) < scn.window_size) continue;
      const auto marginal = maneuver_marginal(belief.agents[i].posterior, scn.library.size());
      int top = 0;
      for (size_t m = 1; m < marginal.size(); ++m)
        if (marginal[m] > marginal[top]) top = static_cast<int>(m);
      result.recognition_total += 1;
      result.recognition_correct += top == world.agents()[i].maneuver ? 1 : 0;
    }

    if (scn.goal.contains(world.ego())) {
      result.reached_goal = true;
      result.ticks = k;
      result.time_to_goal = k * scn.ts;
      break;
    }
    if (k >= scn.tick_limit) {
      result.timeout = true;
      result.ticks = k;
      break;
    }

    double plan_ms = 0.0;
    if (current_action < 0 ||
        action_tick >= static_cast<int>(scn.ego_actions[current_action].deltas.size())) {
      const auto t0 = std::chrono::steady_clock::now();
      const CCPOMDPModel model = build_model(scn, config.planner, belief, delta, max_actions);
      const SolveResult solved = solve(model, world.ego(), config.use_heuristics);
      plan_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
      result.replans += 1;
      result.plan_ms_total += plan_ms;
      result.plan_ms_max = std::max(result.plan_ms_max, plan_ms);
      result.plan_ms_samples.push_back(plan_ms);
      result.expansions_total += solved.expansions;
      if (solved.policy && solved.policy->root_action() >= 0) {
        current_action = solved.policy->root_action();
      } else {
        current_action = scn.safe_action;
        result.fallbacks += 1;
      }
      action_start = world.ego();
      action_tick = 0;
      // Forecast quality is a property of the recognizer, not of the
      // planner's belief policy, so predictions always use the true
      // posterior. The intent-aware planner's trees already embed it.
      for (size_t i = 0; i < belief.agents.size(); ++i) {
        Vec2 predicted{0, 0};
        if (config.planner == PlannerKind::kIntentAware) {
          predicted = predicted_mean_at(model.agent_trees[i], scn.horizon_ticks);
        } else {
          std::vector<Vec2> others;
          for (size_t j = 0; j < belief.agents.size(); ++j)
            if (j != i) others.push_back(belief.agents[j].position);
          const GuardContext ctx = scn.guard_context(belief.agents[i].position, others);
          const PredictionTree tree =
              predict_hybrid(belief.agents[i].posterior, belief.agents[i].position,
                             scn.transitions, scn.library, ctx, scn.horizon_ticks, scn.epsilon);
          predicted = predicted_mean_at(tree, scn.horizon_ticks);
        }
        pending.push_back({k + scn.horizon_ticks, static_cast<int>(i), predicted});
      }
    }

    if (config.keep_log) {
      TrialLogRow row;
      row.tick = k;
      row.ego = world.ego();
      row.action = scn.ego_actions[current_action].name;
      for (size_t i = 0; i < positions.size(); ++i)
        row.agents.push_back(
            {positions[i], scn.library.at(world.agents()[i].maneuver).label});
      for (size_t i = 0; i < belief.agents.size(); ++i) {
        const auto marginal = maneuver_marginal(belief.agents[i].posterior, scn.library.size());
        int top = 0;
        for (size_t m = 1; m < marginal.size(); ++m)
          if (marginal[m] > marginal[top]) top = static_cast<int>(m);
        row.posterior_top += (i ? ";" : "") + scn.library.at(top).label + ":" +
                             format_double(marginal[top]);
      }
      row.plan_ms = plan_ms;
      result.log.push_back(std::move(row));
    }

    ++action_tick;
    world.move_ego(action_start + scn.ego_actions[current_action].deltas[action_tick - 1]);
    world.step_agents();
    if (world.near_collision()) {
      result.collision = true;
      result.ticks = k + 1;
      break;
    }
  }
  return result;
}

inline void write_trial_log(std::ostream& out, const Scenario& scn,
                            const std::vector<TrialLogRow>& rows) {
  out << "k,ego_x,ego_y,action";
  for (size_t i = 0; i < scn.agents.size(); ++i)
    out << ",agent" << i << "_x,agent" << i << "_y,agent" << i << "_maneuver";
  out << ",posterior_top,plan_ms\n";
  for (const auto& row : rows) {
    out << row.tick << "," << format_double(row.ego.x) << "," << format_double(row.ego.y) << ","
        << row.action;
    for (const auto& a : row.agents)
      out << "," << format_double(a.position.x) << "," << format_double(a.position.y) << ","
          << a.maneuver;
    out << "," << row.posterior_top << "," << format_double(row.plan_ms) << "\n";
  }
}

}  // namespace riskplan
