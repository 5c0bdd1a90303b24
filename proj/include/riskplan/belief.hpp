#pragma once

#include <vector>

#include <json.hpp>

#include "riskplan/intent.hpp"

namespace riskplan {

struct AgentBelief {
  std::vector<Vec2> window;  // recent observed positions, oldest first
  DiscreteDistribution posterior;
  Vec2 position{0, 0};  // latest observation
  bool underflow = false;
};

struct BeliefState {
  int window_size = 5;
  std::vector<AgentBelief> agents;
};

inline BeliefState make_belief(const PftLibrary& lib, const std::vector<Vec2>& first_obs,
                               int window_size) {
  require(window_size >= 1, "make_belief: window size must be positive");
  BeliefState belief;
  belief.window_size = window_size;
  for (const Vec2 obs : first_obs) {
    AgentBelief agent;
    agent.window = {obs};
    agent.position = obs;
    agent.posterior = DiscreteDistribution::uniform(lib);
    belief.agents.push_back(std::move(agent));
  }
  return belief;
}

// One filtering step: advance each agent's posterior one tick through the
// maneuver transition model (guards evaluated at the previous positions),
// append the new observation, and condition on the observation window.
inline void update_belief(BeliefState& belief, const std::vector<Vec2>& obs,
                          const PftLibrary& lib, const DiscreteTransitionModel& td,
                          const std::vector<double>& lane_centers_y) {
  require(obs.size() == belief.agents.size(),
          "update_belief: observation count does not match agent count");
  std::vector<Vec2> previous;
  for (const auto& agent : belief.agents) previous.push_back(agent.position);
  for (size_t i = 0; i < belief.agents.size(); ++i) {
    AgentBelief& agent = belief.agents[i];
    GuardContext ctx;
    ctx.self = previous[i];
    ctx.lane_centers_y = lane_centers_y;
    for (size_t j = 0; j < previous.size(); ++j)
      if (j != i) ctx.others.push_back(previous[j]);
    const auto prior = predict_discrete_step(agent.posterior, td, lib, ctx);
    agent.window.push_back(obs[i]);
    if (static_cast<int>(agent.window.size()) > belief.window_size)
      agent.window.erase(agent.window.begin());
    const auto res = estimate_discrete(agent.window, lib, prior);
    agent.posterior = res.posterior;
    agent.underflow = res.underflow;
    agent.position = obs[i];
  }
}

inline nlohmann::ordered_json belief_snapshot(const BeliefState& belief, const PftLibrary& lib) {
  nlohmann::ordered_json out;
  out["agents"] = nlohmann::ordered_json::array();
  for (const auto& agent : belief.agents) {
    nlohmann::ordered_json a;
    a["position"] = {agent.position.x, agent.position.y};
    a["underflow"] = agent.underflow;
    a["posterior"] = nlohmann::ordered_json::array();
    for (const auto& e : agent.posterior.entries) {
      if (e.prob <= 0.0) continue;
      a["posterior"].push_back({{"maneuver", lib.at(e.state.maneuver).label},
                                {"clock", e.state.clock},
                                {"prob", e.prob}});
    }
    out["agents"].push_back(std::move(a));
  }
  return out;
}

}  // namespace riskplan
