#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "riskplan/ccpomdp.hpp"
#include "riskplan/demos.hpp"
#include "riskplan/flow_tube.hpp"
#include "riskplan/geometry.hpp"
#include "riskplan/maneuver.hpp"
#include "riskplan/transition_model.hpp"

namespace riskplan {

struct EgoActionSpec {
  std::string name;
  std::vector<Vec2> deltas;
  double cost = 0.0;
  int required_lane = -1;  // -1 allows the action from any lane
};

struct AgentSpec {
  Vec2 spawn{0, 0};
  Vec2 spawn_jitter{0, 0};  // uniform +- range per axis
  std::vector<std::pair<int, double>> initial_maneuvers;  // maneuver index -> probability
};

// A complete simulation setup: road geometry, the ego's motion primitives,
// the agents to spawn, their learned maneuver library, and the guarded
// maneuver-switching tables. The library travels in its own file; a scenario
// loaded from JSON must have one attached before use.
struct Scenario {
  std::string name;
  double ts = 0.1;
  int window_size = 5;
  double d_safe = 2.5;
  double epsilon = 1e-4;    // per-depth pruning threshold for predicted branches
  int max_actions = 2;      // decision points per plan
  int horizon_ticks = 48;   // prediction depth per plan
  double default_delta = 0.05;
  int tick_limit = 600;
  Rect goal;
  double progress_rate = 0.0;
  Vec2 ego_start{0, 0};
  std::vector<double> lane_centers_y;
  double lane_width = 3.75;
  std::vector<EgoActionSpec> ego_actions;
  int safe_action = 0;      // fallback when no plan satisfies the risk bound
  std::vector<AgentSpec> agents;
  DiscreteTransitionModel transitions;
  int risky_assumption = 0; // maneuver an optimist assumes every agent follows
  PftLibrary library;

  int action_index(const std::string& action_name) const {
    for (size_t i = 0; i < ego_actions.size(); ++i)
      if (ego_actions[i].name == action_name) return static_cast<int>(i);
    throw std::runtime_error("scenario: unknown ego action '" + action_name + "'");
  }

  int nearest_lane(double y) const {
    require(!lane_centers_y.empty(), "scenario: no lane geometry");
    int best = 0;
    for (size_t i = 1; i < lane_centers_y.size(); ++i)
      if (std::abs(y - lane_centers_y[i]) < std::abs(y - lane_centers_y[best]))
        best = static_cast<int>(i);
    return best;
  }

  // Applicability filter over ego actions for the planner; null when every
  // action is lane-independent.
  std::function<bool(int, Vec2)> applicability() const {
    bool any = false;
    for (const auto& a : ego_actions) any = any || a.required_lane >= 0;
    if (!any) return nullptr;
    std::vector<int> required;
    for (const auto& a : ego_actions) required.push_back(a.required_lane);
    const std::vector<double> lanes = lane_centers_y;
    return [required, lanes](int idx, Vec2 ego) {
      const int req = required[idx];
      if (req < 0) return true;
      int best = 0;
      for (size_t i = 1; i < lanes.size(); ++i)
        if (std::abs(ego.y - lanes[i]) < std::abs(ego.y - lanes[best])) best = static_cast<int>(i);
      return best == req;
    };
  }

  std::vector<EgoAction> planner_actions() const {
    std::vector<EgoAction> out;
    for (const auto& a : ego_actions) out.push_back({a.name, a.deltas, a.cost});
    return out;
  }

  GuardContext guard_context(Vec2 self, const std::vector<Vec2>& others) const {
    return {self, others, lane_centers_y, lane_width};
  }

  void validate() const {
    require(!name.empty(), "scenario: missing name");
    require(ts > 0.0, "scenario: sample period must be positive");
    require(window_size >= 1, "scenario: window size must be at least one");
    require(d_safe > 0.0, "scenario: safety distance must be positive");
    require(epsilon >= 0.0 && epsilon < 1.0, "scenario: bad pruning threshold");
    require(max_actions >= 1, "scenario: horizon must be at least one action");
    require(default_delta >= 0.0 && default_delta <= 1.0, "scenario: risk bound outside [0, 1]");
    require(tick_limit >= 1, "scenario: tick limit must be positive");
    require(!ego_actions.empty(), "scenario: no ego actions");
    require(safe_action >= 0 && safe_action < static_cast<int>(ego_actions.size()),
            "scenario: fallback action index out of range");
    require(!lane_centers_y.empty(), "scenario: no lane geometry");
    int max_ticks = 0;
    for (const auto& a : ego_actions) {
      require(!a.name.empty(), "scenario: unnamed ego action");
      require(!a.deltas.empty(), "scenario: ego action with no ticks: " + a.name);
      require(a.cost >= 0.0, "scenario: negative cost for " + a.name);
      require(a.required_lane < static_cast<int>(lane_centers_y.size()),
              "scenario: required lane out of range for " + a.name);
      max_ticks = std::max(max_ticks, static_cast<int>(a.deltas.size()));
    }
    require(horizon_ticks >= max_actions * max_ticks,
            "scenario: prediction horizon shorter than the longest plan");
    require(library.size() >= 1, "scenario: no maneuver library attached");
    require(std::abs(library.ts - ts) <= 1e-9, "scenario: library sample period mismatch");
    transitions.validate(library);
    require(risky_assumption >= 0 && risky_assumption < library.size(),
            "scenario: risky assumption index out of range");
    require(!agents.empty(), "scenario: no agents");
    for (const auto& agent : agents) {
      require(agent.spawn_jitter.x >= 0.0 && agent.spawn_jitter.y >= 0.0,
              "scenario: negative spawn jitter");
      require(!agent.initial_maneuvers.empty(), "scenario: agent without initial maneuvers");
      double sum = 0.0;
      for (const auto& [m, p] : agent.initial_maneuvers) {
        require(m >= 0 && m < library.size(), "scenario: bad initial maneuver index");
        require(p >= 0.0, "scenario: negative initial maneuver probability");
        sum += p;
      }
      require(std::abs(sum - 1.0) <= 1e-9, "scenario: initial maneuver probabilities must sum to 1");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["ts"] = ts;
    j["window_size"] = window_size;
    j["d_safe"] = d_safe;
    j["epsilon"] = epsilon;
    j["max_actions"] = max_actions;
    j["horizon_ticks"] = horizon_ticks;
    j["default_delta"] = default_delta;
    j["tick_limit"] = tick_limit;
    j["goal"] = {{"x0", goal.x0}, {"x1", goal.x1}, {"y0", goal.y0}, {"y1", goal.y1}};
    j["progress_rate"] = progress_rate;
    j["ego_start"] = {ego_start.x, ego_start.y};
    j["lane_centers_y"] = lane_centers_y;
    j["lane_width"] = lane_width;
    j["safe_action"] = safe_action;
    j["risky_assumption"] = risky_assumption;
    j["ego_actions"] = nlohmann::ordered_json::array();
    for (const auto& a : ego_actions) {
      nlohmann::ordered_json ja;
      ja["name"] = a.name;
      ja["cost"] = a.cost;
      ja["required_lane"] = a.required_lane;
      ja["deltas"] = nlohmann::ordered_json::array();
      for (const auto& d : a.deltas) ja["deltas"].push_back({d.x, d.y});
      j["ego_actions"].push_back(std::move(ja));
    }
    j["agents"] = nlohmann::ordered_json::array();
    for (const auto& agent : agents) {
      nlohmann::ordered_json ja;
      ja["spawn"] = {agent.spawn.x, agent.spawn.y};
      ja["spawn_jitter"] = {agent.spawn_jitter.x, agent.spawn_jitter.y};
      ja["initial_maneuvers"] = nlohmann::ordered_json::array();
      for (const auto& [m, p] : agent.initial_maneuvers)
        ja["initial_maneuvers"].push_back({nlohmann::ordered_json(m), nlohmann::ordered_json(p)});
      j["agents"].push_back(std::move(ja));
    }
    j["maneuver_labels"] = nlohmann::ordered_json::array();
    for (int m = 0; m < library.size(); ++m) j["maneuver_labels"].push_back(library.at(m).label);
    j["transitions"] = nlohmann::ordered_json::array();
    for (const auto& mt : transitions.per_maneuver) {
      nlohmann::ordered_json jt;
      jt["recurrent"] = mt.recurrent;
      jt["rules"] = nlohmann::ordered_json::array();
      for (const auto& rule : mt.rules) {
        nlohmann::ordered_json jr;
        jr["guard"] = rule.guard.to_json();
        jr["successors"] = nlohmann::ordered_json::array();
        for (const auto& [m, p] : rule.successors)
          jr["successors"].push_back({nlohmann::ordered_json(m), nlohmann::ordered_json(p)});
        jt["rules"].push_back(std::move(jr));
      }
      j["transitions"].push_back(std::move(jt));
    }
    return j;
  }

  // Parses everything except the maneuver library, which lives in its own
  // file; attach_library() completes the scenario.
  static Scenario from_json(const nlohmann::json& j) {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.ts = j.at("ts").get<double>();
    s.window_size = j.at("window_size").get<int>();
    s.d_safe = j.at("d_safe").get<double>();
    s.epsilon = j.at("epsilon").get<double>();
    s.max_actions = j.at("max_actions").get<int>();
    s.horizon_ticks = j.at("horizon_ticks").get<int>();
    s.default_delta = j.at("default_delta").get<double>();
    s.tick_limit = j.at("tick_limit").get<int>();
    const auto& jg = j.at("goal");
    s.goal = {jg.at("x0").get<double>(), jg.at("x1").get<double>(), jg.at("y0").get<double>(),
              jg.at("y1").get<double>()};
    s.progress_rate = j.at("progress_rate").get<double>();
    s.ego_start = {j.at("ego_start")[0].get<double>(), j.at("ego_start")[1].get<double>()};
    s.lane_centers_y = j.at("lane_centers_y").get<std::vector<double>>();
    s.lane_width = j.at("lane_width").get<double>();
    s.safe_action = j.at("safe_action").get<int>();
    s.risky_assumption = j.at("risky_assumption").get<int>();
    for (const auto& ja : j.at("ego_actions")) {
      EgoActionSpec a;
      a.name = ja.at("name").get<std::string>();
      a.cost = ja.at("cost").get<double>();
      a.required_lane = ja.at("required_lane").get<int>();
      for (const auto& jd : ja.at("deltas")) a.deltas.push_back({jd[0].get<double>(), jd[1].get<double>()});
      s.ego_actions.push_back(std::move(a));
    }
    for (const auto& ja : j.at("agents")) {
      AgentSpec agent;
      agent.spawn = {ja.at("spawn")[0].get<double>(), ja.at("spawn")[1].get<double>()};
      agent.spawn_jitter = {ja.at("spawn_jitter")[0].get<double>(),
                            ja.at("spawn_jitter")[1].get<double>()};
      for (const auto& jm : ja.at("initial_maneuvers"))
        agent.initial_maneuvers.emplace_back(jm[0].get<int>(), jm[1].get<double>());
      s.agents.push_back(std::move(agent));
    }
    for (const auto& jt : j.at("transitions")) {
      ManeuverTransitions mt;
      mt.recurrent = jt.at("recurrent").get<bool>();
      for (const auto& jr : jt.at("rules")) {
        TransitionRule rule;
        rule.guard = Guard::from_json(jr.at("guard"));
        for (const auto& js : jr.at("successors"))
          rule.successors.emplace_back(js[0].get<int>(), js[1].get<double>());
        mt.rules.push_back(std::move(rule));
      }
      s.transitions.per_maneuver.push_back(std::move(mt));
    }
    if (j.contains("maneuver_labels"))
      s.expected_labels_ = j.at("maneuver_labels").get<std::vector<std::string>>();
    return s;
  }

  void attach_library(PftLibrary lib) {
    if (!expected_labels_.empty()) {
      require(static_cast<int>(expected_labels_.size()) == lib.size(),
              "scenario: library maneuver count mismatch");
      for (size_t m = 0; m < expected_labels_.size(); ++m)
        require(lib.at(static_cast<int>(m)).label == expected_labels_[m],
                "scenario: library maneuver order mismatch at index " + std::to_string(m));
    }
    library = std::move(lib);
  }

 private:
  std::vector<std::string> expected_labels_;
};

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "save_scenario: cannot open " + path);
  out << s.to_json().dump(2) << "\n";
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_scenario: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return Scenario::from_json(j);
}

namespace detail {

inline double min_action_rate(const std::vector<EgoActionSpec>& actions) {
  double rate = std::numeric_limits<double>::infinity();
  for (const auto& a : actions) {
    const double reach = a.deltas.back().norm();
    if (reach > 1e-9) rate = std::min(rate, a.cost / reach);
  }
  require(std::isfinite(rate), "scenario: no ego action makes progress");
  return rate;
}

}  // namespace detail

// Unprotected left turn across one oncoming lane. The ego waits at the stop
// line of a T-junction and must merge into the westbound lane; a southbound
// agent either keeps speed through the junction or yields by slowing to a
// stop before it. Turning early across a non-yielding agent is a collision.
inline Scenario left_turn_scenario(uint64_t library_seed = 2026) {
  Scenario s;
  s.name = "left_turn";
  s.ts = 0.1;
  s.window_size = 5;
  s.d_safe = 2.5;
  s.epsilon = 1e-4;
  s.max_actions = 2;
  s.horizon_ticks = 48;
  s.default_delta = 0.05;
  s.tick_limit = 600;
  s.goal = {-20.0, -4.5, 0.0, 3.75};
  s.ego_start = {1.875, -5.5};
  s.lane_centers_y = {-1.875, 1.875};
  s.lane_width = 3.75;

  EgoActionSpec turn;
  turn.name = "turn_left";
  turn.cost = 2.4;
  turn.deltas = path_to_deltas(arc_path({-5.5, -5.5}, 7.375, 0.0, M_PI / 2.0, 24));
  EgoActionSpec stop;
  stop.name = "stop";
  stop.cost = 0.6;
  stop.deltas = path_to_deltas(hold_path(s.ego_start, 4));
  s.ego_actions = {std::move(turn), std::move(stop)};
  s.safe_action = 1;
  s.progress_rate = detail::min_action_rate(s.ego_actions);

  AgentSpec agent;
  agent.spawn = {-1.875, 13.3};
  agent.spawn_jitter = {0.0, 1.5};
  agent.initial_maneuvers = {{0, 0.5}, {1, 0.5}};
  s.agents = {agent};

  // The yield maneuver approaches at cruise speed before braking firmly, so
  // its first clocks look exactly like forward and the brake onset stands
  // well above path noise; the recognizer has to wait for genuine
  // deceleration instead of reading drift as a decision.
  const DemoNoise noise;
  PftLibrary lib;
  lib.add(generate_pft(synth_demos(straight_path({0, 0}, {0, -6.0}, s.ts, 24), s.ts, 40, noise,
                                   library_seed), "forward"));
  lib.add(generate_pft(synth_demos(cruise_brake_path({0, 0}, {0, -1}, 6.0, s.ts, 6, 10, 19),
                                   s.ts, 40, noise, library_seed + 1), "slow_down"));
  s.library = std::move(lib);

  ManeuverTransitions forward;
  forward.recurrent = true;
  forward.rules = {{Guard::in_region({-3.75, 0.0, 2.0, 30.0}), {{0, 0.95}, {1, 0.05}}},
                   {Guard::always(), {{0, 1.0}}}};
  ManeuverTransitions slow_down;
  slow_down.rules = {{Guard::always(), {{0, 1.0}}}};
  s.transitions.per_maneuver = {std::move(forward), std::move(slow_down)};
  s.risky_assumption = 1;

  s.validate();
  return s;
}

// Two-lane highway cruise. The ego starts in the right lane behind a slower
// lead vehicle and wants to pass; nearby agents cruise in both lanes and
// occasionally change lanes themselves when their neighbor lane is clear.
inline Scenario lane_change_scenario(uint64_t library_seed = 2027) {
  Scenario s;
  s.name = "lane_change";
  s.ts = 0.1;
  s.window_size = 5;
  s.d_safe = 2.5;
  s.epsilon = 1e-4;
  s.max_actions = 2;
  s.horizon_ticks = 30;
  s.default_delta = 0.05;
  s.tick_limit = 600;
  s.goal = {110.0, 400.0, -3.75, 3.75};
  s.ego_start = {0.0, -1.875};
  s.lane_centers_y = {-1.875, 1.875};
  s.lane_width = 3.75;

  EgoActionSpec forward;
  forward.name = "forward";
  forward.cost = 1.0;
  forward.deltas = path_to_deltas(straight_path({0, 0}, {8.0, 0.0}, s.ts, 10));
  EgoActionSpec slow;
  slow.name = "slow";
  slow.cost = 1.6;
  slow.deltas = path_to_deltas(straight_path({0, 0}, {4.0, 0.0}, s.ts, 10));
  EgoActionSpec change_left;
  change_left.name = "change_left";
  change_left.cost = 1.15;
  change_left.deltas = path_to_deltas(lane_shift_path({0, 0}, 8.0, 3.75, s.ts, 10));
  change_left.required_lane = 0;
  EgoActionSpec change_right;
  change_right.name = "change_right";
  change_right.cost = 1.15;
  change_right.deltas = path_to_deltas(lane_shift_path({0, 0}, 8.0, -3.75, s.ts, 10));
  change_right.required_lane = 1;
  s.ego_actions = {std::move(forward), std::move(slow), std::move(change_left),
                   std::move(change_right)};
  s.safe_action = 1;
  s.progress_rate = detail::min_action_rate(s.ego_actions);

  AgentSpec blocker;
  blocker.spawn = {6.5, 1.875};
  blocker.spawn_jitter = {2.5, 0.0};
  blocker.initial_maneuvers = {{0, 1.0}};
  AgentSpec lead;
  lead.spawn = {17.0, -1.875};
  lead.spawn_jitter = {3.0, 0.0};
  lead.initial_maneuvers = {{0, 1.0}};
  AgentSpec far_left;
  far_left.spawn = {35.0, 1.875};
  far_left.spawn_jitter = {5.0, 0.0};
  far_left.initial_maneuvers = {{0, 1.0}};
  s.agents = {blocker, lead, far_left};

  const DemoNoise noise;
  PftLibrary lib;
  lib.add(generate_pft(synth_demos(straight_path({0, 0}, {5.0, 0.0}, s.ts, 15), s.ts, 40, noise,
                                   library_seed), "forward"));
  lib.add(generate_pft(synth_demos(lane_shift_path({0, 0}, 5.0, 3.75, s.ts, 15), s.ts, 40, noise,
                                   library_seed + 1), "change_left"));
  lib.add(generate_pft(synth_demos(lane_shift_path({0, 0}, 5.0, -3.75, s.ts, 15), s.ts, 40, noise,
                                   library_seed + 2), "change_right"));
  s.library = std::move(lib);

  ManeuverTransitions fwd;
  fwd.recurrent = true;
  fwd.rules = {{Guard::adjacent_lane_clear(1, 6.0, 6.0), {{0, 0.9}, {1, 0.1}}},
               {Guard::adjacent_lane_clear(-1, 6.0, 6.0), {{0, 0.9}, {2, 0.1}}},
               {Guard::always(), {{0, 1.0}}}};
  ManeuverTransitions left;
  left.rules = {{Guard::always(), {{0, 1.0}}}};
  ManeuverTransitions right;
  right.rules = {{Guard::always(), {{0, 1.0}}}};
  s.transitions.per_maneuver = {std::move(fwd), std::move(left), std::move(right)};
  s.risky_assumption = 0;

  s.validate();
  return s;
}

// Accepts either a built-in scenario name or a path to a scenario JSON file.
inline Scenario load_scenario(const std::string& name_or_path) {
  if (name_or_path == "left_turn") return left_turn_scenario();
  if (name_or_path == "lane_change") return lane_change_scenario();
  return load_scenario_file(name_or_path);
}

}  // namespace riskplan
