#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskplan/discrete.hpp"
#include "riskplan/geometry.hpp"

namespace riskplan {

// World snapshot a guard predicate can look at: the transitioning vehicle's
// position plus everyone else's. Lane geometry is a row of parallel lanes
// along x; "left" means toward larger y.
struct GuardContext {
  Vec2 self;
  std::vector<Vec2> others;
  std::vector<double> lane_centers_y;
  double lane_width = 3.75;

  int nearest_lane(double y) const {
    require(!lane_centers_y.empty(), "guard: lane geometry not set");
    int best = 0;
    for (size_t i = 1; i < lane_centers_y.size(); ++i)
      if (std::abs(y - lane_centers_y[i]) < std::abs(y - lane_centers_y[best]))
        best = static_cast<int>(i);
    return best;
  }
};

struct Guard {
  enum class Kind { kAlways, kInLane, kAdjacentLaneClear, kInRegion };

  Kind kind = Kind::kAlways;
  int lane = 0;           // kInLane
  int direction = 1;      // kAdjacentLaneClear: +1 left, -1 right
  double gap_ahead = 0.0;
  double gap_behind = 0.0;
  Rect region;            // kInRegion

  static Guard always() { return {}; }
  static Guard in_lane(int lane_index) {
    Guard g;
    g.kind = Kind::kInLane;
    g.lane = lane_index;
    return g;
  }
  static Guard adjacent_lane_clear(int dir, double ahead, double behind) {
    Guard g;
    g.kind = Kind::kAdjacentLaneClear;
    g.direction = dir;
    g.gap_ahead = ahead;
    g.gap_behind = behind;
    return g;
  }
  static Guard in_region(Rect r) {
    Guard g;
    g.kind = Kind::kInRegion;
    g.region = r;
    return g;
  }

  bool eval(const GuardContext& ctx) const {
    switch (kind) {
      case Kind::kAlways:
        return true;
      case Kind::kInLane:
        return ctx.nearest_lane(ctx.self.y) == lane;
      case Kind::kAdjacentLaneClear: {
        const int self_lane = ctx.nearest_lane(ctx.self.y);
        const int target = self_lane + direction;
        if (target < 0 || target >= static_cast<int>(ctx.lane_centers_y.size())) return false;
        const double center = ctx.lane_centers_y[target];
        for (const auto& o : ctx.others) {
          if (std::abs(o.y - center) > ctx.lane_width / 2.0) continue;
          const double dx = o.x - ctx.self.x;
          if (dx >= -gap_behind && dx <= gap_ahead) return false;
        }
        return true;
      }
      case Kind::kInRegion:
        return region.contains(ctx.self);
    }
    return false;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    switch (kind) {
      case Kind::kAlways:
        j["name"] = "always";
        break;
      case Kind::kInLane:
        j["name"] = "in_lane";
        j["lane"] = lane;
        break;
      case Kind::kAdjacentLaneClear:
        j["name"] = "adjacent_lane_clear";
        j["direction"] = direction > 0 ? "left" : "right";
        j["gap_ahead"] = gap_ahead;
        j["gap_behind"] = gap_behind;
        break;
      case Kind::kInRegion:
        j["name"] = "in_region";
        j["x0"] = region.x0;
        j["x1"] = region.x1;
        j["y0"] = region.y0;
        j["y1"] = region.y1;
        break;
    }
    return j;
  }

  static Guard from_json(const nlohmann::json& j) {
    const std::string name = j.at("name").get<std::string>();
    if (name == "always") return always();
    if (name == "in_lane") return in_lane(j.at("lane").get<int>());
    if (name == "adjacent_lane_clear") {
      const std::string dir = j.at("direction").get<std::string>();
      require(dir == "left" || dir == "right", "guard: direction must be left or right");
      return adjacent_lane_clear(dir == "left" ? 1 : -1, j.at("gap_ahead").get<double>(),
                                 j.at("gap_behind").get<double>());
    }
    if (name == "in_region")
      return in_region({j.at("x0").get<double>(), j.at("x1").get<double>(),
                        j.at("y0").get<double>(), j.at("y1").get<double>()});
    throw std::runtime_error("guard: unknown predicate '" + name + "'");
  }
};

struct TransitionRule {
  Guard guard;
  std::vector<std::pair<int, double>> successors;  // maneuver index -> probability
};

struct ManeuverTransitions {
  bool recurrent = false;  // may list itself as a successor
  std::vector<TransitionRule> rules;
};

// Guarded successor tables evaluated when a maneuver's clock reaches its end.
// Rules are ordered; the first guard that holds selects the table.
struct DiscreteTransitionModel {
  std::vector<ManeuverTransitions> per_maneuver;

  void validate(const PftLibrary& lib) const {
    require(static_cast<int>(per_maneuver.size()) == lib.size(),
            "transition model: table count must match library");
    for (int m = 0; m < lib.size(); ++m) {
      const auto& mt = per_maneuver[m];
      const std::string& label = lib.at(m).label;
      require(!mt.rules.empty(), "transition model: no rules for '" + label + "'");
      require(mt.rules.back().guard.kind == Guard::Kind::kAlways,
              "transition model: last rule for '" + label + "' must be unconditional");
      for (const auto& rule : mt.rules) {
        require(!rule.successors.empty(), "transition model: empty successor table for '" + label + "'");
        double sum = 0.0;
        for (const auto& [succ, p] : rule.successors) {
          require(succ >= 0 && succ < lib.size(),
                  "transition model: bad successor index for '" + label + "'");
          require(p >= 0.0, "transition model: negative probability for '" + label + "'");
          require(succ != m || mt.recurrent,
                  "transition model: '" + label + "' lists itself but is not recurrent");
          sum += p;
        }
        require(std::abs(sum - 1.0) <= 1e-9,
                "transition model: successor probabilities for '" + label + "' must sum to 1");
      }
    }
  }

  const std::vector<std::pair<int, double>>& successors(int maneuver,
                                                        const GuardContext& ctx) const {
    require(maneuver >= 0 && maneuver < static_cast<int>(per_maneuver.size()),
            "transition model: maneuver index out of range");
    for (const auto& rule : per_maneuver[maneuver].rules)
      if (rule.guard.eval(ctx)) return rule.successors;
    throw std::runtime_error("transition model: no rule matched (missing unconditional fallback)");
  }
};

}  // namespace riskplan
