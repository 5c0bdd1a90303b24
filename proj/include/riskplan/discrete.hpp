#pragma once

#include <algorithm>
#include <vector>

#include "riskplan/flow_tube.hpp"
#include "riskplan/geometry.hpp"

namespace riskplan {

// Discrete mode of one agent: which maneuver is active (library index) and
// how far along it is. Clocks run 1..L.
struct DiscreteState {
  int maneuver = 0;
  int clock = 1;

  friend bool operator==(const DiscreteState& a, const DiscreteState& b) {
    return a.maneuver == b.maneuver && a.clock == b.clock;
  }
  friend bool operator<(const DiscreteState& a, const DiscreteState& b) {
    if (a.maneuver != b.maneuver) return a.maneuver < b.maneuver;
    return a.clock < b.clock;
  }
};

struct WeightedState {
  DiscreteState state;
  double prob = 0.0;
};

// Finite distribution over discrete states. Support is kept sorted and unique.
struct DiscreteDistribution {
  std::vector<WeightedState> entries;

  static DiscreteDistribution uniform(const PftLibrary& lib) {
    DiscreteDistribution d;
    int total = 0;
    for (int m = 0; m < lib.size(); ++m) total += lib.at(m).length();
    require(total > 0, "uniform distribution: empty library");
    const double p = 1.0 / static_cast<double>(total);
    for (int m = 0; m < lib.size(); ++m)
      for (int c = 1; c <= lib.at(m).length(); ++c) d.entries.push_back({{m, c}, p});
    return d;
  }

  static DiscreteDistribution point_mass(DiscreteState s) { return {{{s, 1.0}}}; }

  void sort_and_merge() {
    std::sort(entries.begin(), entries.end(),
              [](const WeightedState& a, const WeightedState& b) { return a.state < b.state; });
    std::vector<WeightedState> merged;
    for (const auto& e : entries) {
      if (!merged.empty() && merged.back().state == e.state)
        merged.back().prob += e.prob;
      else
        merged.push_back(e);
    }
    entries = std::move(merged);
  }

  double total() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.prob;
    return s;
  }

  void normalize() {
    const double s = total();
    require(s > 0.0, "distribution: cannot normalize zero mass");
    for (auto& e : entries) e.prob /= s;
  }

  void validate() const {
    require(!entries.empty(), "distribution: empty support");
    for (size_t i = 0; i < entries.size(); ++i) {
      require(entries[i].prob >= 0.0, "distribution: negative probability");
      if (i > 0)
        require(entries[i - 1].state < entries[i].state, "distribution: support not sorted unique");
    }
    require(std::abs(total() - 1.0) <= 1e-9, "distribution: probabilities must sum to 1");
  }

  double prob_of(DiscreteState s) const {
    for (const auto& e : entries)
      if (e.state == s) return e.prob;
    return 0.0;
  }

  // Highest-probability state; first in support order on ties.
  DiscreteState argmax() const {
    require(!entries.empty(), "distribution: empty support");
    size_t best = 0;
    for (size_t i = 1; i < entries.size(); ++i)
      if (entries[i].prob > entries[best].prob) best = i;
    return entries[best].state;
  }

  // Total posterior mass per maneuver, by library index.
  std::vector<double> maneuver_marginals(int maneuver_count) const {
    std::vector<double> out(maneuver_count, 0.0);
    for (const auto& e : entries) out[e.state.maneuver] += e.prob;
    return out;
  }
};

// Drops entries below the threshold and renormalizes the rest. If everything
// falls below, the single most likely entry is kept with probability 1.
inline DiscreteDistribution prune_unlikely(const DiscreteDistribution& dist, double epsilon,
                                           bool* all_pruned = nullptr) {
  if (all_pruned) *all_pruned = false;
  DiscreteDistribution out;
  for (const auto& e : dist.entries)
    if (e.prob >= epsilon) out.entries.push_back(e);
  if (out.entries.empty()) {
    if (all_pruned) *all_pruned = true;
    return DiscreteDistribution::point_mass(dist.argmax());
  }
  out.normalize();
  return out;
}

}  // namespace riskplan
