#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "riskplan/csv.hpp"
#include "riskplan/discrete.hpp"
#include "riskplan/transition_model.hpp"

namespace riskplan {

struct EstimateResult {
  DiscreteDistribution posterior;
  bool underflow = false;  // likelihoods vanished; posterior fell back to the prior
};

// Bayes update of the discrete state from a window of recent positions.
// Works in log space; the posterior support equals the prior support.
inline EstimateResult estimate_discrete(const std::vector<Vec2>& window, const PftLibrary& lib,
                                        const DiscreteDistribution& prior) {
  require(!window.empty(), "estimate_discrete: empty window");
  prior.validate();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(prior.entries.size(), kNegInf);
  double max_logw = kNegInf;
  for (size_t i = 0; i < prior.entries.size(); ++i) {
    const auto& e = prior.entries[i];
    if (e.prob <= 0.0) continue;
    const auto& pft = lib.at(e.state.maneuver);
    const double ll = log_observation_likelihood(pft, e.state.clock, window);
    logw[i] = std::log(e.prob) + ll;
    max_logw = std::max(max_logw, logw[i]);
  }
  if (!std::isfinite(max_logw)) {
    return {prior, true};
  }
  EstimateResult out;
  out.posterior.entries.reserve(prior.entries.size());
  double sum = 0.0;
  for (size_t i = 0; i < prior.entries.size(); ++i) {
    const double w = std::isfinite(logw[i]) ? std::exp(logw[i] - max_logw) : 0.0;
    out.posterior.entries.push_back({prior.entries[i].state, w});
    sum += w;
  }
  for (auto& e : out.posterior.entries) e.prob /= sum;
  return out;
}

// Advances a discrete distribution one tick. Clocks step deterministically;
// at the end of a maneuver the mass follows the guarded successor table.
inline DiscreteDistribution predict_discrete_step(const DiscreteDistribution& dist,
                                                  const DiscreteTransitionModel& td,
                                                  const PftLibrary& lib,
                                                  const GuardContext& ctx) {
  DiscreteDistribution out;
  for (const auto& e : dist.entries) {
    if (e.prob <= 0.0) continue;
    const int len = lib.at(e.state.maneuver).length();
    if (e.state.clock < len) {
      out.entries.push_back({{e.state.maneuver, e.state.clock + 1}, e.prob});
    } else {
      for (const auto& [succ, p] : td.successors(e.state.maneuver, ctx)) {
        if (p <= 0.0) continue;
        out.entries.push_back({{succ, 1}, e.prob * p});
      }
    }
  }
  out.sort_and_merge();
  return out;
}

// One branch of a hybrid prediction. Mean positions are in world frame;
// covariance is the flow tube's at the matching clock plus the anchor
// uncertainty inherited from earlier maneuvers: a successor tube starts
// wherever its predecessor actually ended, so the predecessor's endpoint
// spread carries over. The offset is the translation between the tube's
// canonical frame and the world.
struct PredictionNode {
  DiscreteState state;
  Vec2 mean;
  Mat2 cov;
  Mat2 anchor_cov;
  Vec2 offset;
  double prob = 0.0;
  int parent = -1;
  int depth = 0;
};

struct PredictionTree {
  std::vector<PredictionNode> nodes;
  std::vector<std::vector<int>> by_depth;  // node ids for tick offsets 0..horizon
  double ts = 0.1;
  bool all_pruned_fallback = false;

  int horizon() const { return static_cast<int>(by_depth.size()) - 1; }

  // Path segment covering tick offsets (from, to], walking parent links.
  std::vector<int> segment(int node_id, int from_depth) const {
    std::vector<int> ids;
    int cur = node_id;
    while (cur >= 0 && nodes[cur].depth > from_depth) {
      ids.push_back(cur);
      cur = nodes[cur].parent;
    }
    std::reverse(ids.begin(), ids.end());
    return ids;
  }
};

// Recursive maneuver-sequence prediction. Each posterior entry seeds a branch
// anchored at the agent's observed position; branches split where maneuvers
// complete, following the guarded successor tables. Guards see the branch's
// own predicted position; everyone else stays frozen at the current
// observation (agents do not model reactions to each other).
// Branches dipping below epsilon are dropped and each depth renormalized.
inline PredictionTree predict_hybrid(const DiscreteDistribution& posterior, Vec2 observed_pos,
                                     const DiscreteTransitionModel& td, const PftLibrary& lib,
                                     const GuardContext& ctx, int horizon, double epsilon) {
  require(horizon >= 0, "predict_hybrid: negative horizon");
  posterior.validate();
  PredictionTree tree;
  tree.ts = lib.ts;
  tree.by_depth.assign(horizon + 1, {});

  for (const auto& e : posterior.entries) {
    if (e.prob <= 0.0) continue;
    const auto& pft = lib.at(e.state.maneuver);
    PredictionNode n;
    n.state = e.state;
    n.offset = observed_pos - pft.mean_at(e.state.clock);
    n.mean = observed_pos;
    n.cov = pft.cov_at(e.state.clock);
    n.prob = e.prob;
    n.parent = -1;
    n.depth = 0;
    tree.by_depth[0].push_back(static_cast<int>(tree.nodes.size()));
    tree.nodes.push_back(n);
  }
  require(!tree.by_depth[0].empty(), "predict_hybrid: empty posterior");

  for (int d = 0; d < horizon; ++d) {
    for (const int id : tree.by_depth[d]) {
      const PredictionNode cur = tree.nodes[id];  // copy; nodes vector reallocates
      const auto& pft = lib.at(cur.state.maneuver);
      auto emit = [&](DiscreteState s, Vec2 offset, Mat2 anchor_cov, double prob) {
        const auto& spft = lib.at(s.maneuver);
        PredictionNode n;
        n.state = s;
        n.offset = offset;
        n.mean = offset + spft.mean_at(s.clock);
        n.anchor_cov = anchor_cov;
        n.cov = anchor_cov + spft.cov_at(s.clock);
        n.prob = prob;
        n.parent = id;
        n.depth = d + 1;
        tree.by_depth[d + 1].push_back(static_cast<int>(tree.nodes.size()));
        tree.nodes.push_back(n);
      };
      if (cur.state.clock < pft.length()) {
        emit({cur.state.maneuver, cur.state.clock + 1}, cur.offset, cur.anchor_cov, cur.prob);
      } else {
        GuardContext branch_ctx = ctx;
        branch_ctx.self = cur.mean;
        const Vec2 end = cur.offset + pft.mean_at(pft.length());
        for (const auto& [succ, p] : td.successors(cur.state.maneuver, branch_ctx)) {
          if (p <= 0.0) continue;
          emit({succ, 1}, end - lib.at(succ).mean_at(1), cur.cov, cur.prob * p);
        }
      }
    }
    // Per-depth pruning and renormalization.
    auto& level = tree.by_depth[d + 1];
    require(!level.empty(), "predict_hybrid: dead end in transition model");
    std::vector<int> kept;
    double mass = 0.0;
    for (const int id : level) {
      if (tree.nodes[id].prob >= epsilon) {
        kept.push_back(id);
        mass += tree.nodes[id].prob;
      }
    }
    if (kept.empty()) {
      int best = level[0];
      for (const int id : level)
        if (tree.nodes[id].prob > tree.nodes[best].prob) best = id;
      kept = {best};
      mass = tree.nodes[best].prob;
      tree.all_pruned_fallback = true;
    }
    const double scale = 1.0 / mass;
    // Rescaling a parent implicitly rescales its subtree, since children are
    // created from the parent's stored probability; survivors at this depth
    // carry the scale forward directly.
    for (const int id : kept) tree.nodes[id].prob *= scale;
    level = std::move(kept);
  }
  return tree;
}

struct HybridStepEntry {
  DiscreteState state;
  double prob = 0.0;
  Gaussian2D position;
};

// Per-step view: one entry per surviving branch, sorted by discrete state.
struct HybridPrediction {
  double ts = 0.1;
  std::vector<std::vector<HybridStepEntry>> steps;
};

inline HybridPrediction hybrid_marginals(const PredictionTree& tree) {
  HybridPrediction out;
  out.ts = tree.ts;
  out.steps.resize(tree.by_depth.size());
  for (size_t d = 0; d < tree.by_depth.size(); ++d) {
    for (const int id : tree.by_depth[d]) {
      const auto& n = tree.nodes[id];
      out.steps[d].push_back({n.state, n.prob, {n.mean, n.cov}});
    }
    std::sort(out.steps[d].begin(), out.steps[d].end(),
              [](const HybridStepEntry& a, const HybridStepEntry& b) {
                if (!(a.state == b.state)) return a.state < b.state;
                if (a.position.mean.x != b.position.mean.x) return a.position.mean.x < b.position.mean.x;
                return a.position.mean.y < b.position.mean.y;
              });
  }
  return out;
}

// Probability-weighted mean position at a given step.
inline Vec2 predicted_mean_at(const PredictionTree& tree, int step) {
  require(step >= 0 && step <= tree.horizon(), "predicted_mean_at: step out of range");
  Vec2 acc{0.0, 0.0};
  double mass = 0.0;
  for (const int id : tree.by_depth[step]) {
    acc += tree.nodes[id].mean * tree.nodes[id].prob;
    mass += tree.nodes[id].prob;
  }
  require(mass > 1e-12, "predicted_mean_at: no mass at step");
  return acc * (1.0 / mass);
}

// Euclidean gap between the weighted mean prediction and the realized position
// after the given horizon. truth[0] must correspond to prediction step 0.
inline double end_displacement_error(const PredictionTree& tree, const Trajectory& truth,
                                     double horizon_seconds) {
  const int step = static_cast<int>(std::lround(horizon_seconds / tree.ts));
  require(step <= tree.horizon(), "end_displacement_error: horizon exceeds prediction");
  require(step < static_cast<int>(truth.size()), "end_displacement_error: horizon exceeds truth");
  return distance(predicted_mean_at(tree, step), truth.p[step]);
}

inline void write_prediction_csv(const HybridPrediction& pred, const PftLibrary& lib,
                                 const std::string& path) {
  CsvWriter w(path);
  w.row({"step", "maneuver", "clock", "prob", "mux", "muy", "sxx", "sxy", "syy"});
  for (size_t d = 0; d < pred.steps.size(); ++d) {
    for (const auto& e : pred.steps[d]) {
      w.row({std::to_string(d), lib.at(e.state.maneuver).label, std::to_string(e.state.clock),
             format_double(e.prob), format_double(e.position.mean.x),
             format_double(e.position.mean.y), format_double(e.position.cov.a),
             format_double(e.position.cov.b), format_double(e.position.cov.d)});
    }
  }
}

}  // namespace riskplan
