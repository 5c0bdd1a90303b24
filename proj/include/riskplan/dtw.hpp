#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "riskplan/trajectory.hpp"

namespace riskplan {

// Dynamic time warping with the symmetric step pattern (diagonal, vertical,
// horizontal all weight 1) and Euclidean point distance. Ties in the DP prefer
// diagonal, then vertical, then horizontal, which fixes the alignment path.

namespace detail {

enum class DtwStep : uint8_t { kDiag = 0, kUp = 1, kLeft = 2, kStart = 3 };

struct DtwTable {
  size_t rows = 0, cols = 0;
  std::vector<double> cost;
  std::vector<DtwStep> from;
  double& at(size_t i, size_t j) { return cost[i * cols + j]; }
  DtwStep& step(size_t i, size_t j) { return from[i * cols + j]; }
};

inline DtwTable dtw_fill(const std::vector<Vec2>& ref, const std::vector<Vec2>& in) {
  require(!ref.empty() && !in.empty(), "dtw: empty trajectory");
  DtwTable t;
  t.rows = ref.size();
  t.cols = in.size();
  t.cost.assign(t.rows * t.cols, 0.0);
  t.from.assign(t.rows * t.cols, DtwStep::kStart);
  for (size_t i = 0; i < t.rows; ++i) {
    for (size_t j = 0; j < t.cols; ++j) {
      const double d = distance(ref[i], in[j]);
      if (i == 0 && j == 0) {
        t.at(i, j) = d;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      DtwStep how = DtwStep::kStart;
      if (i > 0 && j > 0 && t.at(i - 1, j - 1) < best) {
        best = t.at(i - 1, j - 1);
        how = DtwStep::kDiag;
      }
      if (i > 0 && t.at(i - 1, j) < best) {
        best = t.at(i - 1, j);
        how = DtwStep::kUp;
      }
      if (j > 0 && t.at(i, j - 1) < best) {
        best = t.at(i, j - 1);
        how = DtwStep::kLeft;
      }
      t.at(i, j) = best + d;
      t.step(i, j) = how;
    }
  }
  return t;
}

}  // namespace detail

inline double dtw_cost(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto t = detail::dtw_fill(a, b);
  return t.at(t.rows - 1, t.cols - 1);
}

// For each reference index, the smallest input index matched on the optimal
// path. The result is non-decreasing, so warping only repeats input points.
inline std::vector<size_t> dtw_map(const std::vector<Vec2>& ref, const std::vector<Vec2>& in) {
  auto t = detail::dtw_fill(ref, in);
  std::vector<size_t> match(ref.size(), 0);
  size_t i = t.rows - 1, j = t.cols - 1;
  match[i] = j;
  while (!(i == 0 && j == 0)) {
    switch (t.step(i, j)) {
      case detail::DtwStep::kDiag:
        --i;
        --j;
        break;
      case detail::DtwStep::kUp:
        --i;
        break;
      case detail::DtwStep::kLeft:
        --j;
        break;
      case detail::DtwStep::kStart:
        require(false, "dtw_map: corrupt backtrack");
    }
    match[i] = j;  // overwritten toward smaller j as the walk proceeds
  }
  return match;
}

// Index of the demonstration minimizing total pairwise DTW cost (lowest index wins ties).
inline size_t dtw_medoid(const std::vector<Trajectory>& demos) {
  require(!demos.empty(), "dtw_medoid: no demonstrations");
  const size_t n = demos.size();
  std::vector<double> total(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double c = dtw_cost(demos[i].p, demos[j].p);
      total[i] += c;
      total[j] += c;
    }
  }
  size_t best = 0;
  for (size_t i = 1; i < n; ++i)
    if (total[i] < total[best]) best = i;
  return best;
}

// Warps every demonstration onto the medoid's clock. All outputs share the
// medoid's length and uniform timestamps starting at zero.
inline std::vector<Trajectory> dtw_align(const std::vector<Trajectory>& demos) {
  require(!demos.empty(), "dtw_align: no demonstrations");
  for (const auto& d : demos) d.validate();
  const double ts = demos[0].ts();
  for (const auto& d : demos)
    require(std::abs(d.ts() - ts) <= 1e-9, "dtw_align: demonstrations disagree on sample period");
  const size_t m = dtw_medoid(demos);
  const auto& ref = demos[m].p;
  std::vector<Trajectory> out;
  out.reserve(demos.size());
  for (const auto& d : demos) {
    const auto match = dtw_map(ref, d.p);
    std::vector<Vec2> pts(ref.size());
    for (size_t i = 0; i < ref.size(); ++i) pts[i] = d.p[match[i]];
    out.push_back(make_trajectory(pts, ts));
  }
  return out;
}

}  // namespace riskplan
