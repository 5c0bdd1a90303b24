#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "riskplan/csv.hpp"
#include "riskplan/geometry.hpp"

namespace riskplan {

// Uniformly sampled 2D path. Timestamps are seconds.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vec2> p;

  size_t size() const { return p.size(); }
  bool empty() const { return p.empty(); }

  double ts() const {
    require(t.size() >= 2, "Trajectory::ts: need at least two points");
    return t[1] - t[0];
  }

  void push_back(double time, Vec2 pos) {
    t.push_back(time);
    p.push_back(pos);
  }

  void validate() const {
    require(p.size() >= 2, "Trajectory: length must be >= 2");
    require(t.size() == p.size(), "Trajectory: timestamp/point count mismatch");
    const double dt = t[1] - t[0];
    require(dt > 0.0, "Trajectory: timestamps must be strictly increasing");
    for (size_t i = 0; i + 1 < t.size(); ++i) {
      const double d = t[i + 1] - t[i];
      require(d > 0.0, "Trajectory: timestamps must be strictly increasing");
      require(std::abs(d - dt) <= 1e-9, "Trajectory: sample spacing must be uniform");
    }
    for (size_t i = 0; i < p.size(); ++i) {
      require(std::isfinite(t[i]) && std::isfinite(p[i].x) && std::isfinite(p[i].y),
              "Trajectory: coordinates must be finite");
    }
  }

  // Last n points (all of them if fewer exist).
  std::vector<Vec2> tail(size_t n) const {
    const size_t k = std::min(n, p.size());
    return std::vector<Vec2>(p.end() - k, p.end());
  }
};

inline Trajectory make_trajectory(const std::vector<Vec2>& pts, double ts, double t0 = 0.0) {
  Trajectory tr;
  tr.p = pts;
  tr.t.resize(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) tr.t[i] = t0 + static_cast<double>(i) * ts;
  return tr;
}

inline void save_trajectory_csv(const Trajectory& tr, const std::string& path) {
  CsvWriter w(path);
  w.row({"t", "x", "y"});
  for (size_t i = 0; i < tr.size(); ++i)
    w.row({format_double(tr.t[i]), format_double(tr.p[i].x), format_double(tr.p[i].y)});
}

inline Trajectory load_trajectory_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  require(t.header.size() == 3 && t.header[0] == "t" && t.header[1] == "x" && t.header[2] == "y",
          "trajectory csv: expected header t,x,y in " + path);
  Trajectory tr;
  for (const auto& r : t.rows) {
    require(r.size() == 3, "trajectory csv: expected 3 columns in " + path);
    tr.push_back(parse_double(r[0], path), {parse_double(r[1], path), parse_double(r[2], path)});
  }
  tr.validate();
  return tr;
}

}  // namespace riskplan
