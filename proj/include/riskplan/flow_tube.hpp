#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskplan/dtw.hpp"
#include "riskplan/rng.hpp"
#include "riskplan/trajectory.hpp"

namespace riskplan {

constexpr double kSigmaMin = 0.05;  // covariance floor, meters

// Learned maneuver model: per-clock mean and covariance of the aligned
// demonstrations. Clocks are 1-based to match the discrete state encoding.
struct ProbabilisticFlowTube {
  std::string label;
  double ts = 0.1;
  std::vector<Vec2> means;
  std::vector<Mat2> covs;
  int demo_count = 0;

  int length() const { return static_cast<int>(means.size()); }

  const Vec2& mean_at(int clock) const {
    require(clock >= 1 && clock <= length(), "flow tube '" + label + "': clock out of range");
    return means[clock - 1];
  }
  const Mat2& cov_at(int clock) const {
    require(clock >= 1 && clock <= length(), "flow tube '" + label + "': clock out of range");
    return covs[clock - 1];
  }
};

inline Gaussian2D pft_point_distribution(const ProbabilisticFlowTube& pft, int clock) {
  return {pft.mean_at(clock), pft.cov_at(clock)};
}

inline ProbabilisticFlowTube generate_pft(const std::vector<Trajectory>& demos,
                                          const std::string& label,
                                          double sigma_min = kSigmaMin) {
  require(!demos.empty(), "generate_pft: no demonstrations for '" + label + "'");
  const auto aligned = dtw_align(demos);
  const size_t len = aligned[0].size();
  const double n = static_cast<double>(aligned.size());

  ProbabilisticFlowTube pft;
  pft.label = label;
  pft.ts = aligned[0].ts();
  pft.demo_count = static_cast<int>(aligned.size());
  pft.means.resize(len);
  pft.covs.resize(len);
  for (size_t i = 0; i < len; ++i) {
    Vec2 mu{0.0, 0.0};
    for (const auto& tr : aligned) mu += tr.p[i];
    mu = mu * (1.0 / n);
    Mat2 cov{};  // zero when a single demonstration leaves variance undefined
    if (aligned.size() >= 2) {
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (const auto& tr : aligned) {
        const Vec2 r = tr.p[i] - mu;
        sxx += r.x * r.x;
        sxy += r.x * r.y;
        syy += r.y * r.y;
      }
      const double inv = 1.0 / (n - 1.0);
      cov = {sxx * inv, sxy * inv, sxy * inv, syy * inv};
    }
    pft.means[i] = mu;
    pft.covs[i] = cov + Mat2::isotropic(sigma_min * sigma_min);
  }
  return pft;
}

// Log of the window likelihood for the hypothesis "maneuver is at clock i".
// The window is translated as a whole so its final point lands on means[i];
// each point is then scored against the clock it would occupy. Clocks before
// the start of the tube are skipped, so early hypotheses use fewer factors.
inline double log_observation_likelihood(const ProbabilisticFlowTube& pft, int clock,
                                         const std::vector<Vec2>& window) {
  require(!window.empty(), "observation likelihood: empty window");
  require(clock >= 1 && clock <= pft.length(),
          "observation likelihood: clock out of range for '" + pft.label + "'");
  const int w = static_cast<int>(window.size());
  const Vec2 shift = pft.mean_at(clock) - window.back();
  double ll = 0.0;
  for (int j = 0; j < w; ++j) {
    const int c = clock - (w - 1) + j;
    if (c < 1) continue;
    ll += Gaussian2D{pft.mean_at(c), pft.cov_at(c)}.log_pdf(window[j] + shift);
  }
  return ll;
}

inline double observation_likelihood(const ProbabilisticFlowTube& pft, int clock,
                                     const std::vector<Vec2>& window) {
  return std::exp(log_observation_likelihood(pft, clock, window));
}

// Independent draws from the per-clock Gaussians for clocks
// start_clock+1 .. start_clock+steps.
inline Trajectory sample_pft_trajectory(const ProbabilisticFlowTube& pft, int start_clock,
                                        int steps, uint64_t seed) {
  require(steps >= 1, "sample_pft_trajectory: steps must be >= 1");
  require(start_clock >= 0 && start_clock + steps <= pft.length(),
          "sample_pft_trajectory: clock range exceeds tube length");
  Rng rng(seed);
  Trajectory tr;
  for (int j = 1; j <= steps; ++j) {
    const int c = start_clock + j;
    const Vec2& mu = pft.mean_at(c);
    double l11, l21, l22;
    pft.cov_at(c).cholesky(l11, l21, l22);
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    tr.push_back(static_cast<double>(j - 1) * pft.ts,
                 {mu.x + l11 * z1, mu.y + l21 * z1 + l22 * z2});
  }
  return tr;
}

struct PftLibrary {
  double ts = 0.1;
  std::vector<ProbabilisticFlowTube> maneuvers;

  int size() const { return static_cast<int>(maneuvers.size()); }

  int index_of(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (maneuvers[i].label == label) return i;
    std::string known;
    for (const auto& m : maneuvers) known += (known.empty() ? "" : ", ") + m.label;
    throw std::runtime_error("library: unknown maneuver '" + label + "' (known: " + known + ")");
  }

  const ProbabilisticFlowTube& at(int index) const {
    require(index >= 0 && index < size(), "library: maneuver index out of range");
    return maneuvers[index];
  }

  const ProbabilisticFlowTube& by_label(const std::string& label) const {
    return maneuvers[index_of(label)];
  }

  void add(ProbabilisticFlowTube pft) {
    if (maneuvers.empty()) ts = pft.ts;
    require(std::abs(pft.ts - ts) <= 1e-9, "library: sample period mismatch for '" + pft.label + "'");
    for (const auto& m : maneuvers)
      require(m.label != pft.label, "library: duplicate maneuver '" + pft.label + "'");
    maneuvers.push_back(std::move(pft));
  }
};

namespace detail {

inline Mat2 validated_cov(const nlohmann::json& arr, const std::string& where) {
  require(arr.is_array() && arr.size() == 4, where + ": covariance needs 4 entries");
  Mat2 m{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(), arr[3].get<double>()};
  require(m.is_symmetric(1e-9), where + ": covariance not symmetric");
  double lo, hi;
  m.sym_eigenvalues(lo, hi);
  require(lo >= -1e-9, where + ": covariance not positive semidefinite");
  if (lo < 0.0) {
    // Project onto the PSD cone: shift both eigenvalues up by the deficit.
    m.a -= lo;
    m.d -= lo;
  }
  return m;
}

}  // namespace detail

inline void save_library(const PftLibrary& lib, const std::string& path) {
  nlohmann::ordered_json j;
  j["ts"] = lib.ts;
  j["maneuvers"] = nlohmann::ordered_json::array();
  for (const auto& m : lib.maneuvers) {
    nlohmann::ordered_json e;
    e["label"] = m.label;
    e["length"] = m.length();
    e["demo_count"] = m.demo_count;
    auto means = nlohmann::ordered_json::array();
    for (const auto& mu : m.means) means.push_back({mu.x, mu.y});
    auto covs = nlohmann::ordered_json::array();
    for (const auto& c : m.covs) covs.push_back({c.a, c.b, c.c, c.d});
    e["means"] = std::move(means);
    e["covs"] = std::move(covs);
    j["maneuvers"].push_back(std::move(e));
  }
  std::ofstream out(path);
  require(out.good(), "save_library: cannot open " + path);
  out << j.dump(1) << '\n';
}

inline PftLibrary load_library(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_library: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("load_library: bad json in " + path + ": " + e.what());
  }
  require(j.contains("ts") && j.contains("maneuvers"), "load_library: missing ts or maneuvers");
  PftLibrary lib;
  lib.ts = j["ts"].get<double>();
  require(lib.ts > 0.0, "load_library: ts must be positive");
  for (const auto& e : j["maneuvers"]) {
    ProbabilisticFlowTube m;
    require(e.contains("label"), "load_library: maneuver missing label");
    m.label = e["label"].get<std::string>();
    const std::string where = "maneuver '" + m.label + "'";
    m.ts = lib.ts;
    m.demo_count = e.value("demo_count", 0);
    require(e.contains("means") && e.contains("covs"), where + ": missing means or covs");
    const auto& means = e["means"];
    const auto& covs = e["covs"];
    require(means.size() == covs.size(), where + ": means/covs length mismatch");
    require(!means.empty(), where + ": empty tube");
    const int declared = e.value("length", static_cast<int>(means.size()));
    require(declared == static_cast<int>(means.size()), where + ": declared length mismatch");
    for (size_t i = 0; i < means.size(); ++i) {
      const auto& mu = means[i];
      require(mu.is_array() && mu.size() == 2, where + ": mean needs 2 entries");
      m.means.push_back({mu[0].get<double>(), mu[1].get<double>()});
      m.covs.push_back(detail::validated_cov(covs[i], where));
    }
    if (lib.maneuvers.empty()) lib.ts = m.ts;
    lib.add(std::move(m));
  }
  require(lib.size() >= 1, "load_library: no maneuvers in " + path);
  return lib;
}

}  // namespace riskplan
