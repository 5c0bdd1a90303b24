#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "riskplan/geometry.hpp"

namespace riskplan {

namespace detail {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

inline QuadratureRule gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

inline const QuadratureRule& radial_rule() {
  static const QuadratureRule rule = gauss_legendre(48);
  return rule;
}

}  // namespace detail

// Probability that a Gaussian-distributed point lands within d_safe of ego.
//
// Computed in the whitened frame, where the distribution is a standard
// normal and the safety disc maps to an ellipse star-shaped about the
// whitened ego position. Polar quadrature about that point, with the
// radial interval clipped to the 12-sigma support of the integrand and
// the angular node count scaled for the two narrow-feature regimes: the
// mass sitting far from the whitened ego (tight covariance near the disc
// boundary, feature width ~ 1/distance) and a stretched covariance that
// maps the disc to a thin sliver (feature width ~ sigma_min/sigma_max).
inline double collision_risk(const Gaussian2D& g, Vec2 ego, double d_safe) {
  require(d_safe >= 0.0, "collision_risk: negative safety distance");
  require(std::isfinite(ego.x) && std::isfinite(ego.y), "collision_risk: non-finite ego");
  if (d_safe == 0.0) return 0.0;
  double l11, l21, l22;
  g.cov.cholesky(l11, l21, l22);
  if (l11 <= 1e-12 || l22 <= 1e-12) return distance(g.mean, ego) <= d_safe ? 1.0 : 0.0;

  constexpr double kSupport = 12.0;
  const Vec2 c = ego - g.mean;
  const double dist = c.norm();
  double eig_lo, eig_hi;
  g.cov.sym_eigenvalues(eig_lo, eig_hi);
  const double sigma_max = std::sqrt(std::max(eig_hi, 0.0));
  if (dist + kSupport * sigma_max <= d_safe) return 1.0;
  if (dist - d_safe >= kSupport * sigma_max) return 0.0;

  const double cx = c.x / l11;
  const double cy = (c.y - l21 * cx) / l22;
  const double b = cx * cx + cy * cy;
  const double center_dist = std::sqrt(b);
  const double sigma_min = std::sqrt(std::max(eig_lo, 1e-24));
  const double aspect = sigma_max / sigma_min;

  // The whitened image of the disc fits in a ball of radius d / sigma_min
  // around the whitened disc center, so the Rayleigh tail beyond that ball
  // bounds the risk; below 1e-7 the quadrature is skipped. exp(-5.68^2 / 2)
  // is just under 1e-7.
  const double tail_gap = center_dist - d_safe / sigma_min;
  if (tail_gap > 5.68) return 0.0;

  const auto& radial = detail::radial_rule();
  const int angles = static_cast<int>(
      std::min(64.0 + std::ceil(10.0 * center_dist) + std::ceil(50.0 * aspect), 32768.0));
  double total = 0.0;
  for (int k = 0; k < angles; ++k) {
    const double theta = 2.0 * M_PI * (k + 0.5) / angles;
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    const double lu = std::hypot(l11 * ux, l21 * ux + l22 * uy);
    const double r_max = d_safe / lu;
    const double a = cx * ux + cy * uy;
    const double lo = std::max(0.0, -a - kSupport);
    const double hi = std::min(r_max, -a + kSupport);
    if (hi <= lo) continue;
    const double mid = 0.5 * (hi + lo);
    const double half = 0.5 * (hi - lo);
    double slice = 0.0;
    for (size_t j = 0; j < radial.nodes.size(); ++j) {
      const double r = mid + half * radial.nodes[j];
      slice += half * radial.weights[j] * r * std::exp(-0.5 * (r * r + 2.0 * a * r + b));
    }
    total += slice;
  }
  return std::clamp(total / angles, 0.0, 1.0);
}

// Probability of at least one event among independent per-tick risks.
inline double combine_risks(const std::vector<double>& risks) {
  double survive = 1.0;
  for (const double r : risks) {
    require(r >= -1e-12 && r <= 1.0 + 1e-12, "combine_risks: risk outside [0, 1]");
    survive *= 1.0 - std::clamp(r, 0.0, 1.0);
  }
  return 1.0 - survive;
}

}  // namespace riskplan
