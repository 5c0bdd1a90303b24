#include "riskplan/risk.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "riskplan/rng.hpp"

namespace riskplan {
namespace {

// ====== oracle: regularized incomplete gamma, series + continued fraction ======

double gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_cont_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gammp(double a, double x) {
  if (x <= 0.0) return 0.0;
  return x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_cont_fraction(a, x);
}

// P(|X - ego| <= d) for X ~ N(mu, sigma^2 I): noncentral chi-square with two
// degrees of freedom, evaluated as a Poisson mixture of central chi-squares.
double disc_prob_isotropic(double sigma, double offset, double d) {
  const double half_lambda = 0.5 * offset * offset / (sigma * sigma);
  const double half_x = 0.5 * d * d / (sigma * sigma);
  if (half_lambda == 0.0) return gammp(1.0, half_x);
  const auto log_weight = [&](long k) {
    return -half_lambda + k * std::log(half_lambda) - std::lgamma(k + 1.0);
  };
  const long mode = static_cast<long>(half_lambda);
  double total = 0.0;
  for (long k = mode; k >= 0; --k) {
    const double w = std::exp(log_weight(k));
    total += w * gammp(k + 1.0, half_x);
    if (w < 1e-18) break;
  }
  for (long k = mode + 1; k < mode + 2000000; ++k) {
    const double w = std::exp(log_weight(k));
    total += w * gammp(k + 1.0, half_x);
    if (w < 1e-18) break;
  }
  return total;
}

// ====== oracle: same polar construction at much finer resolution ======

double fine_reference(const Gaussian2D& g, Vec2 ego, double d) {
  double l11, l21, l22;
  g.cov.cholesky(l11, l21, l22);
  const Vec2 c = ego - g.mean;
  const double cx = c.x / l11;
  const double cy = (c.y - l21 * cx) / l22;
  const double b = cx * cx + cy * cy;
  const auto rule = detail::gauss_legendre(96);
  const int angles = 16384;
  double total = 0.0;
  for (int k = 0; k < angles; ++k) {
    const double theta = 2.0 * M_PI * (k + 0.5) / angles;
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    const double lu = std::hypot(l11 * ux, l21 * ux + l22 * uy);
    const double a = cx * ux + cy * uy;
    const double lo = std::max(0.0, -a - 14.0);
    const double hi = std::min(d / lu, -a + 14.0);
    if (hi <= lo) continue;
    const double mid = 0.5 * (hi + lo);
    const double half = 0.5 * (hi - lo);
    for (int j = 0; j < 96; ++j) {
      const double r = mid + half * rule.nodes[j];
      total += half * rule.weights[j] * r * std::exp(-0.5 * (r * r + 2.0 * a * r + b));
    }
  }
  return total / angles;
}

double monte_carlo(const Gaussian2D& g, Vec2 ego, double d, int n, uint64_t seed,
                   double* stderr_out) {
  double l11, l21, l22;
  g.cov.cholesky(l11, l21, l22);
  Rng rng(seed);
  long hits = 0;
  for (int i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const Vec2 x{g.mean.x + l11 * z1, g.mean.y + l21 * z1 + l22 * z2};
    if (distance(x, ego) <= d) ++hits;
  }
  const double p = static_cast<double>(hits) / n;
  *stderr_out = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
  return p;
}

TEST(Risk, OracleSelfChecks) {
  // The noncentral oracle must reduce to the Rayleigh law at zero offset.
  for (const double sigma : {0.1, 0.3, 1.0})
    for (const double d : {0.2, 0.5, 2.5})
      EXPECT_NEAR(disc_prob_isotropic(sigma, 0.0, d),
                  1.0 - std::exp(-0.5 * d * d / (sigma * sigma)), 1e-12);
  // And agree with Monte Carlo away from the center.
  double se = 0.0;
  const Gaussian2D g{{0, 0}, Mat2::isotropic(0.09)};
  const double mc = monte_carlo(g, {0.4, 0.1}, 0.5, 2000000, 99, &se);
  EXPECT_NEAR(disc_prob_isotropic(0.3, std::hypot(0.4, 0.1), 0.5), mc, 4.0 * se);
}

TEST(Risk, CenteredIsotropicMatchesRayleigh) {
  const Gaussian2D g{{1.5, -2.0}, Mat2::isotropic(0.09)};
  const double expected = 1.0 - std::exp(-0.25 / 0.18);
  EXPECT_NEAR(collision_risk(g, {1.5, -2.0}, 0.5), expected, 1e-10);
}

TEST(Risk, OffsetIsotropicMatchesNoncentralChiSquare) {
  for (const double sigma : {0.05, 0.1, 0.3, 0.8}) {
    for (const double offset : {0.0, 0.1, 0.5, 1.0, 2.3, 2.5, 2.7, 4.0}) {
      const Gaussian2D g{{0, 0}, Mat2::isotropic(sigma * sigma)};
      const double got = collision_risk(g, {offset, 0.0}, 2.5);
      const double want = disc_prob_isotropic(sigma, offset, 2.5);
      EXPECT_NEAR(got, want, 1e-4) << "sigma " << sigma << " offset " << offset;
    }
  }
}

TEST(Risk, TightCovarianceNearBoundary) {
  // Whitened ego far from the mass: the regime that needs the adaptive
  // angular resolution. Risks here transition from ~1 to ~0 across the
  // boundary band and must stay accurate to 1e-4.
  const double sigma = 0.05;
  const Gaussian2D g{{0, 0}, Mat2::isotropic(sigma * sigma)};
  for (double offset = 2.38; offset <= 2.63; offset += 0.03) {
    const double got = collision_risk(g, {offset, 0.0}, 2.5);
    const double want = disc_prob_isotropic(sigma, offset, 2.5);
    EXPECT_NEAR(got, want, 1e-4) << "offset " << offset;
  }
}

TEST(Risk, CorrelatedCovarianceMatchesMonteCarlo) {
  const Gaussian2D g{{0.3, -0.2}, {0.09, 0.04, 0.04, 0.06}};
  const struct {
    Vec2 ego;
    double d;
  } cases[] = {{{0.3, -0.2}, 0.3}, {{0.6, 0.1}, 0.4}, {{1.0, -0.5}, 0.5}};
  for (const auto& cs : cases) {
    double se = 0.0;
    const double mc = monte_carlo(g, cs.ego, cs.d, 4000000, 1234, &se);
    EXPECT_NEAR(collision_risk(g, cs.ego, cs.d), mc, 4.0 * se + 1e-5);
  }
}

TEST(Risk, StretchedCovarianceMatchesMonteCarlo) {
  const Gaussian2D g{{0, 0}, {4.0, 0.0, 0.0, 0.01}};
  double se = 0.0;
  const double mc = monte_carlo(g, {0.0, 0.15}, 0.2, 4000000, 77, &se);
  EXPECT_NEAR(collision_risk(g, {0.0, 0.15}, 0.2), mc, 4.0 * se + 1e-5);
  const double mc2 = monte_carlo(g, {1.5, 0.0}, 0.6, 4000000, 78, &se);
  EXPECT_NEAR(collision_risk(g, {1.5, 0.0}, 0.6), mc2, 4.0 * se + 1e-5);
}

TEST(Risk, RandomCovariancesMatchFineReference) {
  Rng rng(424242);
  for (int i = 0; i < 40; ++i) {
    Mat2 m{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Mat2 cov{m.a * m.a + m.b * m.b + 0.0025, m.a * m.c + m.b * m.d,
                   m.a * m.c + m.b * m.d, m.c * m.c + m.d * m.d + 0.0025};
    const Gaussian2D g{{rng.uniform(-2, 2), rng.uniform(-2, 2)}, cov};
    const Vec2 ego{rng.uniform(-4, 4), rng.uniform(-4, 4)};
    const double d = rng.uniform(0.1, 3.0);
    EXPECT_NEAR(collision_risk(g, ego, d), fine_reference(g, ego, d), 1e-4)
        << "case " << i;
  }
}

TEST(Risk, MonotoneInSafetyDistance) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Gaussian2D g{{rng.uniform(-1, 1), rng.uniform(-1, 1)},
                       Mat2::isotropic(rng.uniform(0.01, 0.5))};
    const Vec2 ego{rng.uniform(-3, 3), rng.uniform(-3, 3)};
    double prev = 0.0;
    for (double d = 0.2; d <= 4.0; d += 0.2) {
      const double r = collision_risk(g, ego, d);
      EXPECT_GE(r, prev - 1e-12);
      prev = r;
    }
  }
}

TEST(Risk, EdgeCases) {
  const Gaussian2D g{{0, 0}, Mat2::isotropic(1e-4)};
  EXPECT_DOUBLE_EQ(collision_risk(g, {1.0, 0.0}, 2.5), 1.0);   // spike well inside
  EXPECT_DOUBLE_EQ(collision_risk(g, {1.0, 0.0}, 0.5), 0.0);   // spike well outside
  EXPECT_DOUBLE_EQ(collision_risk(g, {5.0, 5.0}, 0.0), 0.0);   // zero radius
  const Gaussian2D wide{{0, 0}, Mat2::isotropic(1.0)};
  EXPECT_LT(collision_risk(wide, {50.0, 0.0}, 1.0), 1e-12);    // far field
  EXPECT_NEAR(collision_risk(wide, {0.0, 0.0}, 50.0), 1.0, 1e-12);
  const Gaussian2D point{{1.0, 1.0}, Mat2{0, 0, 0, 0}};
  EXPECT_DOUBLE_EQ(collision_risk(point, {1.2, 1.0}, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(collision_risk(point, {1.2, 1.0}, 0.1), 0.0);
  EXPECT_THROW(collision_risk(wide, {0, 0}, -1.0), std::runtime_error);
}

TEST(Risk, CombineRisksHandCases) {
  EXPECT_DOUBLE_EQ(combine_risks({}), 0.0);
  EXPECT_DOUBLE_EQ(combine_risks({0.1, 0.2}), 1.0 - 0.9 * 0.8);
  EXPECT_DOUBLE_EQ(combine_risks({1.0, 0.3}), 1.0);
  EXPECT_NEAR(combine_risks({1e-9, 1e-9, 1e-9}), 3e-9, 1e-16);
  EXPECT_THROW(combine_risks({1.5}), std::runtime_error);
  EXPECT_THROW(combine_risks({-0.2}), std::runtime_error);
}

}  // namespace
}  // namespace riskplan
