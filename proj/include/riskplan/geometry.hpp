#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace riskplan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Symmetric 2x2 matrix stored row-major as [a b; b d]. The c slot is kept so
// raw row-major payloads [a,b,c,d] round-trip through files unchanged.
struct Mat2 {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 isotropic(double v) { return {v, 0.0, 0.0, v}; }

  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Vec2 operator*(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }

  Mat2 inverse() const {
    const double dt = det();
    if (std::abs(dt) < 1e-300) throw std::runtime_error("Mat2::inverse: singular matrix");
    const double inv = 1.0 / dt;
    return {d * inv, -b * inv, -c * inv, a * inv};
  }

  // Eigenvalues of the symmetrized matrix, ascending.
  void sym_eigenvalues(double& lo, double& hi) const {
    const double m = 0.5 * (a + d);
    const double off = 0.5 * (b + c);
    const double r = std::hypot(0.5 * (a - d), off);
    lo = m - r;
    hi = m + r;
  }

  bool is_symmetric(double tol = 1e-9) const { return std::abs(b - c) <= tol; }

  // Lower-triangular L with L*L^T equal to the symmetrized matrix. Handles
  // singular input exactly (a zero matrix factors to zero, so degenerate
  // Gaussians sample to their mean).
  void cholesky(double& l11, double& l21, double& l22) const {
    const double off = 0.5 * (b + c);
    if (a <= 0.0) {
      l11 = 0.0;
      l21 = 0.0;
      l22 = std::sqrt(std::max(d, 0.0));
      return;
    }
    l11 = std::sqrt(a);
    l21 = off / l11;
    l22 = std::sqrt(std::max(d - l21 * l21, 0.0));
  }
};

struct Gaussian2D {
  Vec2 mean;
  Mat2 cov;

  double log_pdf(const Vec2& p) const {
    const Mat2 inv = cov.inverse();
    const Vec2 r = p - mean;
    const double q = r.x * (inv.a * r.x + inv.b * r.y) + r.y * (inv.c * r.x + inv.d * r.y);
    const double dt = cov.det();
    if (dt <= 0.0) throw std::runtime_error("Gaussian2D::log_pdf: covariance not positive definite");
    return -std::log(2.0 * M_PI) - 0.5 * std::log(dt) - 0.5 * q;
  }
  double pdf(const Vec2& p) const { return std::exp(log_pdf(p)); }
};

// Axis-aligned rectangle, closed bounds.
struct Rect {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

  bool contains(const Vec2& p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }

  double distance_to(const Vec2& p) const {
    const double dx = std::max({x0 - p.x, 0.0, p.x - x1});
    const double dy = std::max({y0 - p.y, 0.0, p.y - y1});
    return std::hypot(dx, dy);
  }
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

}  // namespace riskplan
