#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "prodisc/error.hpp"

namespace prodisc {

using HPoint = Eigen::Vector4d;
using Plucker = Eigen::Matrix<double, 6, 1>;
using Mat4 = Eigen::Matrix4d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Relative tolerance used by every residual-zero assertion. PRODISC_TOL
// overrides the built-in 1e-9.
inline double default_tol() {
  if (const char* env = std::getenv("PRODISC_TOL")) {
    char* end = nullptr;
    double v = std::strtod(env, &end);
    if (end != env && v > 0 && std::isfinite(v)) return v;
  }
  return 1e-9;
}

// Dense row-major lattice: site (n1,n2) lives at n1 * n2_len + n2.
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(int n1, int n2, const T& fill = T()) : n1_(n1), n2_(n2), data_(checked_size(n1, n2), fill) {}

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  bool in(int i, int j) const { return i >= 0 && j >= 0 && i < n1_ && j < n2_; }

  T& operator()(int i, int j) { return data_[static_cast<size_t>(i) * n2_ + j]; }
  const T& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * n2_ + j]; }

  T& at(int i, int j) {
    if (!in(i, j)) throw std::out_of_range("grid index (" + std::to_string(i) + "," + std::to_string(j) + ")");
    return (*this)(i, j);
  }
  const T& at(int i, int j) const {
    if (!in(i, j)) throw std::out_of_range("grid index (" + std::to_string(i) + "," + std::to_string(j) + ")");
    return (*this)(i, j);
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

private:
  static size_t checked_size(int n1, int n2) {
    if (n1 < 1 || n2 < 1) throw config_error("BadDimensions", "grid dimensions must be positive");
    return static_cast<size_t>(n1) * static_cast<size_t>(n2);
  }

  int n1_ = 0, n2_ = 0;
  std::vector<T> data_;
};

// Max/mean accumulator for residual reports. NaN entries mark sites where a
// quantity is not defined and are skipped.
struct Stat {
  double max = 0.0;
  double sum = 0.0;
  long count = 0;
  int wi = -1, wj = -1;

  void add(double v, int i = -1, int j = -1) {
    if (std::isnan(v)) return;
    v = std::abs(v);
    sum += v;
    ++count;
    if (v > max || count == 1) { max = v; wi = i; wj = j; }
  }
  void merge(const Stat& o) {
    if (o.count == 0) return;
    sum += o.sum;
    count += o.count;
    if (o.max >= max) { max = o.max; wi = o.wi; wj = o.wj; }
  }
  double mean() const { return count ? sum / count : 0.0; }
};

inline bool finite(double x) { return std::isfinite(x); }

inline double max_abs(double x) { return std::abs(x); }
template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& x) { return x.cwiseAbs().maxCoeff(); }

inline double det4(const Mat4& m) { return m.determinant(); }

// Largest 2x2 minor of [x|y] relative to |x||y|: zero iff x and y are
// projectively equal.
inline double projective_distance(const HPoint& x, const HPoint& y) {
  double nx = x.norm(), ny = y.norm();
  if (nx == 0 || ny == 0) return 1.0;
  double m = 0;
  for (int i = 0; i < 4; ++i)
    for (int k = i + 1; k < 4; ++k) m = std::max(m, std::abs(x[i] * y[k] - x[k] * y[i]));
  return m / (nx * ny);
}

inline bool projectively_equal(const HPoint& x, const HPoint& y, double tol = default_tol()) {
  return projective_distance(x, y) <= tol;
}

// Same test for covectors of any length (tangent planes, Pluecker vectors).
template <class V>
double projective_distance_n(const V& x, const V& y) {
  double nx = x.norm(), ny = y.norm();
  if (nx == 0 || ny == 0) return 1.0;
  double m = 0;
  for (int i = 0; i < x.size(); ++i)
    for (int k = i + 1; k < x.size(); ++k) m = std::max(m, std::abs(x[i] * y[k] - x[k] * y[i]));
  return m / (nx * ny);
}

// Pluecker coordinates ordered (p01, p23, p02, p13, p03, p12).
inline Plucker wedge(const HPoint& a, const HPoint& b) {
  static const int idx[6][2] = {{0, 1}, {2, 3}, {0, 2}, {1, 3}, {0, 3}, {1, 2}};
  Plucker p;
  for (int k = 0; k < 6; ++k) p[k] = a[idx[k][0]] * b[idx[k][1]] - a[idx[k][1]] * b[idx[k][0]];
  return p;
}

// p01 p23 - p02 p13 + p03 p12.
inline double plucker_form(const Plucker& p) { return p[0] * p[1] - p[2] * p[3] + p[4] * p[5]; }

inline double plucker_residual(const Plucker& p) {
  double n2 = p.squaredNorm();
  return n2 == 0 ? 0.0 : std::abs(plucker_form(p)) / n2;
}

inline Plucker plucker_from_points(const HPoint& a, const HPoint& b, double tol = default_tol()) {
  if (a.norm() == 0 || b.norm() == 0 || projective_distance(a, b) <= tol)
    throw degeneracy("DegenerateLine", "points are projectively equal");
  return wedge(a, b);
}

inline double det4_normalized(const HPoint& a, const HPoint& b, const HPoint& c, const HPoint& d) {
  Mat4 m;
  m.row(0) = a.transpose();
  m.row(1) = b.transpose();
  m.row(2) = c.transpose();
  m.row(3) = d.transpose();
  double s = a.norm() * b.norm() * c.norm() * d.norm();
  return s == 0 ? kNaN : m.determinant() / s;
}

// Star planarity: |r,r1,r11,r12| and |r,r2,r22,r12| per site, NaN where the
// stencil leaves the grid.
inline Grid<std::pair<double, double>> asymptotic_residuals(const Grid<HPoint>& r) {
  bool first = r.n1() >= 3 && r.n2() >= 2;
  bool second = r.n1() >= 2 && r.n2() >= 3;
  if (!first && !second) throw config_error("GridTooSmall", "need at least 3x2 or 2x3 points");
  Grid<std::pair<double, double>> out(r.n1(), r.n2(), {kNaN, kNaN});
  for (int i = 0; i < r.n1(); ++i)
    for (int j = 0; j < r.n2(); ++j) {
      auto& o = out(i, j);
      if (i + 2 < r.n1() && j + 1 < r.n2())
        o.first = det4_normalized(r(i, j), r(i + 1, j), r(i + 2, j), r(i + 1, j + 1));
      if (i + 1 < r.n1() && j + 2 < r.n2())
        o.second = det4_normalized(r(i, j), r(i, j + 1), r(i, j + 2), r(i + 1, j + 1));
    }
  return out;
}

}  // namespace prodisc
