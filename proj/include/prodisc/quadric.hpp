#pragma once

#include <array>
#include <vector>

#include <Eigen/SVD>

#include "prodisc/gmc.hpp"

namespace prodisc {

// Extended-real label p/q; q = 0 is the generator at infinity.
struct Label {
  double p = 0.0, q = 1.0;

  Label() = default;
  Label(double value) : p(value), q(1.0) {}
  Label(double p_, double q_) : p(p_), q(q_) {}

  static Label infinity() { return {1.0, 0.0}; }
  bool is_infinite(double tol = 0.0) const { return std::abs(q) <= tol * std::abs(p); }
  double value() const { return q == 0 ? std::numeric_limits<double>::infinity() : p / q; }
  bool valid() const { return finite(p) && finite(q) && (p != 0 || q != 0); }

  Label normalized() const {
    double n = std::hypot(p, q);
    if (n == 0 || !finite(n)) return {kNaN, kNaN};
    double s = (q < 0 || (q == 0 && p < 0)) ? -1.0 : 1.0;
    return {s * p / n, s * q / n};
  }
};

inline Label nan_label() { return {kNaN, kNaN}; }

inline double label_distance(const Label& x, const Label& y) {
  double nx = std::hypot(x.p, x.q), ny = std::hypot(y.p, y.q);
  if (!(nx > 0) || !(ny > 0)) return kNaN;
  return std::abs(x.p * y.q - x.q * y.p) / (nx * ny);
}

// Rows of a frame matrix.
inline HPoint row_r(const Mat4& F) { return F.row(0).transpose(); }
inline HPoint row_r1(const Mat4& F) { return F.row(1).transpose(); }
inline HPoint row_r2(const Mat4& F) { return F.row(2).transpose(); }
inline HPoint row_r12(const Mat4& F) { return F.row(3).transpose(); }

// Q(mu,nu) = r12 + mu r1 + nu r2 + mu nu r, cleared of denominators.
inline HPoint quadric_point(const Mat4& F, const Label& mu, const Label& nu) {
  return mu.q * nu.q * row_r12(F) + mu.p * nu.q * row_r1(F) + mu.q * nu.p * row_r2(F) + mu.p * nu.p * row_r(F);
}

inline HPoint quadric_point(const Mat4& F, double mu, double nu) { return quadric_point(F, Label(mu), Label(nu)); }

// Tangent direction along the mu-parameter at Q(mu,nu): the p-derivative for
// |mu| <= 1, the q-derivative otherwise (so mu = infinity is covered).
inline HPoint quadric_tangent_mu(const Mat4& F, const Label& mu, const Label& nu) {
  HPoint dp = nu.q * row_r1(F) + nu.p * row_r(F);
  HPoint dq = nu.q * row_r12(F) + nu.p * row_r2(F);
  return std::abs(mu.q) >= std::abs(mu.p) ? dp : dq;
}

inline HPoint quadric_tangent_nu(const Mat4& F, const Label& mu, const Label& nu) {
  HPoint dp = mu.q * row_r2(F) + mu.p * row_r(F);
  HPoint dq = mu.q * row_r12(F) + mu.p * row_r1(F);
  return std::abs(nu.q) >= std::abs(nu.p) ? dp : dq;
}

struct LieQuadric {
  Mat4 frame;
  Mat4 S;   // symmetric, unit Frobenius norm, first nonzero entry positive
};

inline Mat4 implicit_matrix(const Mat4& F) {
  if (std::abs(F.determinant()) < kGuard * std::pow(F.norm(), 4))
    throw degeneracy("DegenerateQuadric", "singular frame");
  Eigen::Matrix<double, 16, 10> A;
  int row = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double mu = -1.5 + a, nu = -1.3 + b;
      HPoint x = quadric_point(F, mu, nu).normalized();
      int k = 0;
      for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) A(row, k++) = x[i] * x[j] * (i == j ? 1.0 : 2.0);
      ++row;
    }
  Eigen::JacobiSVD<Eigen::Matrix<double, 16, 10>> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int null = 0;
  for (int k = 0; k < 10; ++k) null += sv[k] <= 1e-10 * sv[0];
  if (null != 1) throw degeneracy("DegenerateQuadric", "nullspace dimension " + std::to_string(null));
  Eigen::Matrix<double, 10, 1> v = svd.matrixV().col(9);
  Mat4 S;
  int k = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) S(i, j) = S(j, i) = v[k++];
  S /= S.norm();
  for (int i = 0; i < 16; ++i) {
    double x = S(i / 4, i % 4);
    if (std::abs(x) > 1e-12) {
      if (x < 0) S = -S;
      break;
    }
  }
  return S;
}

inline LieQuadric make_quadric(const Mat4& F) { return {F, implicit_matrix(F)}; }

// |x^T S x| / |x|^2 for unit-norm S.
inline double quadric_membership(const LieQuadric& Q, const HPoint& x) {
  return std::abs(x.dot(Q.S * x)) / x.squaredNorm();
}

// Sine of the angle between two plane covectors, |a ^ b| / (|a||b|).
inline double plane_angle(const HPoint& a, const HPoint& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 1.0;
  return wedge(a, b).norm() / (na * nb);
}

// Points of the edge shared with the n1-neighbour (direction 1) or the
// n2-neighbour (direction 2): r12 + c r1, resp. r12 + c r2.
inline HPoint shared_edge_point(const Mat4& F, int direction, double c) {
  return row_r12(F) + c * (direction == 1 ? row_r1(F) : row_r2(F));
}

// Largest angle between the tangent planes of Q and its neighbour over
// sample points of the shared edge.
inline double c1_residual(const LieQuadric& Q, const LieQuadric& Qn, int direction = 1, int samples = 7) {
  double r = 0;
  for (int k = 0; k < samples; ++k) {
    double c = samples == 1 ? 0.0 : -2.0 + 4.0 * k / (samples - 1);
    HPoint P = shared_edge_point(Q.frame, direction, c);
    r = std::max(r, plane_angle(Q.S * P, Qn.S * P));
  }
  return r;
}

// Projective distance between the generator mu = c (direction 1) of Q on the
// shared edge and the generator with the same label on the neighbour.
inline double label_matching_residual(const Mat4& F, const Mat4& Fn, int direction, double c) {
  HPoint here = shared_edge_point(F, direction, c);
  HPoint there = direction == 1 ? HPoint(row_r2(Fn) + c * row_r(Fn)) : HPoint(row_r1(Fn) + c * row_r(Fn));
  return projective_distance(here, there);
}

// Real roots of b mu^2 - 2 g mu - a = 0 (direction 1) or the barred mirror.
// A discriminant within tol of zero gives one double root.
inline std::vector<double> common_generators(const GmcState& s, int direction = 1, double tol = default_tol()) {
  double a = direction == 1 ? s.a : s.a_bar;
  double b = direction == 1 ? s.b : s.b_bar;
  double g = direction == 1 ? s.g : s.g_bar;
  double T = a * b + g * g, scale = std::abs(a * b) + g * g;
  if (std::abs(T) <= tol * scale) return {g / b};
  if (T < 0) return {};
  double r = std::sqrt(T);
  double x = (g - r) / b, y = (g + r) / b;
  if (x > y) std::swap(x, y);
  return {x, y};
}

inline double neighbor_nu_map(const GmcState& s, double mu, double nu) {
  if (nu == 0) throw degeneracy("ZeroNu", "nu must be nonzero");
  return -s.alpha * (s.alpha / nu + s.b * mu + s.v());
}

// Largest |x^T S x| / |x|^2 over a grid of parameter samples.
inline double implicit_residual(const LieQuadric& Q, int samples = 5) {
  double r = 0;
  for (int a = 0; a < samples; ++a)
    for (int b = 0; b < samples; ++b) {
      double mu = -2.0 + 4.0 * a / std::max(1, samples - 1) + 0.1;
      double nu = -2.0 + 4.0 * b / std::max(1, samples - 1) - 0.2;
      r = std::max(r, quadric_membership(Q, quadric_point(Q.frame, mu, nu)));
    }
  return r;
}

}  // namespace prodisc
