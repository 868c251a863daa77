#pragma once

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "prodisc/lattice.hpp"

namespace prodisc {

// Unbarred half of the decuple: lives on the n1-edge (n1,n2)-(n1+1,n2).
struct Unbarred {
  double alpha = kNaN, a = kNaN, b = kNaN, f = kNaN, g = kNaN;
};

// Barred half: lives on the n2-edge (n1,n2)-(n1,n2+1).
struct Barred {
  double alpha = kNaN, a = kNaN, b = kNaN, f = kNaN, g = kNaN;
};

struct GmcState {
  double alpha = kNaN, a = kNaN, b = kNaN, f = kNaN, g = kNaN;
  double alpha_bar = kNaN, a_bar = kNaN, b_bar = kNaN, f_bar = kNaN, g_bar = kNaN;

  double u() const { return f + g; }
  double v() const { return f - g; }
  double u_bar() const { return f_bar + g_bar; }
  double v_bar() const { return f_bar - g_bar; }
  double T() const { return a * b + g * g; }
  double T_bar() const { return a_bar * b_bar + g_bar * g_bar; }
  // Natural size of T and T-bar, used to make their vanishing relative.
  double T_scale() const { return std::abs(a * b) + g * g; }
  double T_bar_scale() const { return std::abs(a_bar * b_bar) + g_bar * g_bar; }

  bool has_unbarred() const { return finite(alpha) && finite(a) && finite(b) && finite(f) && finite(g); }
  bool has_barred() const {
    return finite(alpha_bar) && finite(a_bar) && finite(b_bar) && finite(f_bar) && finite(g_bar);
  }

  void set(const Unbarred& s) { alpha = s.alpha; a = s.a; b = s.b; f = s.f; g = s.g; }
  void set(const Barred& s) { alpha_bar = s.alpha; a_bar = s.a; b_bar = s.b; f_bar = s.f; g_bar = s.g; }
  Unbarred unbarred() const { return {alpha, a, b, f, g}; }
  Barred barred() const { return {alpha_bar, a_bar, b_bar, f_bar, g_bar}; }
};

using GmcLattice = Grid<GmcState>;

enum class MinimalClass { Generic, GodeauxRozetT0, GodeauxRozetTbar0, Demoulin, Tzitzeica, NonMinimal };

inline std::string to_string(MinimalClass c) {
  switch (c) {
    case MinimalClass::Generic: return "Generic";
    case MinimalClass::GodeauxRozetT0: return "GodeauxRozetT0";
    case MinimalClass::GodeauxRozetTbar0: return "GodeauxRozetTbar0";
    case MinimalClass::Demoulin: return "Demoulin";
    case MinimalClass::Tzitzeica: return "Tzitzeica";
    case MinimalClass::NonMinimal: return "NonMinimal";
  }
  return "?";
}

inline MinimalClass class_from_string(const std::string& s) {
  for (auto c : {MinimalClass::Generic, MinimalClass::GodeauxRozetT0, MinimalClass::GodeauxRozetTbar0,
                 MinimalClass::Demoulin, MinimalClass::Tzitzeica, MinimalClass::NonMinimal})
    if (to_string(c) == s) return c;
  throw config_error("SchemaError", "unknown class '" + s + "'");
}

inline constexpr double kGuard = 1e-12;

inline double w_of(const GmcState& s, int branch = 1) {
  double rad = 1.0 - s.a * s.a_bar / (s.alpha * s.alpha_bar);
  if (!(rad >= 0)) throw degeneracy("ComplexBranch", "1 - a*a_bar/(alpha*alpha_bar) = " + std::to_string(rad));
  double w = (branch < 0 ? -1.0 : 1.0) * std::sqrt(rad);
  if (std::abs(w) < kGuard) throw degeneracy("SingularW", "|w| below guard");
  return w;
}

struct StepResult {
  Unbarred up;    // state at (n1, n2+1)
  Barred right;   // state at (n1+1, n2)
};

// The part of the Gauss-Mainardi-Codazzi map fixed by the frame equations:
// everything except a at (n1,n2+1) and a_bar at (n1+1,n2).
inline StepResult step_open(const GmcState& s, int branch = 1) {
  if (std::abs(s.alpha) < kGuard || std::abs(s.alpha_bar) < kGuard)
    throw degeneracy("SingularAlpha", "|alpha| or |alpha_bar| below guard");
  double w = w_of(s, branch);
  StepResult r;
  r.up.alpha = w * s.alpha;
  r.up.f = (s.f - (s.a / s.alpha_bar) * s.g_bar) / w;
  r.up.g = (-s.g + (s.a / s.alpha_bar) * s.f_bar) / w;
  r.up.b = -s.a / (s.alpha_bar * s.alpha_bar * w);
  r.right.alpha = w * s.alpha_bar;
  r.right.f = (s.f_bar - (s.a_bar / s.alpha) * s.g) / w;
  r.right.g = (-s.g_bar + (s.a_bar / s.alpha) * s.f) / w;
  r.right.b = -s.a_bar / (s.alpha * s.alpha * w);
  if (std::abs(r.up.b) < kGuard || std::abs(r.right.b) < kGuard || !finite(r.up.b) || !finite(r.right.b))
    throw degeneracy("RuledDegeneracy", "b or b_bar vanished after update");
  return r;
}

inline void close_with_targets(StepResult& r, double T_target, double Tbar_target) {
  r.up.a = (T_target - r.up.g * r.up.g) / r.up.b;
  r.right.a = (Tbar_target - r.right.g * r.right.g) / r.right.b;
  if (!finite(r.up.a) || !finite(r.right.a)) throw degeneracy("RuledDegeneracy", "non-finite a after update");
  if (std::abs(r.up.a) < kGuard * (std::abs(T_target) + r.up.g * r.up.g) ||
      std::abs(r.right.a) < kGuard * (std::abs(Tbar_target) + r.right.g * r.right.g))
    throw degeneracy("RuledDegeneracy", "a or a_bar vanished after update");
}

// One application of the Gauss-Mainardi-Codazzi map, closed by prescribing
// T at (n1,n2+1) and T-bar at (n1+1,n2).
inline StepResult step(const GmcState& s, double T_target, double Tbar_target, int branch = 1) {
  StepResult r = step_open(s, branch);
  close_with_targets(r, T_target, Tbar_target);
  return r;
}

// Completes a step_open result at site (i,j) by choosing a and a_bar.
using Closure = std::function<void(int, int, const GmcState&, StepResult&)>;

inline GmcLattice evolve_with(const std::vector<Unbarred>& row, const std::vector<Barred>& col,
                              const Closure& closure, int branch) {
  const int n1 = static_cast<int>(row.size()), n2 = static_cast<int>(col.size());
  GmcLattice L(n1, n2);
  for (int i = 0; i < n1; ++i) L(i, 0).set(row[i]);
  for (int j = 0; j < n2; ++j) L(0, j).set(col[j]);
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      if (j + 1 >= n2 && i + 1 >= n1) continue;
      const GmcState& s = L(i, j);
      try {
        StepResult r = step_open(s, branch);
        closure(i, j, s, r);
        if (j + 1 < n2) L(i, j + 1).set(r.up);
        if (i + 1 < n1) L(i + 1, j).set(r.right);
      } catch (const Error& e) {
        throw at_site(e, i, j);
      }
    }
  return L;
}

inline void check_class_data(const std::vector<Unbarred>& row, const std::vector<Barred>& col,
                             bool zero_T, bool zero_Tbar, double tol) {
  if (zero_T)
    for (size_t i = 0; i < row.size(); ++i) {
      GmcState s;
      s.set(row[i]);
      if (std::abs(s.T()) > tol * s.T_scale())
        throw config_error("ClassMismatch", "T != 0 on the n1 axis at " + std::to_string(i));
    }
  if (zero_Tbar)
    for (size_t j = 0; j < col.size(); ++j) {
      GmcState s;
      s.set(col[j]);
      if (std::abs(s.T_bar()) > tol * s.T_bar_scale())
        throw config_error("ClassMismatch", "T_bar != 0 on the n2 axis at " + std::to_string(j));
    }
}

// Cauchy problem for the minimal classes. T is carried along n2 and T-bar
// along n1; classes with a vanishing invariant pin it to exactly zero.
inline GmcLattice evolve(const std::vector<Unbarred>& row, const std::vector<Barred>& col,
                         MinimalClass cls = MinimalClass::Generic, int branch = 1,
                         double tol = default_tol()) {
  if (row.empty() || col.empty()) throw config_error("BadDimensions", "empty Cauchy data");
  if (cls == MinimalClass::NonMinimal)
    throw config_error("NotMinimal", "no evolution closure for non-minimal nets");
  bool zT = cls == MinimalClass::Demoulin || cls == MinimalClass::Tzitzeica || cls == MinimalClass::GodeauxRozetT0;
  bool zTb = cls == MinimalClass::Demoulin || cls == MinimalClass::Tzitzeica || cls == MinimalClass::GodeauxRozetTbar0;
  check_class_data(row, col, zT, zTb, tol);
  return evolve_with(row, col, [zT, zTb](int, int, const GmcState& s, StepResult& r) {
    close_with_targets(r, zT ? 0.0 : s.T(), zTb ? 0.0 : s.T_bar());
  }, branch);
}

// Asymptotic net that is not projective minimal: T jumps by increment(i,j)
// across each n2-edge and T-bar follows from the single relation
// a_bar alpha_bar D2 T = a alpha D1 T_bar. Only used to exercise residual checks.
inline GmcLattice evolve_asymptotic(const std::vector<Unbarred>& row, const std::vector<Barred>& col,
                                    const std::function<double(int, int)>& increment, int branch = 1) {
  return evolve_with(row, col, [&increment](int i, int j, const GmcState& s, StepResult& r) {
    double d = increment(i, j);
    close_with_targets(r, s.T() + d, s.T_bar() + s.a_bar * s.alpha_bar * d / (s.a * s.alpha));
  }, branch);
}

// Cauchy data with magnitudes drawn from [0.5,1.5]. The sign pattern
// a>0, b<0, a_bar<0, b_bar>0 keeps 1 - a a_bar/(alpha alpha_bar) above 1, and
// the two scale factors keep the evolution bounded on 32x32 grids.
struct CauchyData {
  std::vector<Unbarred> row;
  std::vector<Barred> col;
};

inline CauchyData random_cauchy(int n1, int n2, uint64_t seed, double ab_scale = 0.2, double fg_scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  CauchyData d;
  for (int i = 0; i < n1; ++i) {
    Unbarred s;
    s.alpha = U(rng);
    s.a = ab_scale * U(rng);
    s.b = -ab_scale * U(rng);
    s.f = fg_scale * U(rng);
    s.g = fg_scale * U(rng);
    d.row.push_back(s);
  }
  for (int j = 0; j < n2; ++j) {
    Barred s;
    s.alpha = U(rng);
    s.a = -ab_scale * U(rng);
    s.b = ab_scale * U(rng);
    s.f = fg_scale * U(rng);
    s.g = fg_scale * U(rng);
    d.col.push_back(s);
  }
  return d;
}

// (a,b,g) -> lambda (a,b,g), (a_bar,b_bar,g_bar) -> (a_bar,b_bar,g_bar)/lambda.
inline GmcLattice scale_states(const GmcLattice& L, double lambda) {
  if (lambda == 0) throw config_error("ZeroLambda", "scaling parameter must be nonzero");
  GmcLattice out = L;
  for (auto& s : out.data()) {
    s.a *= lambda; s.b *= lambda; s.g *= lambda;
    s.a_bar /= lambda; s.b_bar /= lambda; s.g_bar /= lambda;
  }
  return out;
}

// Sparse transition matrices: F(n1+1) = L F and F(n2+1) = M F.
inline Mat4 frame_L(const GmcState& s, double lambda = 1.0) {
  Mat4 m = Mat4::Zero();
  m(0, 1) = 1.0 / s.alpha;
  m(1, 0) = -s.alpha;
  m(1, 1) = s.f + lambda * s.g;
  m(1, 3) = lambda * s.b;
  m(2, 3) = 1.0 / s.alpha;
  m(3, 1) = lambda * s.a;
  m(3, 2) = -s.alpha;
  m(3, 3) = s.f - lambda * s.g;
  return m;
}

inline Mat4 frame_M(const GmcState& s, double lambda = 1.0) {
  Mat4 m = Mat4::Zero();
  m(0, 2) = 1.0 / s.alpha_bar;
  m(1, 3) = 1.0 / s.alpha_bar;
  m(2, 0) = -s.alpha_bar;
  m(2, 2) = s.f_bar + s.g_bar / lambda;
  m(2, 3) = s.b_bar / lambda;
  m(3, 1) = -s.alpha_bar;
  m(3, 2) = s.a_bar / lambda;
  m(3, 3) = s.f_bar - s.g_bar / lambda;
  return m;
}

struct FrameField {
  Grid<Mat4> F;
  Grid<double> face;   // relative mismatch of the two paths around each face
  Stat path;
};

// Integrates down column n2=0 with the n1 matrices, then along n2 for every
// n1; the n1 matrices are re-applied on each face to measure path dependence.
template <class LFn, class MFn>
FrameField integrate_frames(int n1, int n2, const Mat4& seed, LFn Lm, MFn Mm) {
  FrameField out{Grid<Mat4>(n1, n2, Mat4::Zero()), Grid<double>(n1, n2, kNaN), {}};
  out.F(0, 0) = seed;
  for (int i = 0; i + 1 < n1; ++i) out.F(i + 1, 0) = Lm(i, 0) * out.F(i, 0);
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i < n1; ++i) out.F(i, j + 1) = Mm(i, j) * out.F(i, j);
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      const Mat4& ref = out.F(i + 1, j + 1);
      double r = (Lm(i, j + 1) * out.F(i, j + 1) - ref).norm() / ref.norm();
      out.face(i, j) = r;
      out.path.add(r, i, j);
    }
  return out;
}

inline FrameField build_frames(const GmcLattice& L, const Mat4& seed, double lambda = 1.0) {
  if (std::abs(seed.determinant()) < kGuard) throw degeneracy("SingularSeed", "det(seed) vanishes");
  return integrate_frames(L.n1(), L.n2(), seed,
                          [&](int i, int j) { return frame_L(L(i, j), lambda); },
                          [&](int i, int j) { return frame_M(L(i, j), lambda); });
}

// |det L - 1| and |det M - 1| over every site where the half-state exists.
inline Stat determinant_law(const GmcLattice& L, double lambda = 1.0) {
  Stat s;
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j) {
      const auto& x = L(i, j);
      if (x.has_unbarred()) s.add(frame_L(x, lambda).determinant() - 1.0, i, j);
      if (x.has_barred()) s.add(frame_M(x, lambda).determinant() - 1.0, i, j);
    }
  return s;
}

// Limits lambda -> infinity and lambda -> 0 of the frame equations.
inline Mat2 reduced_inf_n1(const GmcState& s) { Mat2 m; m << s.g, s.b, s.a, -s.g; return m; }
inline Mat2 reduced_inf_n2(const GmcState& s) { Mat2 m; m << 0, 1.0 / s.alpha_bar, -s.alpha_bar, s.f_bar; return m; }
inline Mat2 reduced_zero_n1(const GmcState& s) { Mat2 m; m << 0, 1.0 / s.alpha, -s.alpha, s.f; return m; }
inline Mat2 reduced_zero_n2(const GmcState& s) { Mat2 m; m << s.g_bar, s.b_bar, s.a_bar, -s.g_bar; return m; }

struct ReducedField {
  Grid<Vec2> rho;
  Stat path;
};

template <class AFn, class BFn>
ReducedField integrate_reduced(int n1, int n2, const Vec2& seed, AFn A, BFn B) {
  ReducedField out{Grid<Vec2>(n1, n2, Vec2::Zero()), {}};
  out.rho(0, 0) = seed;
  for (int i = 0; i + 1 < n1; ++i) out.rho(i + 1, 0) = A(i, 0) * out.rho(i, 0);
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i < n1; ++i) out.rho(i, j + 1) = B(i, j) * out.rho(i, j);
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      const Vec2& ref = out.rho(i + 1, j + 1);
      out.path.add((A(i, j + 1) * out.rho(i, j + 1) - ref).norm() / ref.norm(), i, j);
    }
  return out;
}

// (rho^1, rho^12) in the limit lambda -> infinity.
inline ReducedField reduced_system_inf(const GmcLattice& L, const Vec2& seed) {
  return integrate_reduced(L.n1(), L.n2(), seed, [&](int i, int j) { return reduced_inf_n1(L(i, j)); },
                           [&](int i, int j) { return reduced_inf_n2(L(i, j)); });
}

// (rho^2, rho^12) at lambda = 0.
inline ReducedField reduced_system_zero(const GmcLattice& L, const Vec2& seed) {
  return integrate_reduced(L.n1(), L.n2(), seed, [&](int i, int j) { return reduced_zero_n1(L(i, j)); },
                           [&](int i, int j) { return reduced_zero_n2(L(i, j)); });
}

struct MinimalityReport {
  Stat T_drift;      // |T(n1,n2) - T(n1,0)| / max(|ab| + g^2)
  Stat Tbar_drift;   // |T_bar(n1,n2) - T_bar(0,n2)|, same scaling
  Stat teqn;         // a_bar alpha_bar D2 T - a alpha D1 T_bar, relative
  Stat alpha_law;    // alpha alpha_bar_1 - alpha_bar alpha_2, relative
};

inline MinimalityReport minimality_report(const GmcLattice& L) {
  MinimalityReport r;
  double mT = 0, mTb = 0;
  for (const auto& s : L.data()) {
    if (s.has_unbarred()) mT = std::max(mT, s.T_scale());
    if (s.has_barred()) mTb = std::max(mTb, s.T_bar_scale());
  }
  double sT = mT > 0 ? mT : 1.0, sTb = mTb > 0 ? mTb : 1.0;
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j) {
      const auto& s = L(i, j);
      if (s.has_unbarred() && L(i, 0).has_unbarred()) r.T_drift.add((s.T() - L(i, 0).T()) / sT, i, j);
      if (s.has_barred() && L(0, j).has_barred()) r.Tbar_drift.add((s.T_bar() - L(0, j).T_bar()) / sTb, i, j);
      if (i + 1 < L.n1() && j + 1 < L.n2()) {
        const auto& up = L(i, j + 1);
        const auto& rt = L(i + 1, j);
        if (s.has_unbarred() && s.has_barred() && up.has_unbarred() && rt.has_barred()) {
          double lhs = s.a_bar * s.alpha_bar * (up.T() - s.T());
          double rhs = s.a * s.alpha * (rt.T_bar() - s.T_bar());
          double sc = std::abs(s.a_bar * s.alpha_bar) * (up.T_scale() + s.T_scale()) +
                      std::abs(s.a * s.alpha) * (rt.T_bar_scale() + s.T_bar_scale());
          r.teqn.add(sc > 0 ? (lhs - rhs) / sc : 0.0, i, j);
          double x = s.alpha * rt.alpha_bar, y = s.alpha_bar * up.alpha;
          r.alpha_law.add((x - y) / (std::abs(x) + std::abs(y)), i, j);
        }
      }
    }
  return r;
}

// (g/b)_12 (g_bar/b_bar)_1 - (g_bar/b_bar)_12 (g/b)_2 on every face, relative.
inline Stat tzitzeica_constraint(const GmcLattice& L) {
  Stat st;
  for (int i = 0; i + 1 < L.n1(); ++i)
    for (int j = 0; j + 1 < L.n2(); ++j) {
      const auto &s12 = L(i + 1, j + 1), &s1 = L(i + 1, j), &s2 = L(i, j + 1);
      if (!s12.has_unbarred() || !s12.has_barred() || !s1.has_barred() || !s2.has_unbarred()) continue;
      double x = (s12.g / s12.b) * (s1.g_bar / s1.b_bar);
      double y = (s12.g_bar / s12.b_bar) * (s2.g / s2.b);
      st.add((x - y) / (std::abs(x) + std::abs(y)), i, j);
    }
  return st;
}

inline MinimalClass classify(const GmcLattice& L, double tol = default_tol()) {
  auto rep = minimality_report(L);
  if (rep.T_drift.max > tol || rep.Tbar_drift.max > tol) return MinimalClass::NonMinimal;
  bool zT = true, zTb = true;
  for (const auto& s : L.data()) {
    if (s.has_unbarred() && std::abs(s.T()) > tol * s.T_scale()) zT = false;
    if (s.has_barred() && std::abs(s.T_bar()) > tol * s.T_bar_scale()) zTb = false;
  }
  if (zT && zTb) {
    auto c = tzitzeica_constraint(L);
    return (c.count > 0 && c.max <= tol) ? MinimalClass::Tzitzeica : MinimalClass::Demoulin;
  }
  if (zT) return MinimalClass::GodeauxRozetT0;
  if (zTb) return MinimalClass::GodeauxRozetTbar0;
  return MinimalClass::Generic;
}

}  // namespace prodisc
