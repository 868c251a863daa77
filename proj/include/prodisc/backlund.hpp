#pragma once

#include <array>
#include <complex>
#include <type_traits>

#include <unsupported/Eigen/Polynomials>

#include "prodisc/tzitzeica.hpp"

namespace prodisc {

// B on n2-edges (NaN on the last column), P on n1-edges (NaN on the last row).
struct BPFields {
  Grid<double> B, P;
};

inline BPFields bp_of(const DemLattice& L) {
  const int n1 = L.n1(), n2 = L.n2();
  BPFields out{Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN)};
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      const auto &s = L(i, j), &s2 = L(i, j + 1);
      double den = (s.H - 1) * (s2.K - 1) * s2.H;
      try {
        out.B(i, j) = guarded_div((s2.H - 1) * (s.K - 1) * s2.K * s.Q, den, 1.0, "(H-1)(K2-1)H2");
      } catch (const Error& e) {
        throw at_site(e, i, j);
      }
    }
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const auto &s = L(i, j), &s1 = L(i + 1, j);
      double den = (s1.H - 1) * (s.K - 1) * s1.K;
      try {
        out.P(i, j) = guarded_div((s.H - 1) * (s1.K - 1) * s1.H * s.A, den, 1.0, "(H1-1)(K-1)K1");
      } catch (const Error& e) {
        throw at_site(e, i, j);
      }
    }
  return out;
}

// P2 = (K1/H) P and B1 = (H2/K) B, relative.
inline Stat b1p2_residual(const DemLattice& L, const BPFields& bp) {
  Stat st;
  for (int i = 0; i + 1 < L.n1(); ++i)
    for (int j = 0; j + 1 < L.n2(); ++j) {
      const auto& s = L(i, j);
      double p2 = bp.P(i, j + 1), b1 = bp.B(i + 1, j);
      if (finite(p2)) st.add(rel_diff(p2, L(i + 1, j).K / s.H * bp.P(i, j)), i, j);
      if (finite(b1)) st.add(rel_diff(b1, L(i, j + 1).H / s.K * bp.B(i, j)), i, j);
    }
  return st;
}

// Scalar eigenfunctions and Pluecker 6-vectors share the sweep.
template <class V>
V nan_value() {
  if constexpr (std::is_arithmetic_v<V>) return kNaN;
  else return V::Constant(kNaN);
}

template <class V>
struct LiftField {
  Grid<V> phi, psi;
};

template <class V>
struct Psi12Residuals {
  std::array<double, 6> max{};   // second-order n1, n2, Moutard; then the psi mirrors
  double worst() const { return *std::max_element(max.begin(), max.end()); }
};

// Coefficient (1-H1)/((1-H)H1) of the second-order equations.
inline double second_order_coef(double H, double H1) { return (1 - H1) / ((1 - H) * H1); }

// The six linear equations at (i,j): each entry is lhs - rhs, or NaN-free
// skip when the stencil leaves the grid.
template <class V>
Psi12Residuals<V> psi12_residuals(const DemLattice& L, const BPFields& bp, double lambda, const LiftField<V>& f) {
  const int n1 = L.n1(), n2 = L.n2();
  const auto &F = f.phi, &P = f.psi;
  Psi12Residuals<V> r;
  double sc = 0;
  for (const auto& v : F.data()) sc = std::max(sc, max_abs(v));
  for (const auto& v : P.data()) sc = std::max(sc, max_abs(v));
  if (sc == 0) return r;
  auto bump = [&](int k, const V& v) { r.max[k] = std::max(r.max[k], max_abs(v) / sc); };
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const auto& s = L(i, j);
      if (i + 2 < n1 && j + 1 < n2) {
        double c = second_order_coef(s.H, L(i + 1, j).H);
        bump(0, F(i + 2, j) - (F(i + 1, j) + c * (F(i + 1, j) - F(i, j)) +
                               lambda * s.A / (s.K - 1) * (P(i + 1, j + 1) - P(i + 1, j))));
        c = second_order_coef(s.K, L(i + 1, j).K);
        bump(3, P(i + 2, j) - (P(i + 1, j) + c * (P(i + 1, j) - P(i, j)) +
                               lambda * bp.P(i, j) / (s.H - 1) * (F(i + 1, j + 1) - F(i + 1, j))));
      }
      if (j + 2 < n2 && i + 1 < n1) {
        double c = second_order_coef(s.H, L(i, j + 1).H);
        bump(1, F(i, j + 2) - (F(i, j + 1) + c * (F(i, j + 1) - F(i, j)) +
                               bp.B(i, j) / (lambda * (s.K - 1)) * (P(i + 1, j + 1) - P(i, j + 1))));
        c = second_order_coef(s.K, L(i, j + 1).K);
        bump(4, P(i, j + 2) - (P(i, j + 1) + c * (P(i, j + 1) - P(i, j)) +
                               s.Q / (lambda * (s.H - 1)) * (F(i + 1, j + 1) - F(i, j + 1))));
      }
      if (i + 1 < n1 && j + 1 < n2) {
        bump(2, F(i + 1, j + 1) - (s.H * (F(i + 1, j) + F(i, j + 1)) - F(i, j)));
        bump(5, P(i + 1, j + 1) - (s.K * (P(i + 1, j) + P(i, j + 1)) - P(i, j)));
      }
    }
  return r;
}

inline void check_psi12_denominators(const DemLattice& L) {
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j) {
      const auto& s = L(i, j);
      if (std::abs(s.H - 1) < kGuard || std::abs(s.K - 1) < kGuard || std::abs(s.H) < kGuard || std::abs(s.K) < kGuard)
        throw degeneracy("DenominatorBlowup", "H or K too close to 0 or 1", i, j);
    }
}

// Seeds at (0,0), (1,0), (0,1). Row n2 = 0 and column n1 = 0 advance by the
// second-order equations, everything else by the Moutard pair; the n1- and
// n2-equations off the axes are left as checks.
template <class V>
LiftField<V> psi12_propagate(const DemLattice& L, const BPFields& bp, double lambda, const std::array<V, 3>& phi_seed,
                             const std::array<V, 3>& psi_seed, double tol = default_tol()) {
  if (lambda == 0) throw config_error("ZeroLambda", "spectral parameter must be nonzero");
  const int n1 = L.n1(), n2 = L.n2();
  if (n1 < 2 || n2 < 2) throw config_error("GridTooSmall", "need at least 2x2 sites");
  check_psi12_denominators(L);
  LiftField<V> f{Grid<V>(n1, n2, nan_value<V>()), Grid<V>(n1, n2, nan_value<V>())};
  auto &F = f.phi, &P = f.psi;
  F(0, 0) = phi_seed[0];
  F(1, 0) = phi_seed[1];
  F(0, 1) = phi_seed[2];
  P(0, 0) = psi_seed[0];
  P(1, 0) = psi_seed[1];
  P(0, 1) = psi_seed[2];
  auto moutard = [&](int i, int j) {
    F(i + 1, j + 1) = L(i, j).H * (F(i + 1, j) + F(i, j + 1)) - F(i, j);
    P(i + 1, j + 1) = L(i, j).K * (P(i + 1, j) + P(i, j + 1)) - P(i, j);
  };
  moutard(0, 0);
  for (int i = 0; i + 2 < n1; ++i) {
    const auto& s = L(i, 0);
    double c = second_order_coef(s.H, L(i + 1, 0).H);
    F(i + 2, 0) = F(i + 1, 0) + c * (F(i + 1, 0) - F(i, 0)) + lambda * s.A / (s.K - 1) * (P(i + 1, 1) - P(i + 1, 0));
    c = second_order_coef(s.K, L(i + 1, 0).K);
    P(i + 2, 0) = P(i + 1, 0) + c * (P(i + 1, 0) - P(i, 0)) + lambda * bp.P(i, 0) / (s.H - 1) * (F(i + 1, 1) - F(i + 1, 0));
    moutard(i + 1, 0);
  }
  for (int j = 0; j + 2 < n2; ++j) {
    const auto& s = L(0, j);
    double c = second_order_coef(s.H, L(0, j + 1).H);
    F(0, j + 2) = F(0, j + 1) + c * (F(0, j + 1) - F(0, j)) + bp.B(0, j) / (lambda * (s.K - 1)) * (P(1, j + 1) - P(0, j + 1));
    c = second_order_coef(s.K, L(0, j + 1).K);
    P(0, j + 2) = P(0, j + 1) + c * (P(0, j + 1) - P(0, j)) + s.Q / (lambda * (s.H - 1)) * (F(1, j + 1) - F(0, j + 1));
    moutard(0, j + 1);
  }
  for (int j = 1; j + 1 < n2; ++j)
    for (int i = 1; i + 1 < n1; ++i) moutard(i, j);
  auto res = psi12_residuals(L, bp, lambda, f);
  if (!(res.worst() <= tol))
    throw Error(ErrorKind::Residual, "OverdeterminedInconsistency",
                "unused equations fail by " + std::to_string(res.worst()));
  return f;
}

// phi~ = (r1^r2 + r^r12)/2 and psi~ = (r2^r1 + r^r12)/2 from frame rows.
inline LiftField<Plucker> plucker_lift(const Grid<Mat4>& F) {
  LiftField<Plucker> out{Grid<Plucker>(F.n1(), F.n2()), Grid<Plucker>(F.n1(), F.n2())};
  for (int i = 0; i < F.n1(); ++i)
    for (int j = 0; j < F.n2(); ++j) {
      const Mat4& m = F(i, j);
      HPoint r = m.row(0).transpose(), r1 = m.row(1).transpose(), r2 = m.row(2).transpose(), r12 = m.row(3).transpose();
      out.phi(i, j) = 0.5 * (wedge(r1, r2) + wedge(r, r12));
      out.psi(i, j) = 0.5 * (wedge(r2, r1) + wedge(r, r12));
    }
  return out;
}

// The two halves are not decomposable: their Pluecker forms are +det F/4 and
// -det F/4. Deviation relative to the product of the row norms.
inline Stat lift_quadric_identity(const Grid<Mat4>& F, const LiftField<Plucker>& lift) {
  Stat st;
  for (int i = 0; i < F.n1(); ++i)
    for (int j = 0; j < F.n2(); ++j) {
      double d = F(i, j).determinant();
      double sc = F(i, j).rowwise().norm().prod();
      st.add((plucker_form(lift.phi(i, j)) - d / 4) / sc, i, j);
      st.add((plucker_form(lift.psi(i, j)) + d / 4) / sc, i, j);
    }
  return st;
}

// Frame, Pluecker lift, and the agreement of the lift with the psi12 sweep
// at lambda = 1 seeded from it.
struct LiftCheck {
  LiftField<Plucker> lift;
  Stat quadric;
  double sweep_mismatch = 0;
  Psi12Residuals<Plucker> residuals;
};

inline LiftCheck check_lift(const DemLattice& L, const BPFields& bp, const Grid<Mat4>& F) {
  LiftCheck out{plucker_lift(F), {}, 0, {}};
  out.quadric = lift_quadric_identity(F, out.lift);
  out.residuals = psi12_residuals(L, bp, 1.0, out.lift);
  const auto &a = out.lift.phi, &b = out.lift.psi;
  auto sw = psi12_propagate<Plucker>(L, bp, 1.0, {a(0, 0), a(1, 0), a(0, 1)}, {b(0, 0), b(1, 0), b(0, 1)},
                                     std::numeric_limits<double>::infinity());
  double sc = 0;
  for (int i = 0; i < F.n1(); ++i)
    for (int j = 0; j < F.n2(); ++j) {
      sc = std::max({sc, max_abs(a(i, j)), max_abs(b(i, j))});
      out.sweep_mismatch = std::max({out.sweep_mismatch, max_abs(sw.phi(i, j) - a(i, j)), max_abs(sw.psi(i, j) - b(i, j))});
    }
  out.sweep_mismatch /= sc;
  return out;
}

// phi^2 - H/(H-1) D1 phi D2 phi - psi^2 + K/(K-1) D1 psi D2 psi on each face,
// with the largest term alongside.
struct E73Field {
  Grid<double> value, scale;
  double spread = 0;   // (max - min) / largest term
};

inline E73Field e73_field(const DemLattice& L, const Grid<double>& phi, const Grid<double>& psi) {
  const int n1 = L.n1() - 1, n2 = L.n2() - 1;
  E73Field e{Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN), 0};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sc = 0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      double h = L(i, j).H / (L(i, j).H - 1), k = L(i, j).K / (L(i, j).K - 1);
      double t[4] = {phi(i, j) * phi(i, j), -h * (phi(i + 1, j) - phi(i, j)) * (phi(i, j + 1) - phi(i, j)),
                     -psi(i, j) * psi(i, j), k * (psi(i + 1, j) - psi(i, j)) * (psi(i, j + 1) - psi(i, j))};
      double v = t[0] + t[1] + t[2] + t[3];
      double s = std::max({std::abs(t[0]), std::abs(t[1]), std::abs(t[2]), std::abs(t[3])});
      e.value(i, j) = v;
      e.scale(i, j) = s;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sc = std::max(sc, s);
    }
  e.spread = sc == 0 ? 0.0 : (hi - lo) / sc;
  return e;
}

using ScalarFamily = std::function<std::pair<Grid<double>, Grid<double>>(double)>;

struct ConstraintSeed {
  Grid<double> phi, psi;
  double t = kNaN;
  double constant = kNaN;   // at the origin, relative to its largest term
  double spread = kNaN;
};

// Bisection in t on the admissibility constant at the origin; constancy over
// the grid is checked at both bracket ends first.
inline ConstraintSeed constraint_seed(const DemLattice& L, const ScalarFamily& family, double t_lo, double t_hi,
                                      double tol = default_tol()) {
  auto eval = [&](double t) {
    auto [phi, psi] = family(t);
    return std::make_tuple(e73_field(L, phi, psi), std::move(phi), std::move(psi));
  };
  auto [ea, pa, qa] = eval(t_lo);
  auto [eb, pb, qb] = eval(t_hi);
  for (const auto* e : {&ea, &eb})
    if (!(e->spread <= tol))
      throw degeneracy("NotConstant", "admissibility expression varies by " + std::to_string(e->spread));
  double fa = ea.value(0, 0), fb = eb.value(0, 0);
  if (fa == 0) return {pa, qa, t_lo, 0.0, ea.spread};
  if (fb == 0) return {pb, qb, t_hi, 0.0, eb.spread};
  if ((fa > 0) == (fb > 0)) throw degeneracy("NoRootInBracket", "admissibility constant has one sign on the bracket");
  double a = t_lo, b = t_hi;
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    double m = 0.5 * (a + b);
    double fm = std::get<0>(eval(m)).value(0, 0);
    if (fm == 0) {
      a = b = m;
      break;
    }
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  double t = 0.5 * (a + b);
  auto [e, phi, psi] = eval(t);
  return {std::move(phi), std::move(psi), t, e.value(0, 0) / e.scale(0, 0), e.spread};
}

// Plane waves rho^n1 sigma^n2 on a constant lattice with K = H (so B = Q and
// P = A); psi = r phi with r = +-1. rho solves
// (H rho^2 - (H+1) rho + 1)(rho - H) - H lambda0 r A rho (rho + 1) = 0 and
// sigma = (H rho - 1)/(rho - H) from the Moutard equation.
using Complex = std::complex<double>;

struct PlaneWave {
  Complex rho, sigma;
  int r = 1;
};

inline std::vector<PlaneWave> plane_wave_modes(double H, double A, double lambda0, int r) {
  Eigen::Vector4d c;   // ascending powers
  c << -H, (H * H + H + 1) - H * lambda0 * r * A, -(H * H + H + 1) - H * lambda0 * r * A, H;
  Eigen::PolynomialSolver<double, 3> solver(c);
  std::vector<PlaneWave> out;
  for (int k = 0; k < 3; ++k) {
    Complex x = solver.roots()[k];
    out.push_back({x, (H * x - 1.0) / (x - H), r});
  }
  return out;
}

struct PlaneWaveBasis {
  PlaneWave ep, em, cp, cm;   // real r=+1, real r=-1, complex r=+1, its reciprocal partner at r=-1
};

inline PlaneWaveBasis plane_wave_basis(double H, double A, double lambda0) {
  auto mp = plane_wave_modes(H, A, lambda0, 1), mm = plane_wave_modes(H, A, lambda0, -1);
  auto real = [](const std::vector<PlaneWave>& m) -> const PlaneWave* {
    for (const auto& w : m)
      if (std::abs(w.rho.imag()) < 1e-12) return &w;
    return nullptr;
  };
  const PlaneWave *ep = real(mp), *em = real(mm), *cp = nullptr, *cm = nullptr;
  for (const auto& w : mp)
    if (w.rho.imag() > 1e-12) cp = &w;
  if (cp)
    for (const auto& w : mm)
      if (std::abs(w.rho * cp->rho - 1.0) < 1e-9) cm = &w;
  if (!ep || !em || !cp || !cm) throw degeneracy("NoPlaneWave", "characteristic roots lack the expected structure");
  PlaneWaveBasis b{*ep, *em, *cp, *cm};
  b.ep.rho = b.ep.rho.real();
  b.em.rho = b.em.rho.real();
  return b;
}

// Re(Ep + 0.5 Em + t Cp + 0.7 Cm), psi with the r-multipliers.
inline ScalarFamily plane_wave_family(int n1, int n2, const PlaneWaveBasis& b) {
  return [=](double t) {
    Grid<double> phi(n1, n2), psi(n1, n2);
    const std::array<std::pair<PlaneWave, Complex>, 4> terms = {
        {{b.ep, 1.0}, {b.em, 0.5}, {b.cp, t}, {b.cm, 0.7}}};
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < n2; ++j) {
        Complex f = 0, p = 0;
        for (const auto& [w, k] : terms) {
          Complex e = k * std::pow(w.rho, i) * std::pow(w.sigma, j);
          f += e;
          p += static_cast<double>(w.r) * e;
        }
        phi(i, j) = f.real();
        psi(i, j) = p.real();
      }
    return std::make_pair(phi, psi);
  };
}

struct BTCoefficients {
  double c0, c1, c2, c3;
};

inline BTCoefficients bt_coefficients(double lambda, double lambda0) {
  if (lambda == 0 || lambda0 == 0) throw config_error("ZeroLambda", "spectral parameters must be nonzero");
  double d = lambda * lambda - lambda0 * lambda0;
  if (std::abs(d) <= kGuard * (lambda * lambda + lambda0 * lambda0))
    throw config_error("DegenerateLambda", "lambda must differ from +-lambda0");
  return {lambda0 * lambda0 / d, lambda0 * lambda / d, lambda * lambda / d, (lambda * lambda + lambda0 * lambda0) / d};
}

template <class V>
struct BilinearPotentials {
  Grid<V> S, T;          // closed form on (n1-1) x (n2-1)
  Grid<V> S_sum, T_sum;  // edge sums seeded with the closed form at the origin
  double closure = 0;    // largest edge-relation defect of the closed form
  double agreement = 0;  // closed form against the sums
};

// S and T from the closed form and from summing the edge relations
// D1 S = phi0 phi~_1 - phi0_1 phi~, D2 S = phi0_2 phi~ - phi0 phi~_2 (T alike).
template <class V>
BilinearPotentials<V> bilinear_potentials(const DemLattice& L, const Grid<double>& phi0, const Grid<double>& psi0,
                                          const LiftField<V>& lv, double lambda, double lambda0,
                                          double tol = default_tol()) {
  auto c = bt_coefficients(lambda, lambda0);
  const int n1 = L.n1() - 1, n2 = L.n2() - 1;
  if (n1 < 1 || n2 < 1) throw config_error("GridTooSmall", "need at least 2x2 sites");
  const auto &f = lv.phi, &p = lv.psi;
  BilinearPotentials<V> out{Grid<V>(n1, n2, nan_value<V>()), Grid<V>(n1, n2, nan_value<V>()),
                            Grid<V>(n1, n2, nan_value<V>()), Grid<V>(n1, n2, nan_value<V>()), 0, 0};
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      double h = L(i, j).H / (L(i, j).H - 1), k = L(i, j).K / (L(i, j).K - 1);
      double d1f0 = phi0(i + 1, j) - phi0(i, j), d2f0 = phi0(i, j + 1) - phi0(i, j);
      double d1p0 = psi0(i + 1, j) - psi0(i, j), d2p0 = psi0(i, j + 1) - psi0(i, j);
      V d1f = f(i + 1, j) - f(i, j), d2f = f(i, j + 1) - f(i, j);
      V d1p = p(i + 1, j) - p(i, j), d2p = p(i, j + 1) - p(i, j);
      out.S(i, j) = c.c3 * phi0(i, j) * f(i, j) - 2 * c.c1 * psi0(i, j) * p(i, j) -
                    h * (c.c2 * d1f0 * d2f + c.c0 * d2f0 * d1f) + k * c.c1 * (d1p0 * d2p + d2p0 * d1p);
      out.T(i, j) = c.c3 * psi0(i, j) * p(i, j) - 2 * c.c1 * phi0(i, j) * f(i, j) -
                    k * (c.c2 * d1p0 * d2p + c.c0 * d2p0 * d1p) + h * c.c1 * (d1f0 * d2f + d2f0 * d1f);
    }
  auto e1 = [&](const Grid<double>& o, const Grid<V>& v, int i, int j) -> V {
    return o(i, j) * v(i + 1, j) - o(i + 1, j) * v(i, j);
  };
  auto e2 = [&](const Grid<double>& o, const Grid<V>& v, int i, int j) -> V {
    return o(i, j + 1) * v(i, j) - o(i, j) * v(i, j + 1);
  };
  auto& Ss = out.S_sum;
  auto& Ts = out.T_sum;
  Ss(0, 0) = out.S(0, 0);
  Ts(0, 0) = out.T(0, 0);
  for (int i = 0; i + 1 < n1; ++i) {
    Ss(i + 1, 0) = Ss(i, 0) + e1(phi0, f, i, 0);
    Ts(i + 1, 0) = Ts(i, 0) + e1(psi0, p, i, 0);
  }
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      Ss(i, j + 1) = Ss(i, j) + e2(phi0, f, i, j);
      Ts(i, j + 1) = Ts(i, j) + e2(psi0, p, i, j);
    }
  double sc = 0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) sc = std::max({sc, max_abs(out.S(i, j)), max_abs(out.T(i, j))});
  if (sc == 0) sc = 1;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      out.agreement = std::max({out.agreement, max_abs(out.S(i, j) - Ss(i, j)) / sc, max_abs(out.T(i, j) - Ts(i, j)) / sc});
      if (i + 1 < n1)
        out.closure = std::max({out.closure, max_abs(out.S(i + 1, j) - out.S(i, j) - e1(phi0, f, i, j)) / sc,
                                max_abs(out.T(i + 1, j) - out.T(i, j) - e1(psi0, p, i, j)) / sc});
      if (j + 1 < n2)
        out.closure = std::max({out.closure, max_abs(out.S(i, j + 1) - out.S(i, j) - e2(phi0, f, i, j)) / sc,
                                max_abs(out.T(i, j + 1) - out.T(i, j) - e2(psi0, p, i, j)) / sc});
    }
  if (!(out.closure <= tol) || !(out.agreement <= tol))
    throw Error(ErrorKind::Residual, "PathInconsistency",
                "edge relations fail by " + std::to_string(std::max(out.closure, out.agreement)));
  return out;
}

template <class V>
struct BTResult {
  DemLattice L;   // primed lattice on (n1-1) x (n2-1)
  BPFields bp;    // primed B, P from the transformation rules
  LiftField<V> lift;
  DemResiduals dem;
  Stat bp_formula;   // primed B, P against bp_of of the primed lattice
  Stat b1p2;
  Psi12Residuals<V> psi12;
  double H_spread = 0;   // (max - min)/max |H'|, zero for a trivial transform
};

// Transformed lattice and lift. E73 must vanish at the origin to tol relative
// to its largest term.
template <class V>
BTResult<V> backlund_apply(const DemLattice& L, const BPFields& bp, const Grid<double>& phi0,
                           const Grid<double>& psi0, const BilinearPotentials<V>& pot, double lambda,
                           double tol = default_tol()) {
  const int n1 = L.n1(), n2 = L.n2();
  auto e = e73_field(L, phi0, psi0);
  double c0 = e.scale(0, 0) == 0 ? 0.0 : e.value(0, 0) / e.scale(0, 0);
  if (!(std::abs(c0) <= tol)) throw degeneracy("ConstraintViolated", "admissibility constant " + std::to_string(c0));
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      if (!(std::abs(phi0(i, j)) > 0) || !(std::abs(psi0(i, j)) > 0))
        throw degeneracy("ZeroEigenfunction", "phi0 or psi0 vanishes", i, j);
  const int m1 = n1 - 1, m2 = n2 - 1;
  const auto &f = phi0, &p = psi0;
  BTResult<V> out{DemLattice(m1, m2),
                  {Grid<double>(m1, m2, kNaN), Grid<double>(m1, m2, kNaN)},
                  {Grid<V>(m1, m2, nan_value<V>()), Grid<V>(m1, m2, nan_value<V>())},
                  {}, {}, {}, {}, 0};
  double hmin = std::numeric_limits<double>::infinity(), hmax = -hmin, habs = 0;
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m2; ++j) {
      auto& s = out.L(i, j);
      const auto& o = L(i, j);
      s.H = f(i + 1, j) * f(i, j + 1) / (f(i + 1, j + 1) * f(i, j)) * o.H;
      s.K = p(i + 1, j) * p(i, j + 1) / (p(i + 1, j + 1) * p(i, j)) * o.K;
      if (i + 1 < m1) {
        s.A = f(i + 1, j) * p(i + 1, j) / (f(i + 2, j) * p(i, j)) * o.A;
        out.bp.P(i, j) = p(i + 1, j) * f(i + 1, j) / (p(i + 2, j) * f(i, j)) * bp.P(i, j);
      }
      if (j + 1 < m2) {
        s.Q = p(i, j + 1) * f(i, j + 1) / (p(i, j + 2) * f(i, j)) * o.Q;
        out.bp.B(i, j) = f(i, j + 1) * p(i, j + 1) / (f(i, j + 2) * p(i, j)) * bp.B(i, j);
      }
      out.lift.phi(i, j) = pot.S(i, j) / f(i, j);
      out.lift.psi(i, j) = pot.T(i, j) / p(i, j);
      hmin = std::min(hmin, s.H);
      hmax = std::max(hmax, s.H);
      habs = std::max(habs, std::abs(s.H));
    }
  out.H_spread = habs == 0 ? 0.0 : (hmax - hmin) / habs;
  out.dem = dem_residuals(out.L);
  auto fresh = bp_of(out.L);
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m2; ++j) {
      if (finite(out.bp.B(i, j))) out.bp_formula.add(rel_diff(fresh.B(i, j), out.bp.B(i, j)), i, j);
      if (finite(out.bp.P(i, j))) out.bp_formula.add(rel_diff(fresh.P(i, j), out.bp.P(i, j)), i, j);
    }
  out.b1p2 = b1p2_residual(out.L, out.bp);
  out.psi12 = psi12_residuals(out.L, out.bp, lambda, out.lift);
  return out;
}

// Two-component potentials: H = t1 t2/(t12 t), K = s1 s2/(s12 s),
// A = t1 s1/(t11 s), P = s1 t1/(s11 t), B = t2 s2/(t22 s), Q = s2 t2/(s22 t).
struct TauSigmaField {
  Grid<double> tau, sigma;
};

inline double d2(double a, double b, double c, double d) { return a * d - b * c; }
inline double a2(double a, double b, double c, double d) { return std::abs(a * d) + std::abs(b * c); }

inline double perm3(double a, double b, double c, double d, double e, double f, double g, double h, double k) {
  a = std::abs(a), b = std::abs(b), c = std::abs(c), d = std::abs(d), e = std::abs(e);
  f = std::abs(f), g = std::abs(g), h = std::abs(h), k = std::abs(k);
  return a * (e * k + f * h) + b * (d * k + f * g) + c * (d * h + e * g);
}

struct TauSigmaReport {
  Stat recovery;   // all six parameters re-derived from tau, sigma
  Stat e77, e78;   // relative to the permanent of each product
};

// Two-component generalisation of the determinant identity and the
// constraints, per base site.
inline std::pair<double, double> e77_residual(const TauSigmaField& f, int i, int j, bool relative = true) {
  auto T = [&](int a, int b) { return f.tau(i + a, j + b); };
  auto S = [&](int a, int b) { return f.sigma(i + a, j + b); };
  double r1 = d2(S(0, 1), S(1, 1), S(0, 2), S(1, 2)) *
                  det3(T(0, 0), T(1, 0), T(2, 0), T(0, 1), T(1, 1), T(2, 1), T(0, 2), T(1, 2), T(2, 2)) +
              d2(T(0, 1), T(1, 1), T(0, 2), T(1, 2)) * S(1, 1) * S(1, 1) * T(1, 1);
  double r2 = d2(T(1, 0), T(2, 0), T(1, 1), T(2, 1)) *
                  det3(S(0, 0), S(0, 1), S(0, 2), S(1, 0), S(1, 1), S(1, 2), S(2, 0), S(2, 1), S(2, 2)) +
              d2(S(1, 0), S(2, 0), S(1, 1), S(2, 1)) * T(1, 1) * T(1, 1) * S(1, 1);
  if (!relative) return {r1, r2};
  double s1 = a2(S(0, 1), S(1, 1), S(0, 2), S(1, 2)) *
                  perm3(T(0, 0), T(1, 0), T(2, 0), T(0, 1), T(1, 1), T(2, 1), T(0, 2), T(1, 2), T(2, 2)) +
              a2(T(0, 1), T(1, 1), T(0, 2), T(1, 2)) * S(1, 1) * S(1, 1) * std::abs(T(1, 1));
  double s2 = a2(T(1, 0), T(2, 0), T(1, 1), T(2, 1)) *
                  perm3(S(0, 0), S(0, 1), S(0, 2), S(1, 0), S(1, 1), S(1, 2), S(2, 0), S(2, 1), S(2, 2)) +
              a2(S(1, 0), S(2, 0), S(1, 1), S(2, 1)) * T(1, 1) * T(1, 1) * std::abs(S(1, 1));
  return {r1 / s1, r2 / s2};
}

inline std::pair<double, double> e78_residual(const TauSigmaField& f, int i, int j, bool relative = true) {
  auto T = [&](int a, int b) { return f.tau(i + a, j + b); };
  auto S = [&](int a, int b) { return f.sigma(i + a, j + b); };
  double a = d2(T(0, 0), T(1, 0), T(0, 1), T(1, 1)), b = d2(S(0, 0), S(1, 0), S(0, 1), S(1, 1));
  double r1 = a * d2(S(0, 1), S(0, 2), S(1, 1), S(1, 2)) - b * d2(T(0, 1), T(0, 2), T(1, 1), T(1, 2));
  double r2 = a * d2(S(1, 0), S(2, 0), S(1, 1), S(2, 1)) - b * d2(T(1, 0), T(2, 0), T(1, 1), T(2, 1));
  if (!relative) return {r1, r2};
  double aa = a2(T(0, 0), T(1, 0), T(0, 1), T(1, 1)), bb = a2(S(0, 0), S(1, 0), S(0, 1), S(1, 1));
  double s1 = aa * a2(S(0, 1), S(0, 2), S(1, 1), S(1, 2)) + bb * a2(T(0, 1), T(0, 2), T(1, 1), T(1, 2));
  double s2 = aa * a2(S(1, 0), S(2, 0), S(1, 1), S(2, 1)) + bb * a2(T(1, 0), T(2, 0), T(1, 1), T(2, 1));
  return {r1 / s1, r2 / s2};
}

// Re-derives (H,K,A,P,B,Q) from tau, sigma; relative mismatch per entry.
inline Stat tau_sigma_recovery(const TauSigmaField& f, const DemLattice& L, const BPFields& bp) {
  Stat st;
  const auto &t = f.tau, &s = f.sigma;
  for (int i = 0; i < t.n1(); ++i)
    for (int j = 0; j < t.n2(); ++j) {
      if (i + 1 < t.n1() && j + 1 < t.n2()) {
        st.add(rel_diff(t(i + 1, j) * t(i, j + 1) / (t(i + 1, j + 1) * t(i, j)), L(i, j).H), i, j);
        st.add(rel_diff(s(i + 1, j) * s(i, j + 1) / (s(i + 1, j + 1) * s(i, j)), L(i, j).K), i, j);
      }
      if (i + 2 < t.n1()) {
        st.add(rel_diff(t(i + 1, j) * s(i + 1, j) / (t(i + 2, j) * s(i, j)), L(i, j).A), i, j);
        st.add(rel_diff(s(i + 1, j) * t(i + 1, j) / (s(i + 2, j) * t(i, j)), bp.P(i, j)), i, j);
      }
      if (j + 2 < t.n2()) {
        st.add(rel_diff(t(i, j + 1) * s(i, j + 1) / (t(i, j + 2) * s(i, j)), bp.B(i, j)), i, j);
        st.add(rel_diff(s(i, j + 1) * t(i, j + 1) / (s(i, j + 2) * t(i, j)), L(i, j).Q), i, j);
      }
    }
  return st;
}

inline TauSigmaReport tau_sigma_report(const TauSigmaField& f, const DemLattice& L, const BPFields& bp) {
  TauSigmaReport r;
  r.recovery = tau_sigma_recovery(f, L, bp);
  for (int i = 0; i + 2 < f.tau.n1(); ++i)
    for (int j = 0; j + 2 < f.tau.n2(); ++j) {
      auto [a, b] = e77_residual(f, i, j);
      r.e77.add(a, i, j);
      r.e77.add(b, i, j);
      auto [c, d] = e78_residual(f, i, j);
      r.e78.add(c, i, j);
      r.e78.add(d, i, j);
    }
  return r;
}

// tau, sigma from three seeds each: the A/P rules along n2 = 0, the B/Q rules
// along n1 = 0, the H/K rules elsewhere.
inline TauSigmaField tau_sigma_layer(const DemLattice& L, const BPFields& bp, const std::array<double, 3>& tau_seed,
                                     const std::array<double, 3>& sigma_seed, double tol = default_tol()) {
  const int n1 = L.n1(), n2 = L.n2();
  if (n1 < 2 || n2 < 2) throw config_error("GridTooSmall", "need at least 2x2 sites");
  for (double v : tau_seed)
    if (v == 0) throw degeneracy("ZeroTau", "tau seeds must be nonzero");
  for (double v : sigma_seed)
    if (v == 0) throw degeneracy("ZeroTau", "sigma seeds must be nonzero");
  TauSigmaField f{Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN)};
  auto &t = f.tau, &s = f.sigma;
  t(0, 0) = tau_seed[0], t(1, 0) = tau_seed[1], t(0, 1) = tau_seed[2];
  s(0, 0) = sigma_seed[0], s(1, 0) = sigma_seed[1], s(0, 1) = sigma_seed[2];
  auto nz = [](double v, int i, int j) {
    if (v == 0 || !finite(v)) throw at_site(degeneracy("ZeroTau", "potential vanished"), i, j);
    return v;
  };
  for (int i = 0; i + 2 < n1; ++i) {
    if (L(i, 0).A == 0 || bp.P(i, 0) == 0) throw at_site(degeneracy("DenominatorBlowup", "A or P = 0"), i, 0);
    t(i + 2, 0) = nz(t(i + 1, 0) * s(i + 1, 0) / (L(i, 0).A * s(i, 0)), i + 2, 0);
    s(i + 2, 0) = nz(s(i + 1, 0) * t(i + 1, 0) / (bp.P(i, 0) * t(i, 0)), i + 2, 0);
  }
  for (int j = 0; j + 2 < n2; ++j) {
    if (L(0, j).Q == 0 || bp.B(0, j) == 0) throw at_site(degeneracy("DenominatorBlowup", "B or Q = 0"), 0, j);
    t(0, j + 2) = nz(t(0, j + 1) * s(0, j + 1) / (bp.B(0, j) * s(0, j)), 0, j + 2);
    s(0, j + 2) = nz(s(0, j + 1) * t(0, j + 1) / (L(0, j).Q * t(0, j)), 0, j + 2);
  }
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i) {
      t(i + 1, j + 1) = nz(t(i + 1, j) * t(i, j + 1) / (L(i, j).H * t(i, j)), i + 1, j + 1);
      s(i + 1, j + 1) = nz(s(i + 1, j) * s(i, j + 1) / (L(i, j).K * s(i, j)), i + 1, j + 1);
    }
  auto rec = tau_sigma_recovery(f, L, bp);
  if (!(rec.max <= tol))
    throw Error(ErrorKind::Residual, "InconsistentRecurrences",
                "potentials miss the lattice by " + std::to_string(rec.max));
  return f;
}

// tau' = phi0 tau, sigma' = psi0 sigma on the primed domain.
inline TauSigmaField tau_sigma_transform(const TauSigmaField& f, const Grid<double>& phi0, const Grid<double>& psi0,
                                         int m1, int m2) {
  TauSigmaField g{Grid<double>(m1, m2, kNaN), Grid<double>(m1, m2, kNaN)};
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m2; ++j) {
      g.tau(i, j) = phi0(i, j) * f.tau(i, j);
      g.sigma(i, j) = psi0(i, j) * f.sigma(i, j);
    }
  return g;
}

}  // namespace prodisc
