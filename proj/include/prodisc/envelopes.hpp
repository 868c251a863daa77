#pragma once

#include <array>
#include <optional>

#include "prodisc/quadric.hpp"

namespace prodisc {

// Discrete Riccati maps on homogeneous labels. first = n1-shift, second = n2-shift.
inline std::pair<Label, Label> riccati_mu(const GmcState& s, const Label& mu) {
  Label m1{s.g * mu.p + s.a * mu.q, s.b * mu.p - s.g * mu.q};
  Label m2{-s.alpha_bar * s.alpha_bar * mu.q - s.alpha_bar * s.f_bar * mu.p, mu.p};
  return {m1.normalized(), m2.normalized()};
}

inline std::pair<Label, Label> riccati_nu(const GmcState& s, const Label& nu) {
  Label n1{-s.alpha * s.alpha * nu.q - s.alpha * s.f * nu.p, nu.p};
  Label n2{s.g_bar * nu.p + s.a_bar * nu.q, s.b_bar * nu.p - s.g_bar * nu.q};
  return {n1.normalized(), n2.normalized()};
}

// Finite-valued forms with the error contract of the scalar equations.
inline std::pair<double, double> riccati_mu(const GmcState& s, double mu, double tol = default_tol()) {
  if (std::abs(s.T()) <= tol * s.T_scale())
    throw degeneracy("NotApplicable", "T = 0: the n1-map collapses onto g/b");
  if (mu == 0) throw degeneracy("ZeroMu", "mu must be nonzero");
  double den = s.b * mu - s.g;
  if (den == 0) throw degeneracy("RiccatiPole", "b mu = g");
  return {(s.g * mu + s.a) / den, -s.alpha_bar * s.alpha_bar / mu - s.alpha_bar * s.f_bar};
}

inline std::pair<double, double> riccati_nu(const GmcState& s, double nu, double tol = default_tol()) {
  if (std::abs(s.T_bar()) <= tol * s.T_bar_scale())
    throw degeneracy("NotApplicable", "T_bar = 0: the n2-map collapses onto g_bar/b_bar");
  if (nu == 0) throw degeneracy("ZeroNu", "nu must be nonzero");
  double den = s.b_bar * nu - s.g_bar;
  if (den == 0) throw degeneracy("RiccatiPole", "b_bar nu = g_bar");
  return {-s.alpha * s.alpha / nu - s.alpha * s.f, (s.g_bar * nu + s.a_bar) / den};
}

struct EnvelopeField {
  Grid<Label> mu, nu;
  Grid<HPoint> points;   // NaN where a label is undefined
  std::vector<std::pair<int, int>> poles;   // sites where a label reached infinity
};

inline bool defined(const Label& l) { return finite(l.p) && finite(l.q); }

inline EnvelopeField envelope_points(const Grid<Mat4>& F, Grid<Label> mu, Grid<Label> nu) {
  EnvelopeField e{std::move(mu), std::move(nu), Grid<HPoint>(F.n1(), F.n2(), HPoint::Constant(kNaN)), {}};
  for (int i = 0; i < F.n1(); ++i)
    for (int j = 0; j < F.n2(); ++j) {
      const Label &m = e.mu(i, j), &n = e.nu(i, j);
      if (!defined(m) || !defined(n)) continue;
      if (m.is_infinite(1e-14) || n.is_infinite(1e-14)) e.poles.emplace_back(i, j);
      e.points(i, j) = quadric_point(F(i, j), m, n);
    }
  return e;
}

// Label sweep in the order of the frame integration: down column 0 with the
// n1-map, then along n2 for every n1.
template <class Map>
Grid<Label> sweep_labels(const GmcLattice& L, const Label& seed, Map map) {
  Grid<Label> out(L.n1(), L.n2(), nan_label());
  out(0, 0) = seed.normalized();
  for (int i = 0; i + 1 < L.n1(); ++i) out(i + 1, 0) = map(L(i, 0), out(i, 0)).first;
  for (int j = 0; j + 1 < L.n2(); ++j)
    for (int i = 0; i < L.n1(); ++i) out(i, j + 1) = map(L(i, j), out(i, j)).second;
  return out;
}

// Path independence of a label sweep: the n1-map re-applied on each face.
template <class Map>
Stat label_compatibility(const GmcLattice& L, const Grid<Label>& labels, Map map) {
  Stat st;
  for (int i = 0; i + 1 < L.n1(); ++i)
    for (int j = 0; j + 1 < L.n2(); ++j)
      st.add(label_distance(map(L(i, j + 1), labels(i, j + 1)).first, labels(i + 1, j + 1)), i, j);
  return st;
}

inline Stat mu_compatibility(const GmcLattice& L, const Grid<Label>& mu) {
  return label_compatibility(L, mu, [](const GmcState& s, const Label& l) { return riccati_mu(s, l); });
}
inline Stat nu_compatibility(const GmcLattice& L, const Grid<Label>& nu) {
  return label_compatibility(L, nu, [](const GmcState& s, const Label& l) { return riccati_nu(s, l); });
}

inline EnvelopeField build_envelope_generic(const GmcLattice& L, const Grid<Mat4>& F, const Label& mu0,
                                            const Label& nu0, double tol = default_tol()) {
  auto cls = classify(L, tol);
  if (cls != MinimalClass::Generic)
    throw degeneracy("NotApplicable", "generic envelopes need a Generic lattice, got " + to_string(cls));
  auto mu = sweep_labels(L, mu0, [](const GmcState& s, const Label& l) { return riccati_mu(s, l); });
  auto nu = sweep_labels(L, nu0, [](const GmcState& s, const Label& l) { return riccati_nu(s, l); });
  return envelope_points(F, std::move(mu), std::move(nu));
}

// Labels read off the reduced linear systems: mu = -rho12/rho1 at
// lambda -> infinity and nu = -rho12/rho2 at lambda = 0, seeded compatibly.
struct LinearLabels {
  Grid<Label> mu, nu;
};

inline LinearLabels labels_from_linear(const GmcLattice& L, const Label& mu0, const Label& nu0) {
  auto ri = reduced_system_inf(L, Vec2(mu0.q, -mu0.p));
  auto rz = reduced_system_zero(L, Vec2(nu0.q, -nu0.p));
  LinearLabels out{Grid<Label>(L.n1(), L.n2()), Grid<Label>(L.n1(), L.n2())};
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j) {
      out.mu(i, j) = Label(-ri.rho(i, j)[1], ri.rho(i, j)[0]).normalized();
      out.nu(i, j) = Label(-rz.rho(i, j)[1], rz.rho(i, j)[0]).normalized();
    }
  return out;
}

inline Stat linear_riccati_agreement(const GmcLattice& L, const EnvelopeField& env) {
  auto lin = labels_from_linear(L, env.mu(0, 0), env.nu(0, 0));
  Stat st;
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j) {
      st.add(label_distance(lin.mu(i, j), env.mu(i, j)), i, j);
      st.add(label_distance(lin.nu(i, j), env.nu(i, j)), i, j);
    }
  return st;
}

struct TangencyReport {
  Grid<double> det_n1_here, det_n1_there;   // |w, w1, d_mu w, d_nu w| and the same with w1's tangents
  Grid<double> det_n2_here, det_n2_there;
  Grid<double> factored_n1_a, factored_n1_b;   // (mu1-mu)(nu1+alpha^2/nu+alpha f), (mu-g/b)(mu1-g/b)-T/b^2
  Grid<double> factored_n2_a, factored_n2_b;
  Stat det, factored;
};

inline TangencyReport tangency_residuals(const GmcLattice& L, const Grid<Mat4>& F, const EnvelopeField& e) {
  const int n1 = L.n1(), n2 = L.n2();
  TangencyReport r{Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN),
                   Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN),
                   Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN), {}, {}};
  auto excluded = [&](int i, int j) {
    const Label &m = e.mu(i, j), &n = e.nu(i, j);
    // a vertex on an edge of the quadrilateral (mu or nu = 0) is excluded
    return !defined(m) || !defined(n) || std::abs(m.p) < 1e-14 || std::abs(n.p) < 1e-14;
  };
  auto dets = [&](int i, int j, int k, int l, double& here, double& there) {
    const HPoint& w = e.points(i, j);
    const HPoint& w1 = e.points(k, l);
    here = det4_normalized(w, w1, quadric_tangent_mu(F(i, j), e.mu(i, j), e.nu(i, j)),
                           quadric_tangent_nu(F(i, j), e.mu(i, j), e.nu(i, j)));
    there = det4_normalized(w, w1, quadric_tangent_mu(F(k, l), e.mu(k, l), e.nu(k, l)),
                            quadric_tangent_nu(F(k, l), e.mu(k, l), e.nu(k, l)));
  };
  auto rel = [](double v, double scale) { return scale > 0 ? v / scale : v; };
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      if (excluded(i, j)) continue;
      const GmcState& s = L(i, j);
      if (i + 1 < n1 && !excluded(i + 1, j)) {
        dets(i, j, i + 1, j, r.det_n1_here(i, j), r.det_n1_there(i, j));
        r.det.add(r.det_n1_here(i, j), i, j);
        r.det.add(r.det_n1_there(i, j), i, j);
        double mu = e.mu(i, j).value(), nu = e.nu(i, j).value();
        double mu1 = e.mu(i + 1, j).value(), nu1 = e.nu(i + 1, j).value();
        if (finite(mu) && finite(nu) && finite(mu1) && finite(nu1) && s.has_unbarred()) {
          double c = s.g / s.b;
          double x = s.alpha * s.alpha / nu + s.alpha * s.f;
          r.factored_n1_a(i, j) = rel((mu1 - mu) * (nu1 + x),
                                      (std::abs(mu1) + std::abs(mu)) * (std::abs(nu1) + std::abs(x)));
          r.factored_n1_b(i, j) = rel((mu - c) * (mu1 - c) - s.T() / (s.b * s.b),
                                      (std::abs(mu) + std::abs(c)) * (std::abs(mu1) + std::abs(c)) +
                                          s.T_scale() / (s.b * s.b));
          r.factored.add(r.factored_n1_a(i, j), i, j);
          r.factored.add(r.factored_n1_b(i, j), i, j);
        }
      }
      if (j + 1 < n2 && !excluded(i, j + 1)) {
        dets(i, j, i, j + 1, r.det_n2_here(i, j), r.det_n2_there(i, j));
        r.det.add(r.det_n2_here(i, j), i, j);
        r.det.add(r.det_n2_there(i, j), i, j);
        double mu = e.mu(i, j).value(), nu = e.nu(i, j).value();
        double mu2 = e.mu(i, j + 1).value(), nu2 = e.nu(i, j + 1).value();
        if (finite(mu) && finite(nu) && finite(mu2) && finite(nu2) && s.has_barred()) {
          double c = s.g_bar / s.b_bar;
          double x = s.alpha_bar * s.alpha_bar / mu + s.alpha_bar * s.f_bar;
          r.factored_n2_a(i, j) = rel((nu2 - nu) * (mu2 + x),
                                      (std::abs(nu2) + std::abs(nu)) * (std::abs(mu2) + std::abs(x)));
          r.factored_n2_b(i, j) = rel((nu - c) * (nu2 - c) - s.T_bar() / (s.b_bar * s.b_bar),
                                      (std::abs(nu) + std::abs(c)) * (std::abs(nu2) + std::abs(c)) +
                                          s.T_bar_scale() / (s.b_bar * s.b_bar));
          r.factored.add(r.factored_n2_a(i, j), i, j);
          r.factored.add(r.factored_n2_b(i, j), i, j);
        }
      }
    }
  return r;
}

// g/b at every site with an unbarred state, and g_bar/b_bar likewise.
inline Grid<Label> common_mu(const GmcLattice& L) {
  Grid<Label> out(L.n1(), L.n2(), nan_label());
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j)
      if (L(i, j).has_unbarred()) out(i, j) = Label(L(i, j).g, L(i, j).b).normalized();
  return out;
}

inline Grid<Label> common_nu(const GmcLattice& L) {
  Grid<Label> out(L.n1(), L.n2(), nan_label());
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j)
      if (L(i, j).has_barred()) out(i, j) = Label(L(i, j).g_bar, L(i, j).b_bar).normalized();
  return out;
}

// Shift by one step in direction 1 or 2: out(i,j) = in(i-1,j) resp. in(i,j-1).
inline Grid<Label> shifted_back(const Grid<Label>& in, int direction) {
  Grid<Label> out(in.n1(), in.n2(), nan_label());
  for (int i = 0; i < in.n1(); ++i)
    for (int j = 0; j < in.n2(); ++j) {
      int pi = direction == 1 ? i - 1 : i, pj = direction == 2 ? j - 1 : j;
      if (in.in(pi, pj)) out(i, j) = in(pi, pj);
    }
  return out;
}

// Largest projective distance between field a at (i,j)+shift and field b at (i,j).
inline Stat shift_coincidence(const EnvelopeField& a, const EnvelopeField& b, int direction) {
  Stat st;
  int di = direction == 1, dj = direction == 2;
  for (int i = 0; i + di < a.points.n1(); ++i)
    for (int j = 0; j + dj < a.points.n2(); ++j) {
      const HPoint &x = a.points(i + di, j + dj), &y = b.points(i, j);
      if (!x.allFinite() || !y.allFinite()) continue;
      st.add(projective_distance(x, y), i, j);
    }
  return st;
}

struct GrEnvelopes {
  EnvelopeField shifted;     // mu(n1,n2) = (g/b)(n1-1,n2), defined from n1 = 1
  EnvelopeField unshifted;   // mu = g/b
  int direction = 1;         // the coincidence shift
  Stat coincidence;
};

// Two envelope types of a Godeaux-Rozet lattice. With T = 0 the free label is
// nu (seed nu0) and mu is the common generator; the T_bar = 0 case mirrors it.
inline GrEnvelopes build_envelopes_gr(const GmcLattice& L, const Grid<Mat4>& F, const Label& free0,
                                      double tol = default_tol()) {
  auto cls = classify(L, tol);
  GrEnvelopes out;
  if (cls == MinimalClass::GodeauxRozetT0) {
    auto nu = sweep_labels(L, free0, [](const GmcState& s, const Label& l) { return riccati_nu(s, l); });
    auto mut = common_mu(L);
    out.unshifted = envelope_points(F, mut, nu);
    out.shifted = envelope_points(F, shifted_back(mut, 1), nu);
    out.direction = 1;
  } else if (cls == MinimalClass::GodeauxRozetTbar0) {
    auto mu = sweep_labels(L, free0, [](const GmcState& s, const Label& l) { return riccati_mu(s, l); });
    auto nut = common_nu(L);
    out.unshifted = envelope_points(F, mu, nut);
    out.shifted = envelope_points(F, mu, shifted_back(nut, 2));
    out.direction = 2;
  } else {
    throw degeneracy("NotApplicable", "Godeaux-Rozet envelopes need T = 0 or T_bar = 0, got " + to_string(cls));
  }
  out.coincidence = shift_coincidence(out.shifted, out.unshifted, out.direction);
  return out;
}

struct DemoulinEnvelopes {
  // fields[2*ms + ns]: ms = mu shifted back along n1, ns = nu shifted back along n2
  std::array<EnvelopeField, 4> fields;
  Stat coincidence;
};

inline DemoulinEnvelopes build_envelopes_demoulin(const GmcLattice& L, const Grid<Mat4>& F,
                                                  double tol = default_tol()) {
  auto cls = classify(L, tol);
  if (cls != MinimalClass::Demoulin && cls != MinimalClass::Tzitzeica)
    throw degeneracy("NotApplicable", "Demoulin envelopes need T = T_bar = 0, got " + to_string(cls));
  auto mut = common_mu(L), nut = common_nu(L);
  std::array<Grid<Label>, 2> mus{mut, shifted_back(mut, 1)}, nus{nut, shifted_back(nut, 2)};
  DemoulinEnvelopes out;
  for (int ms = 0; ms < 2; ++ms)
    for (int ns = 0; ns < 2; ++ns) out.fields[2 * ms + ns] = envelope_points(F, mus[ms], nus[ns]);
  for (int ns = 0; ns < 2; ++ns) out.coincidence.merge(shift_coincidence(out.fields[2 + ns], out.fields[ns], 1));
  for (int ms = 0; ms < 2; ++ms)
    out.coincidence.merge(shift_coincidence(out.fields[2 * ms + 1], out.fields[2 * ms], 2));
  return out;
}

struct QRuling {
  std::vector<double> m;   // over n2
  std::vector<double> n;   // over n1; empty for a semi-Q ruling
};

struct QSurfaceReport {
  Grid<double> e33, e35;
  Stat mu_roots, nu_roots, straight_n1, straight_n2;
};

// Rank defect of three points: largest 3x3 minor of [x|y|z] over |x||y||z|.
inline double collinearity(const HPoint& x, const HPoint& y, const HPoint& z) {
  double s = x.norm() * y.norm() * z.norm();
  if (s == 0) return kNaN;
  double m = 0;
  for (int drop = 0; drop < 4; ++drop) {
    Eigen::Matrix3d A;
    int r = 0;
    for (int k = 0; k < 4; ++k) {
      if (k == drop) continue;
      A.row(r++) << x[k], y[k], z[k];
    }
    m = std::max(m, std::abs(A.determinant()));
  }
  return m / s;
}

// Residuals of b m^2 - 2 g m - a = 0 with m = m(n2) and of the barred mirror
// with n = n(n1), plus straightness of the envelope polygons along the rulings.
inline QSurfaceReport q_surface_residuals(const GmcLattice& L, const Grid<Mat4>& F, const QRuling& ruling,
                                          const Label& nu0 = Label(0.7), const Label& mu0 = Label(0.6)) {
  if (static_cast<int>(ruling.m.size()) != L.n2() || (!ruling.n.empty() && static_cast<int>(ruling.n.size()) != L.n1()))
    throw config_error("DimensionMismatch", "ruling length does not match the lattice");
  QSurfaceReport r{Grid<double>(L.n1(), L.n2(), kNaN), Grid<double>(L.n1(), L.n2(), kNaN), {}, {}, {}, {}};
  for (int i = 0; i < L.n1(); ++i)
    for (int j = 0; j < L.n2(); ++j) {
      const auto& s = L(i, j);
      if (s.has_unbarred()) {
        double m = ruling.m[j];
        double sc = std::abs(s.b) * m * m + 2 * std::abs(s.g * m) + std::abs(s.a);
        r.e33(i, j) = (s.b * m * m - 2 * s.g * m - s.a) / sc;
        r.mu_roots.add(r.e33(i, j), i, j);
      }
      if (!ruling.n.empty() && s.has_barred()) {
        double n = ruling.n[i];
        double sc = std::abs(s.b_bar) * n * n + 2 * std::abs(s.g_bar * n) + std::abs(s.a_bar);
        r.e35(i, j) = (s.b_bar * n * n - 2 * s.g_bar * n - s.a_bar) / sc;
        r.nu_roots.add(r.e35(i, j), i, j);
      }
    }
  // along n1 at fixed n2 the envelope vertices sit on the ruling mu = m(n2)
  auto nu = sweep_labels(L, nu0, [](const GmcState& s, const Label& l) { return riccati_nu(s, l); });
  for (int j = 0; j < L.n2(); ++j)
    for (int i = 0; i + 2 < L.n1(); ++i) {
      Label m(ruling.m[j]);
      r.straight_n1.add(collinearity(quadric_point(F(i, j), m, nu(i, j)), quadric_point(F(i + 1, j), m, nu(i + 1, j)),
                                     quadric_point(F(i + 2, j), m, nu(i + 2, j))),
                        i, j);
    }
  if (!ruling.n.empty()) {
    auto mu = sweep_labels(L, mu0, [](const GmcState& s, const Label& l) { return riccati_mu(s, l); });
    for (int i = 0; i < L.n1(); ++i)
      for (int j = 0; j + 2 < L.n2(); ++j) {
        Label n(ruling.n[i]);
        r.straight_n2.add(collinearity(quadric_point(F(i, j), mu(i, j), n), quadric_point(F(i, j + 1), mu(i, j + 1), n),
                                       quadric_point(F(i, j + 2), mu(i, j + 2), n)),
                          i, j);
      }
  }
  return r;
}

// Semi-Q lattice: the mu-ruling m(n2) is prescribed and a at every site is
// fixed by b m^2 - 2 g m - a = 0. T-bar then follows from the single
// compatibility relation between T and T-bar, so the lattice is not minimal.
inline GmcLattice build_semi_q(std::vector<Unbarred> row, const std::vector<Barred>& col, const std::vector<double>& m,
                               int branch = 1) {
  if (m.size() != col.size()) throw config_error("DimensionMismatch", "m must have one entry per n2");
  for (auto& s : row) s.a = s.b * m[0] * m[0] - 2 * s.g * m[0];
  return evolve_with(row, col, [&m](int, int j, const GmcState& s, StepResult& r) {
    double mj = j + 1 < static_cast<int>(m.size()) ? m[j + 1] : m[j];
    r.up.a = r.up.b * mj * mj - 2 * r.up.g * mj;
    double T2 = r.up.a * r.up.b + r.up.g * r.up.g;
    double Tb1 = s.T_bar() + s.a_bar * s.alpha_bar * (T2 - s.T()) / (s.a * s.alpha);
    r.right.a = (Tb1 - r.right.g * r.right.g) / r.right.b;
  }, branch);
}

}  // namespace prodisc
