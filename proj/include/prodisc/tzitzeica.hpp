#pragma once

#include <Eigen/Dense>

#include "prodisc/demoulin.hpp"

namespace prodisc {

struct TzCauchy {
  std::vector<double> H_row, A_row;   // over n1 at n2 = 0
  std::vector<double> H_col, Q_col;   // over n2 at n1 = 0
};

inline double tz_face(double H, double H1, double H2, double A, double Q) {
  double den = H * (H * (H1 - 1) * (H2 - 1) - (H - 1)) - A * Q * H1 * H2;
  double sc = std::abs(H) * (std::abs(H * (H1 - 1) * (H2 - 1)) + std::abs(H - 1)) + std::abs(A * Q * H1 * H2);
  return guarded_div(-H * (H - 1), den, sc, "H(H(H1-1)(H2-1)-(H-1)) - AQ H1 H2");
}

// Demoulin lattice with K = H carried exactly.
inline DemLattice tz_evolve(const TzCauchy& c) {
  const int n1 = static_cast<int>(c.H_row.size()), n2 = static_cast<int>(c.H_col.size());
  if (n1 < 1 || n2 < 1 || static_cast<int>(c.A_row.size()) < n1 - 1 || static_cast<int>(c.Q_col.size()) < n2 - 1)
    throw config_error("BadDimensions", "inconsistent Tzitzeica Cauchy data");
  if (c.H_row[0] != c.H_col[0]) throw config_error("BadCauchyData", "axes disagree at the origin");
  DemLattice L(n1, n2);
  for (int i = 0; i < n1; ++i) {
    check_forbidden(c.H_row[i], "H");
    L(i, 0).H = L(i, 0).K = c.H_row[i];
    if (i + 1 < n1) L(i, 0).A = c.A_row[i];
  }
  for (int j = 0; j < n2; ++j) {
    check_forbidden(c.H_col[j], "H");
    L(0, j).H = L(0, j).K = c.H_col[j];
    if (j + 1 < n2) L(0, j).Q = c.Q_col[j];
  }
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i) {
      const auto &s = L(i, j), &s1 = L(i + 1, j), &s2 = L(i, j + 1);
      try {
        double h = tz_face(s.H, s1.H, s2.H, s.A, s.Q);
        L(i + 1, j + 1).H = L(i + 1, j + 1).K = h;
        L(i, j + 1).A = guarded_div(s1.H * s.A, s.H, 1.0, "H");
        L(i + 1, j).Q = guarded_div(s2.H * s.Q, s.H, 1.0, "H");
      } catch (const Error& e) {
        throw at_site(e, i, j);
      }
    }
  return L;
}

inline DemLattice tz_random(int n1, int n2, uint64_t seed, double H0 = -1.0, double A0 = 0.3, double Q0 = -0.1,
                            double e = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-e, e);
  auto draw = [&](double base) { return base * (1 + U(rng)); };
  TzCauchy c;
  for (int i = 0; i < n1; ++i) c.H_row.push_back(draw(H0));
  for (int j = 0; j < n2; ++j) c.H_col.push_back(draw(H0));
  c.H_col[0] = c.H_row[0];
  for (int i = 0; i < n1; ++i) c.A_row.push_back(draw(A0));
  for (int j = 0; j < n2; ++j) c.Q_col.push_back(draw(Q0));
  return tz_evolve(c);
}

inline Mat4 scaled_L(double H, double H1, double A) { return wilczynski_L(H, H1, H, A, 1.0); }
inline Mat4 scaled_M(double H, double H2, double Q) { return wilczynski_M(H, H, H2, Q, 1.0); }

// Seed whose first row has last coordinate 1; the propagation then keeps the
// last coordinate of r-hat equal to 1 everywhere. tilt mixes r1 into r so the
// mesh is not axis-aligned.
inline Mat4 affine_seed(double H00, double tilt = 0.3) {
  Mat4 s = Mat4::Identity();
  s.col(3) << 1, 0, 0, 1.0 / H00 - 1;
  s.col(0) += tilt * s.col(1);
  return s;
}

inline FrameField scaled_frame(const DemLattice& L, const Mat4& seed) {
  return integrate_frames(
      L.n1(), L.n2(), seed, [&](int i, int j) { return scaled_L(L(i, j).H, L(i + 1, j).H, L(i, j).A); },
      [&](int i, int j) { return scaled_M(L(i, j).H, L(i, j + 1).H, L(i, j).Q); });
}

// phi with chi = phi/phi1 and chi_bar = phi/phi2, integrated from phi0.
inline Grid<double> phi_from_chi(const ChiFields& c, double phi0, Stat* path = nullptr) {
  const int n1 = c.chi.n1(), n2 = c.chi.n2();
  Grid<double> phi(n1, n2, kNaN);
  phi(0, 0) = phi0;
  for (int i = 0; i + 1 < n1; ++i) phi(i + 1, 0) = phi(i, 0) / c.chi(i, 0);
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i < n1; ++i) phi(i, j + 1) = phi(i, j) / c.chi_bar(i, j);
  if (path)
    for (int i = 0; i + 1 < n1; ++i)
      for (int j = 1; j < n2; ++j) path->add(rel_diff(phi(i + 1, j), phi(i, j) / c.chi(i, j)), i, j);
  return phi;
}

// Largest |sum of terms| over the largest term, per component.
template <class V>
double stencil_residual(std::initializer_list<V> terms) {
  V sum = V::Zero();
  double sc = 0;
  for (const auto& t : terms) {
    sum += t;
    sc = std::max(sc, t.cwiseAbs().maxCoeff());
  }
  return sc == 0 ? 0.0 : sum.cwiseAbs().maxCoeff() / sc;
}

struct AffineSpheres {
  Grid<Eigen::Vector3d> points;
  HPoint c;            // conserved vector at the origin face
  Stat c_spread, chart_spread, e54, e55, e57_1, e57_2, e57_3;
};

// Conserved vector c = (r12 + r - H(r1 + r2))/(H-1), affine chart by
// coordinate `chart`, translation by c/2 so that r12 + r = H(r1 + r2).
inline AffineSpheres affine_spheres(const DemLattice& L, const Grid<Mat4>& F, int chart = 3,
                                    double tol = default_tol()) {
  const int n1 = L.n1(), n2 = L.n2();
  if (n1 < 2 || n2 < 2) throw config_error("GridTooSmall", "need at least 2x2 sites");
  if (chart < 0 || chart > 3) throw config_error("BadChart", "chart index must be 0..3");
  AffineSpheres out{Grid<Eigen::Vector3d>(n1, n2, Eigen::Vector3d::Constant(kNaN)), HPoint::Zero(), {}, {}, {}, {}, {}, {}, {}};
  auto r = [&](int i, int j) -> HPoint { return F(i, j).row(0).transpose(); };
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      HPoint x = r(i, j);
      if (std::abs(x[chart]) <= 1e-12 * x.norm())
        throw at_site(degeneracy("AffineChartFailure", "chart coordinate vanishes"), i, j);
    }
  double kap = r(0, 0)[chart];
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) out.chart_spread.add((r(i, j)[chart] - kap) / kap, i, j);

  double scale_c = 0;
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      double H = L(i, j).H;
      HPoint t[4] = {r(i + 1, j + 1), r(i, j), -H * r(i + 1, j), -H * r(i, j + 1)};
      HPoint c = (t[0] + t[1] + t[2] + t[3]) / (H - 1);
      double sc = 0;
      for (auto& v : t) sc = std::max(sc, v.cwiseAbs().maxCoeff());
      sc /= std::abs(H - 1);
      if (i == 0 && j == 0) out.c = c;
      scale_c = std::max(scale_c, sc);
      out.c_spread.add((c - out.c).cwiseAbs().maxCoeff() / sc, i, j);
    }
  if (out.c_spread.max > tol)
    throw Error(ErrorKind::Residual, "NonConstantC", "conserved vector drifts by " + std::to_string(out.c_spread.max));

  auto drop = [chart](const HPoint& x) {
    Eigen::Vector3d y;
    for (int k = 0, m = 0; k < 4; ++k)
      if (k != chart) y[m++] = x[k];
    return y;
  };
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) out.points(i, j) = drop(r(i, j) + out.c / 2) / kap;

  // r-hat difference form and the second-order relations.
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      const Mat4& Fs = F(i, j);
      HPoint r1 = Fs.row(1).transpose(), r2v = Fs.row(2).transpose(), r12 = Fs.row(3).transpose();
      double H = L(i, j).H;
      out.e54.add(stencil_residual<HPoint>({r1, HPoint(-r(i + 1, j)), r(i, j)}), i, j);
      out.e54.add(stencil_residual<HPoint>({r2v, HPoint(-r(i, j + 1)), r(i, j)}), i, j);
      out.e54.add(stencil_residual<HPoint>({r12, HPoint(-r(i + 1, j + 1) / H), r(i + 1, j), r(i, j + 1), HPoint(-r(i, j))}),
                  i, j);
    }

  const auto& P = out.points;
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      const auto& s = L(i, j);
      out.e57_2.add(stencil_residual<Eigen::Vector3d>({P(i + 1, j + 1), P(i, j), Eigen::Vector3d(-s.H * P(i + 1, j)),
                                                       Eigen::Vector3d(-s.H * P(i, j + 1))}),
                    i, j);
      if (i + 2 < n1) {
        double H1 = L(i + 1, j).H;
        double u = (H1 - 1) / (H1 * (s.H - 1)), w = s.A / (s.H - 1);
        out.e57_1.add(stencil_residual<Eigen::Vector3d>({P(i + 2, j), Eigen::Vector3d(-P(i + 1, j)),
                                                         Eigen::Vector3d(-u * (P(i + 1, j) - P(i, j))),
                                                         Eigen::Vector3d(-w * (P(i + 1, j + 1) - P(i + 1, j)))}),
                      i, j);
        HPoint a = r(i + 2, j) - r(i + 1, j), b = u * (r(i + 1, j) - r(i, j)), d = w * (r(i + 1, j + 1) - r(i + 1, j));
        out.e55.add(stencil_residual<HPoint>({a, HPoint(-b), HPoint(-d)}), i, j);
      }
      if (j + 2 < n2) {
        double H2 = L(i, j + 1).H;
        double u = (H2 - 1) / (H2 * (s.H - 1)), w = s.Q / (s.H - 1);
        out.e57_3.add(stencil_residual<Eigen::Vector3d>({P(i, j + 2), Eigen::Vector3d(-P(i, j + 1)),
                                                         Eigen::Vector3d(-u * (P(i, j + 1) - P(i, j))),
                                                         Eigen::Vector3d(-w * (P(i + 1, j + 1) - P(i, j + 1)))}),
                      i, j);
        HPoint a = r(i, j + 2) - r(i, j + 1), b = u * (r(i, j + 1) - r(i, j)), d = w * (r(i + 1, j + 1) - r(i, j + 1));
        out.e55.add(stencil_residual<HPoint>({a, HPoint(-b), HPoint(-d)}), i, j);
      }
    }
  return out;
}

struct TauField {
  Grid<double> tau;
  std::vector<double> s;       // over n1
  std::vector<double> s_bar;   // over n2
};

inline double det3(double a, double b, double c, double d, double e, double f, double g, double h, double k) {
  return a * (e * k - f * h) - b * (d * k - f * g) + c * (d * h - e * g);
}

// |tau tau1 tau11; tau2 tau12 tau112; tau22 tau122 tau1122| + s sbar tau12^3
// over |tau12|^3, with s and s_bar taken at the base site.
inline Stat tau_determinant_identity(const TauField& t) {
  Stat st;
  const auto& T = t.tau;
  for (int i = 0; i + 2 < T.n1(); ++i)
    for (int j = 0; j + 2 < T.n2(); ++j) {
      double d = det3(T(i, j), T(i + 1, j), T(i + 2, j), T(i, j + 1), T(i + 1, j + 1), T(i + 2, j + 1), T(i, j + 2),
                      T(i + 1, j + 2), T(i + 2, j + 2));
      double c = T(i + 1, j + 1);
      st.add((d + t.s[i] * t.s_bar[j] * c * c * c) / std::abs(c * c * c), i, j);
    }
  return st;
}

struct TauRecovery {
  Stat H, A, Q, cross;   // recovered against the lattice; cross = unused recurrences
};

// H = tau1 tau2/(tau12 tau), A = s tau1^2/(tau tau11), Q = s_bar tau2^2/(tau tau22).
inline TauRecovery tau_recover(const TauField& t, const DemLattice& L) {
  TauRecovery r;
  const auto& T = t.tau;
  for (int i = 0; i < T.n1(); ++i)
    for (int j = 0; j < T.n2(); ++j) {
      if (i + 1 < T.n1() && j + 1 < T.n2())
        r.H.add(rel_diff(T(i + 1, j) * T(i, j + 1) / (T(i + 1, j + 1) * T(i, j)), L(i, j).H), i, j);
      if (i + 2 < T.n1()) {
        double v = rel_diff(t.s[i] * T(i + 1, j) * T(i + 1, j) / (T(i, j) * T(i + 2, j)), L(i, j).A);
        r.A.add(v, i, j);
        if (j > 0) r.cross.add(v, i, j);
      }
      if (j + 2 < T.n2()) {
        double v = rel_diff(t.s_bar[j] * T(i, j + 1) * T(i, j + 1) / (T(i, j) * T(i, j + 2)), L(i, j).Q);
        r.Q.add(v, i, j);
        if (i > 0) r.cross.add(v, i, j);
      }
    }
  return r;
}

// tau from the three recurrences: row n2 = 0 by the tau11 rule, column n1 = 0
// by the tau22 rule, interior by the tau12 rule.
inline TauField tau_from_solution(const DemLattice& L, double t00, double t10, double t01,
                                  const std::vector<double>& s, const std::vector<double>& s_bar,
                                  double tol = default_tol()) {
  const int n1 = L.n1(), n2 = L.n2();
  if (n1 < 2 || n2 < 2) throw config_error("GridTooSmall", "need at least 2x2 sites");
  if (static_cast<int>(s.size()) < n1 || static_cast<int>(s_bar.size()) < n2)
    throw config_error("BadDimensions", "first integrals must cover the lattice");
  if (t00 == 0 || t10 == 0 || t01 == 0) throw degeneracy("ZeroTau", "tau seeds must be nonzero");
  TauField t{Grid<double>(n1, n2, kNaN), s, s_bar};
  auto& T = t.tau;
  T(0, 0) = t00;
  T(1, 0) = t10;
  T(0, 1) = t01;
  auto nz = [](double v, int i, int j) {
    if (v == 0 || !finite(v)) throw at_site(degeneracy("ZeroTau", "tau vanished"), i, j);
    return v;
  };
  for (int i = 0; i + 2 < n1; ++i) {
    if (L(i, 0).A == 0) throw at_site(degeneracy("DenominatorBlowup", "A = 0"), i, 0);
    T(i + 2, 0) = nz(s[i] * T(i + 1, 0) * T(i + 1, 0) / (T(i, 0) * L(i, 0).A), i + 2, 0);
  }
  for (int j = 0; j + 2 < n2; ++j) {
    if (L(0, j).Q == 0) throw at_site(degeneracy("DenominatorBlowup", "Q = 0"), 0, j);
    T(0, j + 2) = nz(s_bar[j] * T(0, j + 1) * T(0, j + 1) / (T(0, j) * L(0, j).Q), 0, j + 2);
  }
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i)
      T(i + 1, j + 1) = nz(T(i + 1, j) * T(i, j + 1) / (T(i, j) * L(i, j).H), i + 1, j + 1);
  auto rec = tau_recover(t, L);
  if (rec.cross.max > tol)
    throw Error(ErrorKind::Residual, "InconsistentRecurrences",
                "tau11/tau22 rules fail off the axes by " + std::to_string(rec.cross.max));
  return t;
}

struct TauCanonical {
  TauField field;
  Stat e59, e60, e61, e62, s_spread, s_bar_spread;
};

// tau on the canonical lattice: g/b = tau12/tau1 and g_bar/b_bar = tau12/tau2.
// The lattice must carry unbarred states up to row n1-2 and barred states up
// to column n2-2; tau lives on (n1-1) x (n2-1) sites and is fixed up to the
// scale tau0.
inline TauCanonical tau_layer_canonical(const GmcLattice& S, double tau0 = 1.0, double tol = default_tol()) {
  TauCanonical out;
  out.e59 = tzitzeica_constraint(S);
  auto cls = classify(S, tol);
  if (cls != MinimalClass::Demoulin && cls != MinimalClass::Tzitzeica)
    throw degeneracy("NotTzitzeica", "lattice is " + to_string(cls));
  if (out.e59.max > tol)
    throw degeneracy("NotTzitzeica", "constraint residual " + std::to_string(out.e59.max));
  const int M1 = S.n1() - 1, M2 = S.n2() - 1;
  if (M1 < 3 || M2 < 3) throw config_error("GridTooSmall", "need at least 4x4 canonical states");
  auto X = [&](int i, int j) { return S(i, j).g / S(i, j).b; };
  auto Y = [&](int i, int j) { return S(i, j).g_bar / S(i, j).b_bar; };
  Grid<double> T(M1, M2, kNaN);
  T(0, 0) = tau0;
  const auto& s0 = S(0, 0);
  T(1, 0) = -s0.alpha * s0.alpha * tau0 / (X(0, 0) * Y(1, 0) / X(1, 0) + s0.alpha * s0.f);
  for (int i = 1; i + 1 < M1; ++i) T(i + 1, 0) = T(i, 0) * X(i - 1, 0) * Y(i, 0) / X(i, 0);
  for (int j = 0; j + 1 < M2; ++j) {
    for (int i = 0; i + 1 < M1; ++i) T(i + 1, j + 1) = X(i, j) * T(i + 1, j);
    T(0, j + 1) = T(1, j + 1) / Y(0, j);
  }
  for (int i = 0; i + 1 < M1; ++i)
    for (int j = 0; j + 1 < M2; ++j) out.e60.add(rel_diff(T(i + 1, j + 1), T(i, j + 1) * Y(i, j)), i, j);
  auto lin = [](double a, double b, double c) {
    double sc = std::abs(a) + std::abs(b) + std::abs(c);
    return sc == 0 ? 0.0 : (a + b + c) / sc;
  };
  for (int i = 0; i < M1; ++i)
    for (int j = 0; j < M2; ++j) {
      const auto& s = S(i, j);
      if (i + 2 < M1) {
        out.e62.add(lin(T(i + 2, j), s.alpha * s.f * T(i + 1, j), s.alpha * s.alpha * T(i, j)), i, j);
        if (j + 1 < M2)
          out.e61.add(lin(T(i + 2, j + 1), s.alpha * s.f * T(i + 1, j + 1), s.alpha * s.alpha * T(i, j + 1)), i, j);
      }
      if (j + 2 < M2) {
        out.e62.add(lin(T(i, j + 2), s.alpha_bar * s.f_bar * T(i, j + 1), s.alpha_bar * s.alpha_bar * T(i, j)), i, j);
        if (i + 1 < M1)
          out.e61.add(lin(T(i + 1, j + 2), s.alpha_bar * s.f_bar * T(i + 1, j + 1),
                          s.alpha_bar * s.alpha_bar * T(i + 1, j)),
                      i, j);
      }
    }
  // first integrals
  Grid<double> sg(M1, M2, kNaN), sb(M1, M2, kNaN);
  double ms = 0, msb = 0;
  for (int i = 0; i + 1 < M1; ++i)
    for (int j = 0; j + 1 < M2; ++j) {
      const auto& s = S(i, j);
      sg(i, j) = s.alpha * s.g * (T(i, j + 1) / T(i + 1, j + 1) - T(i, j) / T(i + 1, j));
      sb(i, j) = s.alpha_bar * s.g_bar * (T(i + 1, j) / T(i + 1, j + 1) - T(i, j) / T(i, j + 1));
      ms = std::max(ms, std::abs(sg(i, j)));
      msb = std::max(msb, std::abs(sb(i, j)));
    }
  for (int i = 0; i + 1 < M1; ++i)
    for (int j = 0; j + 1 < M2; ++j) {
      out.s_spread.add((sg(i, j) - sg(i, 0)) / (ms > 0 ? ms : 1.0), i, j);
      out.s_bar_spread.add((sb(i, j) - sb(0, j)) / (msb > 0 ? msb : 1.0), i, j);
    }
  out.field.tau = T;
  out.field.s.assign(M1, kNaN);
  out.field.s_bar.assign(M2, kNaN);
  for (int i = 0; i + 1 < M1; ++i) out.field.s[i] = sg(i, 0);
  for (int j = 0; j + 1 < M2; ++j) out.field.s_bar[j] = sb(0, j);
  return out;
}

}  // namespace prodisc
