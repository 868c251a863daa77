#pragma once

#include <functional>
#include <vector>

#include "prodisc/gmc.hpp"

namespace prodisc {

// A lives on n1-edges and Q on n2-edges: A is NaN on the last n1-row and Q on
// the last n2-column.
struct DemState {
  double H = kNaN, K = kNaN, A = kNaN, Q = kNaN;
};

using DemLattice = Grid<DemState>;

struct DemCauchy {
  std::vector<double> H_row, K_row, A_row;   // over n1 at n2 = 0
  std::vector<double> H_col, K_col, Q_col;   // over n2 at n1 = 0
};

inline void check_forbidden(double x, const char* name) {
  if (!finite(x) || std::abs(x) < kGuard || std::abs(x - 1.0) < kGuard)
    throw config_error("ForbiddenValue", std::string(name) + " must avoid 0 and 1");
}

inline double guarded_div(double num, double den, double scale, const char* what) {
  if (!(std::abs(den) > kGuard * scale) || !finite(den)) throw degeneracy("DenominatorBlowup", what);
  return num / den;
}

// H12 and K12 from the rational face map.
inline std::pair<double, double> dem_face(double H, double H1, double H2, double K, double K1, double K2, double A,
                                          double Q) {
  double dh = K * (H * (H1 - 1) * (H2 - 1) - (H - 1)) * (K2 - 1) - A * Q * H1 * K2 * (H2 - 1);
  double sh = std::abs(K * (K2 - 1)) * (std::abs(H * (H1 - 1) * (H2 - 1)) + std::abs(H - 1)) +
              std::abs(A * Q * H1 * K2 * (H2 - 1));
  double dk = H * (K * (K1 - 1) * (K2 - 1) - (K - 1)) * (H1 - 1) - A * Q * H1 * K2 * (K1 - 1);
  double sk = std::abs(H * (H1 - 1)) * (std::abs(K * (K1 - 1) * (K2 - 1)) + std::abs(K - 1)) +
              std::abs(A * Q * H1 * K2 * (K1 - 1));
  return {guarded_div(-K * (H - 1) * (K2 - 1), dh, sh, "K(H(H1-1)(H2-1)-(H-1))(K2-1) - AQ H1 K2 (H2-1)"),
          guarded_div(-H * (K - 1) * (H1 - 1), dk, sk, "H(K(K1-1)(K2-1)-(K-1))(H1-1) - AQ H1 K2 (K1-1)")};
}

struct DemStepResult {
  double H12, K12, A2, Q1;
};

inline DemStepResult dem_step(double H, double H1, double H2, double K, double K1, double K2, double A, double Q) {
  auto [h, k] = dem_face(H, H1, H2, K, K1, K2, A, Q);
  return {h, k, guarded_div(H1 * A, K, 1.0, "K"), guarded_div(K2 * Q, H, 1.0, "H")};
}

inline DemLattice dem_evolve(const DemCauchy& c) {
  const int n1 = static_cast<int>(c.H_row.size()), n2 = static_cast<int>(c.H_col.size());
  if (n1 < 1 || n2 < 1 || static_cast<int>(c.K_row.size()) != n1 || static_cast<int>(c.K_col.size()) != n2 ||
      static_cast<int>(c.A_row.size()) < n1 - 1 || static_cast<int>(c.Q_col.size()) < n2 - 1)
    throw config_error("BadDimensions", "inconsistent Demoulin Cauchy data");
  if (std::abs(c.H_row[0] - c.H_col[0]) > 0 || std::abs(c.K_row[0] - c.K_col[0]) > 0)
    throw config_error("BadCauchyData", "axes disagree at the origin");
  DemLattice L(n1, n2);
  for (int i = 0; i < n1; ++i) {
    check_forbidden(c.H_row[i], "H");
    check_forbidden(c.K_row[i], "K");
    L(i, 0).H = c.H_row[i];
    L(i, 0).K = c.K_row[i];
    if (i + 1 < n1) L(i, 0).A = c.A_row[i];
  }
  for (int j = 0; j < n2; ++j) {
    check_forbidden(c.H_col[j], "H");
    check_forbidden(c.K_col[j], "K");
    L(0, j).H = c.H_col[j];
    L(0, j).K = c.K_col[j];
    if (j + 1 < n2) L(0, j).Q = c.Q_col[j];
  }
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i) {
      const auto &s = L(i, j), &s1 = L(i + 1, j), &s2 = L(i, j + 1);
      try {
        auto r = dem_step(s.H, s1.H, s2.H, s.K, s1.K, s2.K, s.A, s.Q);
        L(i + 1, j + 1).H = r.H12;
        L(i + 1, j + 1).K = r.K12;
        L(i, j + 1).A = r.A2;
        L(i + 1, j).Q = r.Q1;
      } catch (const Error& e) {
        throw at_site(e, i, j);
      }
    }
  return L;
}

inline DemLattice dem_constant(int n1, int n2, double H, double K, double A, double Q) {
  DemCauchy c;
  c.H_row.assign(n1, H);
  c.K_row.assign(n1, K);
  c.A_row.assign(n1, A);
  c.H_col.assign(n2, H);
  c.K_col.assign(n2, K);
  c.Q_col.assign(n2, Q);
  return dem_evolve(c);
}

inline double rel_diff(double x, double y) {
  double s = std::abs(x) + std::abs(y);
  return s == 0 ? 0.0 : (x - y) / s;
}

struct DemResiduals {
  Stat face;       // H12, K12 against the face map
  Stat first;      // A2 K = H1 A and Q1 H = K2 Q
};

inline DemResiduals dem_residuals(const DemLattice& L) {
  DemResiduals r;
  for (int i = 0; i + 1 < L.n1(); ++i)
    for (int j = 0; j + 1 < L.n2(); ++j) {
      const auto &s = L(i, j), &s1 = L(i + 1, j), &s2 = L(i, j + 1), &s12 = L(i + 1, j + 1);
      if (!finite(s.A) || !finite(s.Q)) continue;
      try {
        auto [h, k] = dem_face(s.H, s1.H, s2.H, s.K, s1.K, s2.K, s.A, s.Q);
        r.face.add(rel_diff(s12.H, h), i, j);
        r.face.add(rel_diff(s12.K, k), i, j);
      } catch (const Error&) {
        r.face.add(1.0, i, j);
      }
      if (finite(s2.A)) r.first.add(rel_diff(s2.A * s.K, s1.H * s.A), i, j);
      if (finite(s1.Q)) r.first.add(rel_diff(s1.Q * s.H, s2.K * s.Q), i, j);
    }
  return r;
}

inline double chi_squared(double H, double H1, double K) { return (1 - H) * H1 / ((1 - H1) * K); }
inline double chi_bar_squared(double H, double K, double K2) { return (1 - K) * K2 / ((1 - K2) * H); }

struct ChiFields {
  Grid<double> chi;       // on n1-edges
  Grid<double> chi_bar;   // on n2-edges
  Stat face;              // chi2 chi_bar H - chi_bar1 chi K, relative
};

// chi > 0 on the row n2 = 0 and chi_bar > 0 everywhere; the sign of chi on
// later rows follows from chi2 chi_bar H = chi_bar1 chi K face by face.
inline ChiFields chi_fields(const DemLattice& L, double tol = default_tol()) {
  const int n1 = L.n1(), n2 = L.n2();
  ChiFields c{Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN), {}};
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      double x = chi_squared(L(i, j).H, L(i + 1, j).H, L(i, j).K);
      if (!(x >= 0)) throw at_site(degeneracy("NegativeRadicand", "chi^2 = " + std::to_string(x)), i, j);
      c.chi(i, j) = std::sqrt(x);
    }
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j + 1 < n2; ++j) {
      double x = chi_bar_squared(L(i, j).H, L(i, j).K, L(i, j + 1).K);
      if (!(x >= 0)) throw at_site(degeneracy("NegativeRadicand", "chi_bar^2 = " + std::to_string(x)), i, j);
      c.chi_bar(i, j) = std::sqrt(x);
    }
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i) {
      double want = c.chi_bar(i + 1, j) * c.chi(i, j) * L(i, j).K / (c.chi_bar(i, j) * L(i, j).H);
      if (std::abs(std::abs(want) - c.chi(i, j + 1)) > tol * std::abs(want))
        throw at_site(degeneracy("SignObstruction", "|chi_2| does not match the face rule"), i, j);
      c.chi(i, j + 1) = want < 0 ? -c.chi(i, j + 1) : c.chi(i, j + 1);
    }
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i)
      c.face.add(rel_diff(c.chi(i, j + 1) * c.chi_bar(i, j) * L(i, j).H, c.chi_bar(i + 1, j) * c.chi(i, j) * L(i, j).K),
                 i, j);
  return c;
}

// Wilczynski-type transition matrices.
inline Mat4 wilczynski_L(double H, double H1, double K, double A, double chi) {
  double u = (H1 - 1) / (H1 * (H - 1));
  Mat4 m;
  m << 1, 1, 0, 0,
       A, A + u, A * K / (K - 1), A * K / (K - 1),
       K - 1, K - 1, K, K,
       0, u * (K - 1), 0, u * K;
  return chi * m;
}

inline Mat4 wilczynski_M(double H, double K, double K2, double Q, double chi_bar) {
  double v = (K2 - 1) / (K2 * (K - 1));
  Mat4 m;
  m << 1, 0, 1, 0,
       H - 1, H, H - 1, H,
       Q, Q * H / (H - 1), Q + v, Q * H / (H - 1),
       0, 0, v * (H - 1), v * H;
  return chi_bar * m;
}

inline FrameField wilczynski_frames(const DemLattice& L, const ChiFields& c, const Mat4& seed) {
  return integrate_frames(
      L.n1(), L.n2(), seed,
      [&](int i, int j) { return wilczynski_L(L(i, j).H, L(i + 1, j).H, L(i, j).K, L(i, j).A, c.chi(i, j)); },
      [&](int i, int j) { return wilczynski_M(L(i, j).H, L(i, j).K, L(i, j + 1).K, L(i, j).Q, c.chi_bar(i, j)); });
}

// L2 M - M1 L per face, entrywise against (|L2||M| + |M1||L|).
inline Stat wilczynski_compatibility(const DemLattice& L, const ChiFields& c) {
  Stat st;
  for (int i = 0; i + 1 < L.n1(); ++i)
    for (int j = 0; j + 1 < L.n2(); ++j) {
      const auto &s = L(i, j), &s1 = L(i + 1, j), &s2 = L(i, j + 1), &s12 = L(i + 1, j + 1);
      Mat4 Lm = wilczynski_L(s.H, s1.H, s.K, s.A, c.chi(i, j));
      Mat4 L2 = wilczynski_L(s2.H, s12.H, s2.K, s2.A, c.chi(i, j + 1));
      Mat4 Mm = wilczynski_M(s.H, s.K, s2.K, s.Q, c.chi_bar(i, j));
      Mat4 M1 = wilczynski_M(s1.H, s1.K, s12.K, s1.Q, c.chi_bar(i + 1, j));
      Mat4 d = L2 * Mm - M1 * Lm;
      Mat4 sc = L2.cwiseAbs() * Mm.cwiseAbs() + M1.cwiseAbs() * Lm.cwiseAbs();
      for (int r = 0; r < 4; ++r)
        for (int q = 0; q < 4; ++q) st.add(sc(r, q) > 0 ? d(r, q) / sc(r, q) : 0.0, i, j);
    }
  return st;
}

inline Mat4 gauge_matrix(double xi, double kappa) {
  Mat4 G;
  G << xi, 0, 0, 0,
       -xi, kappa, 0, 0,
       -xi, 0, 1.0 / kappa, 0,
       xi, -kappa, -1.0 / kappa, 1.0 / xi;
  return G;
}

struct GaugeResult {
  Grid<double> kappa, xi;   // kappa_bar = 1/kappa
  GmcLattice states;        // unbarred NaN on the last n1-row, barred on the last n2-column
  Stat xi_path;             // xi1 = kappa xi/(kappa1 K) re-checked after the sweep
  Stat pattern;             // transformed matrices against the sparse canonical ones
  Stat off_pattern;         // entries that must vanish, relative to the matrix size
  Stat e52;                 // |ab + g^2| / (|ab| + g^2) and the barred mirror
};

// kappa is prescribed on both axes and extended by the face rule
// kappa12 = kappa1 kappa2/kappa sqrt(K H1/(K2 H)); xi follows along n1 on the
// first column and along n2 elsewhere.
inline GaugeResult gauge_to_canonical(const DemLattice& L, const ChiFields& c, const std::vector<double>& kappa_row,
                                      const std::vector<double>& kappa_col, double xi0) {
  const int n1 = L.n1(), n2 = L.n2();
  if (static_cast<int>(kappa_row.size()) != n1 || static_cast<int>(kappa_col.size()) != n2)
    throw config_error("BadDimensions", "kappa axis data must match the lattice");
  if (kappa_row[0] != kappa_col[0]) throw config_error("BadCauchyData", "kappa axes disagree at the origin");
  for (double k : kappa_row) if (k == 0 || !finite(k)) throw degeneracy("ZeroKappa", "kappa must be nonzero");
  for (double k : kappa_col) if (k == 0 || !finite(k)) throw degeneracy("ZeroKappa", "kappa must be nonzero");
  if (xi0 == 0) throw degeneracy("ZeroXi", "xi must be nonzero");
  GaugeResult g{Grid<double>(n1, n2, kNaN), Grid<double>(n1, n2, kNaN), GmcLattice(n1, n2), {}, {}, {}, {}};
  for (int i = 0; i < n1; ++i) g.kappa(i, 0) = kappa_row[i];
  for (int j = 0; j < n2; ++j) g.kappa(0, j) = kappa_col[j];
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i + 1 < n1; ++i) {
      const auto &s = L(i, j), &s1 = L(i + 1, j), &s2 = L(i, j + 1);
      double rad = s.K * s1.H / (s2.K * s.H);
      if (!(rad > 0)) throw at_site(degeneracy("NegativeRadicand", "K H1/(K2 H) <= 0 in the kappa face rule"), i, j);
      g.kappa(i + 1, j + 1) = g.kappa(i + 1, j) * g.kappa(i, j + 1) / g.kappa(i, j) * std::sqrt(rad);
    }
  g.xi(0, 0) = xi0;
  for (int i = 0; i + 1 < n1; ++i) g.xi(i + 1, 0) = g.kappa(i, 0) * g.xi(i, 0) / (g.kappa(i + 1, 0) * L(i, 0).K);
  for (int j = 0; j + 1 < n2; ++j)
    for (int i = 0; i < n1; ++i)
      g.xi(i, j + 1) = (1.0 / g.kappa(i, j)) * g.xi(i, j) / ((1.0 / g.kappa(i, j + 1)) * L(i, j).H);
  for (int i = 0; i + 1 < n1; ++i)
    for (int j = 0; j < n2; ++j)
      g.xi_path.add(rel_diff(g.xi(i + 1, j), g.kappa(i, j) * g.xi(i, j) / (g.kappa(i + 1, j) * L(i, j).K)), i, j);

  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      auto& st = g.states(i, j);
      const auto& s = L(i, j);
      double x = g.xi(i, j), k = g.kappa(i, j);
      if (i + 1 < n1) {
        double ch = c.chi(i, j), k1 = g.kappa(i + 1, j), h1 = L(i + 1, j).H;
        st.a = ch * x * k * k / k1 * s.A / ((1 - s.K) * s.K);
        st.b = ch / (x * k1) * s.A * s.K / (s.K - 1);
        st.f = ch * k / k1 * (1 - s.H * h1) / ((1 - s.H) * h1);
        st.g = ch * k / k1 * s.A / (1 - s.K);
        st.alpha = x / (ch * k1 * s.K);
      }
      if (j + 1 < n2) {
        double cb = c.chi_bar(i, j), kb = 1.0 / k, kb2 = 1.0 / g.kappa(i, j + 1), k2 = L(i, j + 1).K;
        st.a_bar = cb * x * kb * kb / kb2 * s.Q / ((1 - s.H) * s.H);
        st.b_bar = cb / (x * kb2) * s.Q * s.H / (s.H - 1);
        st.f_bar = cb * kb / kb2 * (1 - s.K * k2) / ((1 - s.K) * k2);
        st.g_bar = cb * kb / kb2 * s.Q / (1 - s.H);
        st.alpha_bar = x / (cb * kb2 * s.H);
      }
    }

  static const bool patL[4][4] = {{0, 1, 0, 0}, {1, 1, 0, 1}, {0, 0, 0, 1}, {0, 1, 1, 1}};
  static const bool patM[4][4] = {{0, 0, 1, 0}, {0, 0, 0, 1}, {1, 0, 1, 1}, {0, 1, 1, 1}};
  // xi grows geometrically across the lattice, so each entry is measured
  // against the size of the terms that produced it: (|G1^-1| |W| |G|)_rq.
  auto compare = [&](const Mat4& Gi, const Mat4& W, const Mat4& G, const Mat4& ref, const bool pat[4][4], int i,
                     int j) {
    Mat4 X = Gi * W * G;
    Mat4 sc = Gi.cwiseAbs() * W.cwiseAbs() * G.cwiseAbs();
    for (int r = 0; r < 4; ++r)
      for (int q = 0; q < 4; ++q) {
        double den = sc(r, q) > 0 ? sc(r, q) : 1.0;
        g.pattern.add((X(r, q) - ref(r, q)) / std::max(den, std::abs(ref(r, q))), i, j);
        if (!pat[r][q]) g.off_pattern.add(X(r, q) / den, i, j);
      }
  };
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const auto& st = g.states(i, j);
      const auto& s = L(i, j);
      Mat4 G = gauge_matrix(g.xi(i, j), g.kappa(i, j));
      if (i + 1 < n1) {
        compare(gauge_matrix(g.xi(i + 1, j), g.kappa(i + 1, j)).inverse(),
                wilczynski_L(s.H, L(i + 1, j).H, s.K, s.A, c.chi(i, j)), G, frame_L(st), patL, i, j);
        g.e52.add(st.T_scale() > 0 ? st.T() / st.T_scale() : 0.0, i, j);
      }
      if (j + 1 < n2) {
        compare(gauge_matrix(g.xi(i, j + 1), g.kappa(i, j + 1)).inverse(),
                wilczynski_M(s.H, s.K, L(i, j + 1).K, s.Q, c.chi_bar(i, j)), G, frame_M(st), patM, i, j);
        g.e52.add(st.T_bar_scale() > 0 ? st.T_bar() / st.T_bar_scale() : 0.0, i, j);
      }
    }
  return g;
}

inline GaugeResult gauge_to_canonical(const DemLattice& L, const ChiFields& c, double kappa0 = 1.0, double xi0 = 1.0) {
  return gauge_to_canonical(L, c, std::vector<double>(L.n1(), kappa0), std::vector<double>(L.n2(), kappa0), xi0);
}

// Near-constant Demoulin lattice: every axis value is base * (1 + U[-e,e]).
inline DemLattice dem_random(int n1, int n2, uint64_t seed, double H0 = 0.5, double K0 = 0.45, double A0 = 0.5,
                             double Q0 = -1.5, double e = 0.05, bool tzitzeica = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-e, e);
  auto draw = [&](double base) { return base * (1 + U(rng)); };
  DemCauchy c;
  for (int i = 0; i < n1; ++i) c.H_row.push_back(draw(H0));
  for (int j = 0; j < n2; ++j) c.H_col.push_back(draw(H0));
  c.H_col[0] = c.H_row[0];
  if (tzitzeica) {
    c.K_row = c.H_row;
    c.K_col = c.H_col;
  } else {
    for (int i = 0; i < n1; ++i) c.K_row.push_back(draw(K0));
    for (int j = 0; j < n2; ++j) c.K_col.push_back(draw(K0));
    c.K_col[0] = c.K_row[0];
  }
  for (int i = 0; i < n1; ++i) c.A_row.push_back(draw(A0));
  for (int j = 0; j < n2; ++j) c.Q_col.push_back(draw(Q0));
  return dem_evolve(c);
}

// (A,Q) -> (lambda A, Q/lambda).
inline DemLattice inject_lambda(const DemLattice& L, double lambda) {
  if (lambda == 0) throw config_error("ZeroLambda", "scaling parameter must be nonzero");
  DemLattice out = L;
  for (auto& s : out.data()) {
    s.A *= lambda;
    s.Q /= lambda;
  }
  return out;
}

// Smooth data for the continuum limit; a depends on x only and q on y only.
struct SmoothSeed {
  std::function<double(double, double)> h, k;
  std::function<double(double)> a, q;
};

struct ConvergenceRow {
  int n = 0;
  double mesh = 0, defect = 0, order = kNaN;
};

// Discrete Demoulin equations sampled on x = eps n1, y = delta n2 with
// H = 1 + eps delta h/2, K = 1 + eps delta k/2, A = eps^3 a/2, Q = delta^3 q/2.
// The defect at each interior base site compares the scaled discrete
// residuals with (ln h)_xy - h + a q/(h k) and its k-mirror, using centered
// differences of the seed; the A and Q relations are compared with zero.
inline std::vector<ConvergenceRow> continuum_convergence(const SmoothSeed& seed, const std::vector<int>& sizes) {
  std::vector<ConvergenceRow> out;
  for (int N : sizes) {
    if (N < 3) throw config_error("BadDimensions", "continuum grids need N >= 3");
    const double e = 1.0 / N, d = 1.0 / N;
    double D = 0;
    for (int i = 1; i + 1 < N; ++i)
      for (int j = 1; j + 1 < N; ++j) {
        double x = i * e, y = j * d;
        auto Hf = [&](int di, int dj) { return 1 + e * d / 2 * seed.h(x + di * e, y + dj * d); };
        auto Kf = [&](int di, int dj) { return 1 + e * d / 2 * seed.k(x + di * e, y + dj * d); };
        double A = e * e * e / 2 * seed.a(x), Q = d * d * d / 2 * seed.q(y);
        double A2 = e * e * e / 2 * seed.a(x), Q1 = d * d * d / 2 * seed.q(y);
        auto [hn, kn] = dem_face(Hf(0, 0), Hf(1, 0), Hf(0, 1), Kf(0, 0), Kf(1, 0), Kf(0, 1), A, Q);
        double DH = (Hf(1, 1) - hn) / (e * d * (Hf(0, 0) - 1));
        double DK = (Kf(1, 1) - kn) / (e * d * (Kf(0, 0) - 1));
        double DA = (A2 - Hf(1, 0) / Kf(0, 0) * A) / (e * e * e * d / 2);
        double DQ = (Q1 - Kf(0, 1) / Hf(0, 0) * Q) / (d * d * d * e / 2);
        auto lxy = [&](const std::function<double(double, double)>& f) {
          auto l = [&](int di, int dj) { return std::log(f(x + di * e, y + dj * d)); };
          return (l(1, 1) - l(1, -1) - l(-1, 1) + l(-1, -1)) / (4 * e * d);
        };
        double h = seed.h(x, y), k = seed.k(x, y), s = seed.a(x) * seed.q(y) / (h * k);
        D = std::max({D, std::abs(DH - (lxy(seed.h) - h + s)), std::abs(DK - (lxy(seed.k) - k + s)), std::abs(DA),
                      std::abs(DQ)});
      }
    ConvergenceRow row{N, e, D, kNaN};
    if (!out.empty()) row.order = std::log2(out.back().defect / D) / std::log2(out.back().mesh / e);
    out.push_back(row);
  }
  return out;
}

inline SmoothSeed default_smooth_seed() {
  return {[](double x, double y) { return 2 + 0.3 * std::sin(x + 2 * y) + 0.2 * x * y; },
          [](double x, double y) { return 1.5 + 0.2 * std::cos(2 * x - y) + 0.1 * x; },
          [](double x) { return 0.7 + 0.3 * std::sin(x); }, [](double y) { return -0.4 + 0.2 * std::cos(3 * y); }};
}

}  // namespace prodisc
