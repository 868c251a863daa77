#include <gtest/gtest.h>

#include "prodisc/demoulin.hpp"
#include "prodisc/envelopes.hpp"

using namespace prodisc;

namespace {

GmcState state(double alpha, double a, double b, double f, double g, double alpha_bar, double a_bar, double b_bar,
               double f_bar, double g_bar) {
  GmcState s;
  s.set(Unbarred{alpha, a, b, f, g});
  s.set(Barred{alpha_bar, a_bar, b_bar, f_bar, g_bar});
  return s;
}

struct Generic {
  GmcLattice L;
  FrameField fr;
};

Generic generic(int n, uint64_t seed) {
  auto d = random_cauchy(n, n, seed);
  Generic g{evolve(d.row, d.col), {}};
  g.fr = build_frames(g.L, Mat4::Identity());
  return g;
}

GmcLattice gr_lattice(int n1, int n2, uint64_t seed) {
  auto d = random_cauchy(n1, n2, seed);
  for (auto& s : d.row) s.a = -s.g * s.g / s.b;
  return evolve(d.row, d.col, MinimalClass::GodeauxRozetT0);
}

}  // namespace

TEST(Riccati, ScalarSubstitutions) {
  auto s = state(1, 1, 2, 0, 0.5, 1, 1, 2, 0, 0);
  EXPECT_DOUBLE_EQ(riccati_nu(s, 1.0).first, -1.0);
  EXPECT_DOUBLE_EQ(riccati_nu(s, 3.0).second, s.a_bar / (s.b_bar * 3.0));
  auto t = state(1, 1, 2, 0, 0, 1, 1, 2, 0, 0.5);
  EXPECT_DOUBLE_EQ(riccati_mu(t, 3.0).first, t.a / (t.b * 3.0));
  EXPECT_DOUBLE_EQ(riccati_mu(t, 2.0).second, -0.5);
}

TEST(Riccati, Errors) {
  auto s = state(1, 1, 2, 0, 0.5, 1, 1, 2, 0, 0.5);
  EXPECT_THROW(riccati_nu(s, 0.0), Error);
  EXPECT_THROW(riccati_mu(s, 0.0), Error);
  EXPECT_THROW(riccati_mu(s, 0.25), Error);   // b mu = g
  auto t0 = state(1, -0.25, 4, 0, 1, 1, 1, 2, 0, 0.5);
  try {
    riccati_mu(t0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "NotApplicable");
  }
}

TEST(Riccati, FixedPointsAreCommonGenerators) {
  auto s = state(1.1, 0.6, 0.8, 0.2, 0.3, 1, 1, 2, 0, 0.5);
  for (double mu : common_generators(s)) EXPECT_NEAR(riccati_mu(s, mu).first, mu, 1e-12);
  EXPECT_GT(std::abs(riccati_mu(s, 1.7).first - 1.7), 1e-3);
}

TEST(GenericEnvelope, TangentAndLinearisable) {
  auto g = generic(16, 0);
  auto env = build_envelope_generic(g.L, g.fr.F, Label(0.7), Label(-0.4));
  auto tr = tangency_residuals(g.L, g.fr.F, env);
  EXPECT_GT(tr.det.count, 0);
  EXPECT_LE(tr.det.max, 1e-9);
  EXPECT_LE(tr.factored.max, 1e-9);
  EXPECT_LE(linear_riccati_agreement(g.L, env).max, 1e-10);
  EXPECT_LE(mu_compatibility(g.L, env.mu).max, 1e-12);
  EXPECT_LE(nu_compatibility(g.L, env.nu).max, 1e-12);
}

TEST(GenericEnvelope, TwoParameterFamily) {
  auto g = generic(6, 1);
  auto a = build_envelope_generic(g.L, g.fr.F, Label(0.7), Label(-0.4));
  auto b = build_envelope_generic(g.L, g.fr.F, Label(0.2), Label(-0.4));
  auto c = build_envelope_generic(g.L, g.fr.F, Label(0.7), Label(1.3));
  EXPECT_GT(projective_distance(a.points(3, 3), b.points(3, 3)), 1e-6);
  EXPECT_GT(projective_distance(a.points(3, 3), c.points(3, 3)), 1e-6);
}

TEST(GenericEnvelope, RandomLabelsAreNotTangent) {
  auto g = generic(6, 2);
  Grid<Label> mu(6, 6), nu(6, 6);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-2, 2);
  for (auto& l : mu.data()) l = Label(U(rng));
  for (auto& l : nu.data()) l = Label(U(rng));
  auto env = envelope_points(g.fr.F, mu, nu);
  EXPECT_GT(tangency_residuals(g.L, g.fr.F, env).det.max, 1e-3);
}

TEST(GodeauxRozet, ShiftCoincidence) {
  auto L = gr_lattice(16, 16, 5);
  ASSERT_EQ(classify(L), MinimalClass::GodeauxRozetT0);
  auto fr = build_frames(L, Mat4::Identity());
  auto gr = build_envelopes_gr(L, fr.F, Label(0.8));
  EXPECT_GT(gr.coincidence.count, 100);
  EXPECT_LE(gr.coincidence.max, 1e-9);
  EXPECT_LE(tangency_residuals(L, fr.F, gr.unshifted).det.max, 1e-9);
  // b mu~^2 - 2 g mu~ - a vanishes for mu~ = g/b when T = 0
  for (int i = 0; i < 16; ++i) {
    const auto& s = L(i, 3);
    if (!s.has_unbarred()) continue;
    double m = s.g / s.b;
    EXPECT_NEAR(s.b * m * m - 2 * s.g * m - s.a, 0.0, 1e-12 * (std::abs(s.a) + std::abs(s.g * m)));
  }
}

TEST(GodeauxRozet, StripHasNoN1Checks) {
  auto L = gr_lattice(1, 6, 5);
  auto fr = build_frames(L, Mat4::Identity());
  auto gr = build_envelopes_gr(L, fr.F, Label(0.8));
  EXPECT_EQ(gr.coincidence.count, 0);
}

TEST(GodeauxRozet, RejectsGeneric) {
  auto g = generic(4, 3);
  EXPECT_THROW(build_envelopes_gr(g.L, g.fr.F, Label(0.8)), Error);
  EXPECT_THROW(build_envelopes_demoulin(g.L, g.fr.F), Error);
}

TEST(Demoulin, FourEnvelopesCoincideOnGaugedLattice) {
  auto D = dem_random(10, 10, 0);
  auto ch = chi_fields(D);
  auto g = gauge_to_canonical(D, ch);
  GmcLattice S(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) S(i, j) = g.states(i, j);
  auto fr = build_frames(S, Mat4::Identity() + Mat4::Constant(0.25));
  auto de = build_envelopes_demoulin(S, fr.F);
  EXPECT_GT(de.coincidence.count, 0);
  EXPECT_LE(de.coincidence.max, 1e-9);
}

TEST(Demoulin, RandomCauchyData) {
  auto d = random_cauchy(12, 12, 7);
  for (auto& s : d.row) s.a = -s.g * s.g / s.b;
  for (auto& s : d.col) s.a = -s.g * s.g / s.b;
  auto L = evolve(d.row, d.col, MinimalClass::Demoulin);
  auto fr = build_frames(L, Mat4::Identity());
  auto de = build_envelopes_demoulin(L, fr.F);
  EXPECT_LE(de.coincidence.max, 1e-9);
}

TEST(Demoulin, TwoByTwoIsVacuous) {
  auto d = random_cauchy(2, 2, 7);
  for (auto& s : d.row) s.a = -s.g * s.g / s.b;
  for (auto& s : d.col) s.a = -s.g * s.g / s.b;
  auto L = evolve(d.row, d.col, MinimalClass::Demoulin);
  auto de = build_envelopes_demoulin(L, build_frames(L, Mat4::Identity()).F);
  EXPECT_EQ(de.fields.size(), 4u);
  EXPECT_LE(de.coincidence.max, 1e-9);
}

TEST(QSurface, ConstructedSemiQ) {
  auto q = random_cauchy(10, 10, 3);
  std::vector<double> m(10);
  for (int j = 0; j < 10; ++j) m[j] = 0.4 + 0.05 * j;
  auto L = build_semi_q(q.row, q.col, m);
  auto fr = build_frames(L, Mat4::Identity());
  auto r = q_surface_residuals(L, fr.F, QRuling{m, {}});
  EXPECT_LE(r.mu_roots.max, 1e-12);
  EXPECT_LE(r.straight_n1.max, 1e-9);
  EXPECT_LE(fr.path.max, 1e-9);
}

TEST(QSurface, GenericLatticeHasNoRuling) {
  auto g = generic(6, 4);
  auto r = q_surface_residuals(g.L, g.fr.F, QRuling{std::vector<double>(6, 0.5), {}});
  EXPECT_GT(r.mu_roots.max, 1e-3);
  EXPECT_THROW(q_surface_residuals(g.L, g.fr.F, QRuling{std::vector<double>(5, 0.5), {}}), Error);
}
