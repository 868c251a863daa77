#include <gtest/gtest.h>

#include "prodisc/tzitzeica.hpp"

using namespace prodisc;

namespace {

TzCauchy constant_cauchy(int n1, int n2, double H, double A, double Q) {
  return {std::vector<double>(n1, H), std::vector<double>(n1, A), std::vector<double>(n2, H),
          std::vector<double>(n2, Q)};
}

double spread(const DemLattice& L) {
  double lo = 1e300, hi = -1e300;
  for (const auto& s : L.data()) lo = std::min(lo, s.H), hi = std::max(hi, s.H);
  return hi - lo;
}

template <class Fn>
std::string code_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(TzEvolve, ConstantGrids) {
  auto a = tz_evolve(constant_cauchy(12, 12, 2, 0.5, 1.5));
  EXPECT_LE(spread(a), 1e-12);
  EXPECT_NEAR(a(11, 11).H, 2.0, 1e-12);
  auto b = tz_evolve(constant_cauchy(12, 12, -1, 0, 0));
  EXPECT_EQ(spread(b), 0.0);
  EXPECT_EQ(b(5, 5).K, b(5, 5).H);
}

TEST(TzEvolve, ZeroADecouples) {
  auto c = constant_cauchy(6, 6, -1, 0, 0);
  for (int i = 0; i < 6; ++i) c.H_row[i] = -1 - 0.03 * i;
  c.H_col[0] = c.H_row[0];
  auto x = tz_evolve(c);
  for (auto& q : c.Q_col) q = 0.7;
  auto y = tz_evolve(c);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(x(i, j).H, y(i, j).H);
}

TEST(TzEvolve, IsDemoulinWithKEqualH) {
  auto L = tz_random(12, 12, 3);
  auto r = dem_residuals(L);
  EXPECT_LE(r.face.max, 1e-12);
  EXPECT_LE(r.first.max, 1e-12);
  for (const auto& s : L.data()) EXPECT_EQ(s.H, s.K);
  EXPECT_LE(std::abs(tz_face(2, 2, 2, 0.5, 1.5) - 2.0), 1e-15);
}

TEST(ScaledFrame, ConstantLatticeSigns) {
  auto L = tz_evolve(constant_cauchy(6, 6, 2, 0.5, 1.5));
  auto ch = chi_fields(L);
  auto phi = phi_from_chi(ch, 1.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(std::abs(phi(i, j)), 1.0, 1e-14);
}

TEST(ScaledFrame, CompatibleAndRelatedToWilczynski) {
  auto L = tz_random(16, 16, 3);
  Mat4 seed = affine_seed(L(0, 0).H);
  auto fr = scaled_frame(L, seed);
  EXPECT_LE(fr.path.max, 1e-9);
  auto ch = chi_fields(L);
  auto wf = wilczynski_frames(L, ch, seed);
  auto phi = phi_from_chi(ch, 1.0);
  double m = 0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      m = std::max(m, (phi(i, j) * wf.F(i, j) - fr.F(i, j)).norm() / fr.F(i, j).norm());
  EXPECT_LE(m, 1e-12);
}

TEST(ScaledFrame, FirstRowIsForwardDifference) {
  double H = -1.1, H1 = -0.95, A = 0.3;
  Mat4 Lm = scaled_L(H, H1, A);
  Mat4 F = Mat4::Random() + 2 * Mat4::Identity();
  Mat4 F1 = Lm * F;
  // r^1 = r_1 - r: the first n1-derivative row is the forward difference of r
  EXPECT_LE((F1.row(0) - F.row(0) - F.row(1)).norm(), 1e-12 * F.norm());
}

TEST(AffineSpheres, RandomLattice) {
  auto L = tz_random(16, 16, 3);
  auto fr = scaled_frame(L, affine_seed(L(0, 0).H));
  auto a = affine_spheres(L, fr.F);
  EXPECT_LE(a.c_spread.max, 1e-9);
  EXPECT_LE(a.chart_spread.max, 1e-9);
  EXPECT_LE(a.e54.max, 1e-9);
  EXPECT_LE(a.e55.max, 1e-9);
  EXPECT_LE(a.e57_1.max, 1e-9);
  EXPECT_LE(a.e57_2.max, 1e-9);
  EXPECT_LE(a.e57_3.max, 1e-9);
}

TEST(AffineSpheres, ConstantLattice) {
  auto L = tz_evolve(constant_cauchy(6, 6, 2, 0.5, 1.5));
  auto fr = scaled_frame(L, affine_seed(2.0));
  auto a = affine_spheres(L, fr.F);
  EXPECT_LE(a.c_spread.max, 1e-12);
  EXPECT_LE(std::max({a.e57_1.max, a.e57_2.max, a.e57_3.max}), 1e-12);
}

TEST(AffineSpheres, ChartFailure) {
  auto L = tz_random(6, 6, 3);
  Mat4 s0 = Mat4::Identity();
  s0(0, 3) = 0;
  s0(3, 3) = 1;
  auto fr = scaled_frame(L, s0);
  EXPECT_EQ(code_of([&] { affine_spheres(L, fr.F); }), "AffineChartFailure");
}

TEST(Tau, RoundTripOnRandomLattice) {
  auto L = tz_random(16, 16, 3);
  std::vector<double> s(16, 0.7), sb(16, -1.3);
  auto t = tau_from_solution(L, 1.0, 0.8, 1.1, s, sb);
  auto r = tau_recover(t, L);
  EXPECT_LE(r.H.max, 1e-9);
  EXPECT_LE(r.A.max, 1e-9);
  EXPECT_LE(r.Q.max, 1e-9);
  EXPECT_LE(tau_determinant_identity(t).max, 1e-9);
}

TEST(Tau, ConstantLattice) {
  auto L = tz_evolve(constant_cauchy(8, 8, 2, 0.5, 1.5));
  auto t = tau_from_solution(L, 1.0, 1.3, 0.9, std::vector<double>(8, 1.0), std::vector<double>(8, 1.0));
  EXPECT_LE(tau_determinant_identity(t).max, 1e-9);
}

TEST(Tau, ZeroSeedRejected) {
  auto L = tz_random(4, 4, 1);
  std::vector<double> one(4, 1.0);
  EXPECT_EQ(code_of([&] { tau_from_solution(L, 0.0, 1.0, 1.0, one, one); }), "ZeroTau");
}

TEST(Tau, VanishingFirstIntegralsLeaveTheDeterminant) {
  TauField t{Grid<double>(3, 3), {0, 0, 0}, {0, 0, 0}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t.tau(i, j) = 1.0 + 0.1 * i * i + 0.37 * j + 0.05 * i * j * j;
  const auto& T = t.tau;
  double d = det3(T(0, 0), T(1, 0), T(2, 0), T(0, 1), T(1, 1), T(2, 1), T(0, 2), T(1, 2), T(2, 2));
  EXPECT_NEAR(tau_determinant_identity(t).max, std::abs(d) / std::pow(T(1, 1), 3), 1e-15);
}

TEST(Tau, CanonicalLayerOnRandomLattice) {
  auto L = tz_random(16, 16, 3);
  auto g = gauge_to_canonical(L, chi_fields(L));
  EXPECT_EQ(classify(g.states), MinimalClass::Tzitzeica);
  auto tc = tau_layer_canonical(g.states);
  EXPECT_LE(tc.e59.max, 1e-9);
  EXPECT_LE(tc.e60.max, 1e-9);
  EXPECT_LE(tc.e61.max, 1e-9);
  EXPECT_LE(tc.e62.max, 1e-9);
  EXPECT_LE(tc.s_spread.max, 1e-10);
  EXPECT_LE(tc.s_bar_spread.max, 1e-10);
  EXPECT_LE(tau_determinant_identity(tc.field).max, 1e-9);
}

TEST(Tau, CanonicalLayerOnConstantLattice) {
  auto L = tz_evolve(constant_cauchy(8, 8, 2, 0.5, 1.5));
  auto g = gauge_to_canonical(L, chi_fields(L));
  auto tc = tau_layer_canonical(g.states);
  EXPECT_LE(tc.s_spread.max, 1e-10);
  EXPECT_LE(tc.s_bar_spread.max, 1e-10);
}

TEST(Tau, DemoulinIsNotTzitzeica) {
  auto D = dem_random(10, 10, 1);
  auto g = gauge_to_canonical(D, chi_fields(D));
  EXPECT_EQ(code_of([&] { tau_layer_canonical(g.states); }), "NotTzitzeica");
}
