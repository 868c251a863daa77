#include <gtest/gtest.h>

#include "prodisc/envelopes.hpp"

using namespace prodisc;

namespace {

GmcState state(double alpha, double a, double b, double f, double g) {
  GmcState s;
  s.set(Unbarred{alpha, a, b, f, g});
  s.set(Barred{1.0, 0.3, -0.4, 0.1, 0.2});
  return s;
}

}  // namespace

TEST(QuadricPoint, IdentityFrame) {
  EXPECT_EQ(quadric_point(Mat4::Identity(), 0.0, 0.0), HPoint(0, 0, 0, 1));
  EXPECT_EQ(quadric_point(Mat4::Identity(), 1.0, 2.0), HPoint(2, 1, 2, 1));
}

TEST(QuadricPoint, NuZeroStaysOnEdge) {
  Mat4 F = Mat4::Random() + 3 * Mat4::Identity();
  for (double mu : {-2.0, 0.5, 3.0}) {
    HPoint x = quadric_point(F, mu, 0.0);
    HPoint y = row_r12(F) + mu * row_r1(F);
    EXPECT_LE(projective_distance(x, y), 1e-15);
  }
}

TEST(QuadricPoint, InfiniteLabel) {
  Mat4 F = Mat4::Random() + 3 * Mat4::Identity();
  EXPECT_LE(projective_distance(quadric_point(F, Label::infinity(), Label(0.0)), row_r1(F)), 1e-15);
  EXPECT_LE(projective_distance(quadric_point(F, Label::infinity(), Label::infinity()), row_r(F)), 1e-15);
}

TEST(ImplicitMatrix, IdentityFrame) {
  Mat4 S = implicit_matrix(Mat4::Identity());
  Mat4 want = Mat4::Zero();
  want(0, 3) = want(3, 0) = 0.5;
  want(1, 2) = want(2, 1) = -0.5;
  EXPECT_LE((S - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ImplicitMatrix, ScaleInvariant) {
  Mat4 F = Mat4::Random() + 2 * Mat4::Identity();
  EXPECT_LE((implicit_matrix(F) - implicit_matrix(2 * F)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ImplicitMatrix, RandomFrameContainsItsNet) {
  for (int k = 0; k < 5; ++k) {
    Mat4 F = Mat4::Random() + 2 * Mat4::Identity();
    auto Q = make_quadric(F);
    EXPECT_LE(implicit_residual(Q, 5), 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat4> es(Q.S);
    int pos = 0, neg = 0;
    for (int i = 0; i < 4; ++i) (es.eigenvalues()[i] > 0 ? pos : neg)++;
    EXPECT_EQ(pos, 2);
    EXPECT_EQ(neg, 2);
  }
}

TEST(ImplicitMatrix, SingularFrame) {
  Mat4 F = Mat4::Identity();
  F.row(3) = F.row(0);
  EXPECT_THROW(implicit_matrix(F), Error);
}

TEST(C1, AdjacentCanonicalQuadricsTouch) {
  auto d = random_cauchy(5, 5, 8);
  auto L = evolve(d.row, d.col);
  auto fr = build_frames(L, Mat4::Identity() + Mat4::Constant(0.25));
  for (int i = 0; i + 1 < 5; ++i)
    for (int j = 0; j + 1 < 5; ++j) {
      auto Q = make_quadric(fr.F(i, j));
      EXPECT_LE(c1_residual(Q, make_quadric(fr.F(i + 1, j)), 1), 1e-9);
      EXPECT_LE(c1_residual(Q, make_quadric(fr.F(i, j + 1)), 2), 1e-9);
      for (double c : {-1.0, 0.4})
        EXPECT_LE(label_matching_residual(fr.F(i, j), fr.F(i + 1, j), 1, c), 1e-9);
    }
}

TEST(C1, SelfAndPerturbed) {
  Mat4 F = Mat4::Random() + 2 * Mat4::Identity();
  auto Q = make_quadric(F);
  EXPECT_LE(c1_residual(Q, Q), 1e-12);
  // a neighbour through the same edge (r1 -> r, r12 -> r2) but with r12 moved
  GmcState s = state(1.2, 0.3, -0.5, 0.1, 0.2);
  Mat4 Fn = frame_L(s) * F;
  EXPECT_LE(c1_residual(Q, make_quadric(Fn), 1), 1e-9);
  Mat4 Fp = Fn;
  Fp.row(3) += 0.3 * HPoint(0.2, -0.7, 0.4, 1.1).transpose();
  EXPECT_GT(c1_residual(Q, make_quadric(Fp), 1), 1e-3);
}

TEST(CommonGenerators, Roots) {
  auto two = common_generators(state(1, 1, 1, 0, 0));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_DOUBLE_EQ(two[0], -1.0);
  EXPECT_DOUBLE_EQ(two[1], 1.0);
  EXPECT_TRUE(common_generators(state(1, -1, 1, 0, 0)).empty());
  auto one = common_generators(state(1, -0.25, 4, 0, 1));   // T = -1 + 1 = 0
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0], 0.25);
}

TEST(CommonGenerators, DoubleRootIsTangentLine) {
  // on a T = 0 lattice the generator mu = g/b lies on both quadrics
  auto d = random_cauchy(4, 4, 6);
  for (auto& s : d.row) s.a = -s.g * s.g / s.b;
  auto L = evolve(d.row, d.col, MinimalClass::GodeauxRozetT0);
  auto fr = build_frames(L, Mat4::Identity());
  for (int i = 0; i + 1 < 4; ++i) {
    double mu = L(i, 0).g / L(i, 0).b;
    auto Qn = make_quadric(fr.F(i + 1, 0));
    for (double nu : {-1.0, 0.5, 2.0}) EXPECT_LE(quadric_membership(Qn, quadric_point(fr.F(i, 0), mu, nu)), 1e-9);
  }
}

TEST(NeighborNuMap, Substitution) {
  EXPECT_DOUBLE_EQ(neighbor_nu_map(state(1, 1, 1e-300, 0, 0), 0.0, 1.0), -1.0);
  // alpha = 2, nu = 1, b mu + v = 3
  EXPECT_DOUBLE_EQ(neighbor_nu_map(state(2, 1, 1, 2, 1), 2.0, 1.0), -10.0);
  EXPECT_THROW(neighbor_nu_map(state(1, 1, 1, 0, 0), 1.0, 0.0), Error);
}

TEST(NeighborNuMap, AgreesWithRiccatiWhenTVanishes) {
  GmcState s = state(1.3, -0.25, 4, 0.3, 1);   // T = 0
  double mu = s.g / s.b;
  for (double nu : {-0.7, 0.4, 2.5}) {
    Label n1 = riccati_nu(s, Label(nu)).first;
    EXPECT_NEAR(n1.value(), neighbor_nu_map(s, mu, nu), 1e-12);
  }
}
