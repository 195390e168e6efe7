#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "esci/errors.hpp"
#include "esci/matrix_core.hpp"
#include "test_support.hpp"

using namespace esci;

namespace {

Mat m2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(SymMatrix, SymmetrizesOnConstruction) {
  const SymMatrix s(m2(1.0, 2.0, 4.0, 3.0));
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_DOUBLE_EQ(s(0, 1), 3.0);
}

TEST(SymMatrix, RejectsNonSquareAndNonFinite) {
  EXPECT_THROW(SymMatrix(Mat::Zero(2, 3)), FusionError);
  EXPECT_THROW(SymMatrix(m2(1.0, NAN, NAN, 1.0)), FusionError);
}

TEST(BlockMatrix, BlocksAreTransposesOfEachOther) {
  std::mt19937_64 rng(3);
  const SymMatrix s = testkit::random_spd(6, rng);
  const BlockMatrix b(2, s);
  EXPECT_EQ(b.block_count(), 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(b.block(i, j), b.block(j, i).transpose());
}

TEST(BlockMatrix, SelectKeepsOrder) {
  Mat a = Mat::Zero(3, 3);
  a.diagonal() << 1.0, 2.0, 3.0;
  const BlockMatrix b(1, 3, a);
  const std::vector<int> keep{2, 0};
  const BlockMatrix s = b.select(keep);
  EXPECT_DOUBLE_EQ(s.block(0, 0)(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(s.block(1, 1)(0, 0), 1.0);
}

TEST(Loewner, IdentityScaling) {
  EXPECT_TRUE(loewner_leq(SymMatrix::identity(2), SymMatrix::scaled_identity(2, 2.0), 1e-12));
  EXPECT_FALSE(loewner_leq(SymMatrix::scaled_identity(2, 2.0), SymMatrix::identity(2), 1e-12));
}

TEST(Loewner, PriorDominatedByDoubledPrior) {
  const SymMatrix p(m2(1.0, -1.0, -1.0, 4.0));
  EXPECT_TRUE(loewner_leq(p, p * 2.0, 1e-12));
}

TEST(Loewner, ViolationIsLargestEigenvalueOfDifference) {
  const SymMatrix a(m2(3.0, 0.0, 0.0, 1.0));
  EXPECT_NEAR(loewner_violation(a, SymMatrix::identity(2)), 2.0, 1e-14);
}

TEST(PsdSqrt, Examples) {
  EXPECT_TRUE(psd_sqrt(SymMatrix::scaled_identity(3, 4.0)).mat().isApprox(2.0 * Mat::Identity(3, 3), 1e-15));
  EXPECT_TRUE(psd_sqrt(SymMatrix::zero(2)).mat().isZero(0.0));
  const SymMatrix a(m2(2.0, 1.0, 1.0, 2.0));
  const SymMatrix s = psd_sqrt(a);
  EXPECT_LT((s.mat() * s.mat() - a.mat()).norm(), 1e-14);
  // Eigen-reconstruction oracle: eigenvalues 3 and 1 on (1,1)/√2 and (1,−1)/√2.
  const double r3 = std::sqrt(3.0);
  EXPECT_NEAR(s(0, 0), (r3 + 1.0) / 2.0, 1e-14);
  EXPECT_NEAR(s(0, 1), (r3 - 1.0) / 2.0, 1e-14);
}

TEST(PsdSqrt, RejectsIndefinite) { EXPECT_THROW(psd_sqrt(SymMatrix(m2(1.0, 0.0, 0.0, -1.0))), FusionError); }

TEST(SpdInverse, SingularThrows) {
  try {
    spd_inverse(SymMatrix(m2(1.0, 1.0, 1.0, 1.0)));
    FAIL();
  } catch (const FusionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularMatrix);
  }
}

TEST(SpdInverse, RandomRoundTrip) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const SymMatrix a = testkit::random_spd(4, rng);
    EXPECT_LT((a.mat() * spd_inverse(a).mat() - Mat::Identity(4, 4)).norm(), 1e-12);
  }
}

TEST(LogDet, ScaledIdentity) { EXPECT_NEAR(log_det_spd(SymMatrix::scaled_identity(2, std::numbers::e)), 2.0, 1e-14); }

TEST(CentralizedH, Shapes) {
  EXPECT_EQ(build_centralized_H(2, 1), Mat::Ones(2, 1));
  const Mat h = build_centralized_H(4, 3);
  ASSERT_EQ(h.rows(), 12);
  ASSERT_EQ(h.cols(), 3);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(h.middleRows(i * 3, 3), Mat::Identity(3, 3));
}

TEST(Ellipse, UnitCircleAndScaled) {
  const auto pts = ellipse_boundary(SymMatrix::identity(2), 4);
  ASSERT_EQ(pts.size(), 4u);
  const double expect[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(pts[k].x(), expect[k][0], 1e-15);
    EXPECT_NEAR(pts[k].y(), expect[k][1], 1e-15);
  }
  const auto one = ellipse_boundary(SymMatrix::scaled_identity(2, 4.0), 1);
  EXPECT_NEAR(one[0].x(), 2.0, 1e-15);
  EXPECT_NEAR(one[0].y(), 0.0, 1e-15);
}

TEST(Ellipse, PointsLieOnQuadric) {
  const SymMatrix p(m2(8.0, 3.0, 3.0, 2.0));
  const Mat pinv = spd_inverse(p).mat();
  for (const auto& x : ellipse_boundary(p, 360)) EXPECT_NEAR(x.dot(pinv * x), 1.0, 1e-12);
}
