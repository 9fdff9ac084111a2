#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <random>

#include "flexreg/operators.hpp"
#include "oracles.hpp"

using namespace flexreg;

TEST(Apply, IdentityAndDiagonal) {
  std::mt19937_64 rng(41);
  const Vector x = oracle::gaussian_vector(4, rng);
  EXPECT_EQ(apply(LinearOperator::identity(4), x), x);
  EXPECT_EQ(apply_adjoint(LinearOperator::identity(4), x), x);

  Vector d(2);
  d << 2, 3;
  const auto diag = LinearOperator::diagonal(d);
  EXPECT_EQ(apply(diag, Vector::Ones(2)), d);
  Vector r(2);
  r << -1, 4;
  EXPECT_EQ(apply_adjoint(diag, r), Vector(d.cwiseProduct(r)));
}

TEST(Apply, DenseMatchesNaiveLoops) {
  const Eigen::MatrixXd a = gaussian_matrix(5, 4, 9);
  const auto op = LinearOperator::dense(a);
  std::mt19937_64 rng(42);
  for (int s = 0; s < 20; ++s) {
    const Vector x = oracle::gaussian_vector(4, rng), r = oracle::gaussian_vector(5, rng);
    EXPECT_LE((apply(op, x) - oracle::naive_matvec(a, x)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((apply_adjoint(op, r) - oracle::naive_transpose_matvec(a, r)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Apply, DimensionMismatchThrows) {
  const auto op = LinearOperator::dense(gaussian_matrix(5, 4, 1));
  EXPECT_EQ(op.domain_dim(), 4);
  EXPECT_EQ(op.range_dim(), 5);
  EXPECT_THROW(apply(op, Vector::Zero(5)), DomainError);
  EXPECT_THROW(apply_adjoint(op, Vector::Zero(4)), DomainError);
  EXPECT_THROW(apply(LinearOperator::identity(3), Vector::Zero(2)), DomainError);
  EXPECT_THROW(apply(LinearOperator::diagonal(Vector::Ones(3)), Vector::Zero(2)), DomainError);
}

TEST(AdjointProperty, InnerProductIdentity) {
  std::mt19937_64 rng(43);
  const std::vector<LinearOperator> ops = {LinearOperator::dense(gaussian_matrix(7, 5, 3)),
                                           LinearOperator::diagonal(oracle::gaussian_vector(5, rng)),
                                           LinearOperator::identity(5)};
  for (const auto& op : ops) {
    for (int s = 0; s < 1000; ++s) {
      const Vector x = oracle::gaussian_vector(op.domain_dim(), rng), y = oracle::gaussian_vector(op.range_dim(), rng);
      const double lhs = apply(op, x).dot(y), rhs = x.dot(apply_adjoint(op, y));
      ASSERT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(OperatorNorm, Examples) {
  EXPECT_EQ(operator_norm_sq(LinearOperator::identity(6)), 1.0);
  Vector d(2);
  d << 3, 1;
  EXPECT_DOUBLE_EQ(operator_norm_sq(LinearOperator::diagonal(d)), 9.0);
}

TEST(OperatorNorm, MatchesSvdOracle) {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const Eigen::MatrixXd a = gaussian_matrix(6, 6, seed);
    const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0];
    EXPECT_NEAR(operator_norm_sq(LinearOperator::dense(a)), sigma * sigma, 0.01 * sigma * sigma);
  }
}

TEST(OperatorNormProperty, RayleighLowerBound) {
  const auto op = LinearOperator::dense(gaussian_matrix(9, 6, 11));
  const double n2 = operator_norm_sq(op);
  std::mt19937_64 rng(44);
  for (int s = 0; s < 1000; ++s) {
    const Vector x = oracle::gaussian_vector(6, rng);
    ASSERT_LE(apply(op, x).squaredNorm() / x.squaredNorm(), n2 * 1.01);
  }
}

TEST(OperatorNorm, DeterministicForSeed) {
  const auto op = LinearOperator::dense(gaussian_matrix(8, 8, 5));
  EXPECT_EQ(operator_norm_sq(op, 3), operator_norm_sq(op, 3));
  EXPECT_EQ(operator_norm_sq(LinearOperator::dense(Eigen::MatrixXd::Zero(3, 3))), 0.0);
}

TEST(GaussianMatrix, SeededAndScaled) {
  EXPECT_EQ(gaussian_matrix(4, 3, 7), gaussian_matrix(4, 3, 7));
  EXPECT_NE(gaussian_matrix(4, 3, 7), gaussian_matrix(4, 3, 8));
  const Eigen::MatrixXd big = gaussian_matrix(400, 50, 1);
  EXPECT_NEAR(big.squaredNorm() / big.size(), 1.0 / 400.0, 0.1 / 400.0);
}
