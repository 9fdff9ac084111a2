#include <gtest/gtest.h>

#include <Eigen/SVD>

#include <random>

#include "flexreg/global_search.hpp"
#include "flexreg/solver.hpp"
#include "oracles.hpp"

using namespace flexreg;

namespace {

SolveConfig dense_problem(std::uint64_t seed, Eigen::Index m, Eigen::Index n, ExponentSequence p, double alpha) {
  SolveConfig cfg;
  cfg.op = LinearOperator::dense(gaussian_matrix(m, n, seed));
  std::mt19937_64 rng(seed + 1000);
  cfg.data = oracle::gaussian_vector(m, rng);
  cfg.penalty = PenaltySpec(std::move(p), alpha);
  return cfg;
}

bool nonincreasing(const std::vector<double>& trace, double slack) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1] + slack) return false;
  }
  return true;
}

}  // namespace

TEST(Solve, IdentityWithLargeAlphaGivesZero) {
  SolveConfig cfg;
  cfg.op = LinearOperator::identity(4);
  cfg.data = Vector(4);
  cfg.data << 0.3, -1.2, 0.7, 0.05;
  cfg.penalty = PenaltySpec(ExponentSequence::constant(1.0), 1.2);
  const auto rep = solve(cfg);
  EXPECT_EQ(rep.minimizer, Vector::Zero(4));
  EXPECT_TRUE(rep.support.empty());
  EXPECT_TRUE(rep.converged);
}

TEST(Solve, IdentityIsOneProxStep) {
  std::mt19937_64 rng(51);
  for (const auto& seq : {ExponentSequence::one_plus_inv_k(), ExponentSequence::constant(0.5),
                          ExponentSequence::constant(1.0), ExponentSequence::constant(2.0)}) {
    SolveConfig cfg;
    cfg.op = LinearOperator::identity(6);
    cfg.data = oracle::gaussian_vector(6, rng);
    cfg.penalty = PenaltySpec(seq, 0.3);
    cfg.step_rule = StepRule::Backtracking;
    cfg.refine_support = false;
    const auto rep = solve(cfg);
    EXPECT_EQ(rep.step_size, 1.0);
    EXPECT_LE((rep.minimizer - prox_vector(cfg.data, 0.3, seq)).cwiseAbs().maxCoeff(), 1e-12)
        << to_string(seq.family());
  }
}

TEST(Solve, ConvexMatchesLongSmallStepReference) {
  SolveConfig cfg = dense_problem(61, 8, 6, ExponentSequence::one_plus_inv_k(), 0.1);
  cfg.objective_tol = 1e-11;
  cfg.max_iters = 100000;
  cfg.acceleration = true;
  const auto rep = solve(cfg);
  ASSERT_TRUE(rep.converged);

  // Plain forward-backward with a quarter of the safe step, 10^5 iterations.
  const Eigen::MatrixXd a = cfg.op.to_dense();
  const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0];
  const double gamma = 0.25 / (sigma * sigma);
  const Vector q = cfg.penalty.exponents.materialize(6);
  Vector x = Vector::Zero(6);
  for (int i = 0; i < 100000; ++i) {
    const Vector v = x - gamma * oracle::naive_transpose_matvec(a, oracle::naive_matvec(a, x) - cfg.data);
    for (Eigen::Index k = 0; k < 6; ++k) x[k] = prox_scalar(v[k], gamma * 0.1, q[k]).minimizer;
  }
  const double f_ref = 0.5 * (a * x - cfg.data).squaredNorm() + 0.1 * oracle::pow_sum(x, q);
  EXPECT_NEAR(objective(rep.minimizer, cfg), f_ref, 1e-6 * f_ref);
}

TEST(Solve, ConvexTerminatesOnResidualAndIsUnique) {
  SolveConfig cfg = dense_problem(62, 12, 10, ExponentSequence::one_plus_inv_k(), 0.1);
  cfg.objective_tol = 1e-10;
  cfg.max_iters = 100000;
  cfg.acceleration = true;
  std::mt19937_64 rng(63);
  cfg.initial = oracle::gaussian_vector(10, rng);
  const auto a = solve(cfg);
  cfg.initial = oracle::gaussian_vector(10, rng, 5.0);
  const auto b = solve(cfg);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_LE(*a.optimality_residual, 1e-10);
  EXPECT_LE((a.minimizer - b.minimizer).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(optimality_residual(a.minimizer, cfg), *a.optimality_residual, 1e-15);

  // Fixed-point characterization and the residual identity on the support.
  const Vector p = cfg.penalty.exponents.materialize(10);
  const double gamma = a.step_size;
  const Vector g = apply_adjoint(cfg.op, apply(cfg.op, a.minimizer) - cfg.data);
  EXPECT_LE((prox_vector(Vector(a.minimizer - gamma * g), gamma * 0.1, p) - a.minimizer).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index k = 0; k < 10; ++k) {
    if (a.minimizer[k] == 0.0) continue;
    EXPECT_NEAR(std::pow(std::abs(a.minimizer[k]), p[k] - 1.0), std::abs(g[k]) / (0.1 * p[k]), 1e-8);
  }
}

TEST(Solve, MonotoneWithoutAcceleration) {
  for (const auto& seq : {ExponentSequence::one_plus_inv_k(), ExponentSequence::constant(0.5),
                          ExponentSequence::constant(1.0), ExponentSequence::tabulated({0.3, 0.9, 0.6}, 0.7)}) {
    for (StepRule rule : {StepRule::FixedSafe, StepRule::Backtracking}) {
      SolveConfig cfg = dense_problem(64, 10, 8, seq, 0.05);
      cfg.step_rule = rule;
      cfg.max_iters = 3000;
      cfg.objective_tol = 1e-14;
      const auto rep = solve(cfg);
      EXPECT_TRUE(nonincreasing(rep.objective_trace, 1e-12)) << to_string(seq.family()) << " " << to_string(rule);
    }
  }
}

TEST(Solve, RestartKeepsAcceleratedTraceMonotone) {
  SolveConfig cfg = dense_problem(65, 12, 10, ExponentSequence::one_plus_inv_k(), 0.05);
  cfg.acceleration = true;
  cfg.restart_on_increase = true;
  cfg.max_iters = 5000;
  EXPECT_TRUE(nonincreasing(solve(cfg).objective_trace, 1e-12));
}

TEST(Solve, NonconvexNotBelowGlobalOptimum) {
  SolveConfig cfg = dense_problem(66, 8, 6, ExponentSequence::constant(0.5), 0.05);
  cfg.max_iters = 100000;
  cfg.objective_tol = 1e-15;
  const auto rep = solve(cfg);
  EXPECT_FALSE(rep.optimality_residual.has_value());
  const auto best = exhaustive_support_minimize(cfg.op.to_dense(), cfg.data, 0.05, Vector::Constant(6, 0.5));
  EXPECT_GE(objective(rep.minimizer, cfg), best.objective - 1e-12);
}

TEST(Solve, L1WarmStartAndRefinementReachStationaryPoint) {
  SolveConfig cfg = dense_problem(67, 10, 8, ExponentSequence::constant(0.5), 0.05);
  cfg.max_iters = 100000;
  cfg.objective_tol = 1e-15;
  cfg.warm_start = WarmStart::L1;
  const auto rep = solve(cfg);
  ASSERT_TRUE(rep.converged);
  const Vector g = apply_adjoint(cfg.op, apply(cfg.op, rep.minimizer) - cfg.data);
  for (Eigen::Index k : rep.support) {
    const double u = std::abs(rep.minimizer[k]);
    EXPECT_NEAR(std::abs(g[k]), 0.05 * 0.5 * std::pow(u, -0.5), 1e-10);
  }
}

TEST(Solve, BoundConstraintRequiredBelowCoercivityFloor) {
  SolveConfig cfg = dense_problem(68, 6, 5, ExponentSequence::constant(0.01), 0.05);
  EXPECT_THROW(solve(cfg), DomainError);
  cfg.bound_constraint = 2.0;
  const auto rep = solve(cfg);
  EXPECT_LE(rep.minimizer.cwiseAbs().maxCoeff(), 2.0);
}

TEST(Solve, ErrorPaths) {
  SolveConfig cfg = dense_problem(69, 6, 5, ExponentSequence::one_plus_inv_k(), 0.05);
  cfg.data = Vector::Zero(4);
  EXPECT_THROW(solve(cfg), DomainError);

  SolveConfig zero;
  zero.op = LinearOperator::dense(Eigen::MatrixXd::Zero(3, 3));
  zero.data = Vector::Zero(3);
  EXPECT_THROW(solve(zero), DomainError);

  SolveConfig big = dense_problem(69, 6, 5, ExponentSequence::constant(2.5), 0.05);
  EXPECT_THROW(solve(big), DomainError);

  SolveConfig bad_iters = dense_problem(69, 6, 5, ExponentSequence::one_plus_inv_k(), 0.05);
  bad_iters.max_iters = 0;
  EXPECT_THROW(solve(bad_iters), DomainError);
  EXPECT_THROW(PenaltySpec(ExponentSequence::one_plus_inv_k(), 0.0), DomainError);
}

TEST(OptimalityResidual, Examples) {
  SolveConfig cfg = dense_problem(70, 7, 5, ExponentSequence::one_plus_inv_k(), 0.2);
  SolveConfig zero = cfg;
  zero.data = Vector::Zero(7);
  EXPECT_EQ(optimality_residual(Vector::Zero(5), zero), 0.0);

  cfg.objective_tol = 1e-11;
  cfg.max_iters = 100000;
  const auto rep = solve(cfg);
  EXPECT_LE(optimality_residual(rep.minimizer, cfg), 1e-11);
  Vector moved = rep.minimizer;
  moved[2] += 0.1;
  EXPECT_GT(optimality_residual(moved, cfg), 1e-3);

  SolveConfig l1 = cfg;
  l1.penalty = PenaltySpec(ExponentSequence::constant(1.0), 0.2);
  EXPECT_THROW(optimality_residual(rep.minimizer, l1), DomainError);
}

TEST(SparsityAudit, ZeroMinimizerPassesVacuously) {
  SolveConfig cfg;
  cfg.op = LinearOperator::identity(3);
  cfg.data = Vector::Constant(3, 0.1);
  cfg.penalty = PenaltySpec(ExponentSequence::constant(0.5), 1.0);
  const auto rep = solve(cfg);
  const auto audit = sparsity_audit(rep, cfg);
  EXPECT_EQ(audit.support_size, 0u);
  EXPECT_TRUE(audit.passed);
}

TEST(SparsityAudit, BoundHoldsAtExhaustiveOptimum) {
  SolveConfig cfg = dense_problem(71, 8, 6, ExponentSequence::constant(0.5), 0.05);
  const auto best = exhaustive_support_minimize(cfg.op.to_dense(), cfg.data, 0.05, Vector::Constant(6, 0.5));
  ASSERT_FALSE(best.support.empty());
  SolveReport rep;
  rep.minimizer = best.minimizer;
  const auto audit = sparsity_audit(rep, cfg);
  EXPECT_TRUE(audit.passed);
  EXPECT_LE(audit.max_stationarity_gap, 1e-8);
  for (const auto& e : audit.entries) EXPECT_GE(e.margin, -1e-8);
}

TEST(SparsityAudit, BoundScalesWithAlphaSquaredForHalfExponent) {
  SolveConfig cfg;
  cfg.op = LinearOperator::identity(2);
  cfg.data = Vector::Constant(2, 3.0);
  cfg.penalty = PenaltySpec(ExponentSequence::constant(0.5), 1.0);
  SolveReport rep;
  rep.minimizer = Vector::Constant(2, 2.0);
  const double b1 = sparsity_audit(rep, cfg).entries[0].lower_bound;
  cfg.penalty.alpha = 2.0;
  const double b2 = sparsity_audit(rep, cfg).entries[0].lower_bound;
  EXPECT_NEAR(b2 / b1, 4.0, 1e-12);
  EXPECT_NEAR(sparsity_audit(rep, cfg).entries[0].epsilon, 0.25, 1e-15);
}

TEST(SparsityAudit, RejectsConvexExponents) {
  SolveConfig cfg = dense_problem(72, 5, 4, ExponentSequence::one_plus_inv_k(), 0.1);
  SolveReport rep;
  rep.minimizer = Vector::Zero(4);
  EXPECT_THROW(sparsity_audit(rep, cfg), DomainError);
}

TEST(Solve, BitReproducible) {
  SolveConfig cfg = dense_problem(73, 10, 8, ExponentSequence::constant(0.6), 0.05);
  cfg.acceleration = true;
  const auto a = solve(cfg), b = solve(cfg);
  EXPECT_EQ(a.minimizer, b.minimizer);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}
