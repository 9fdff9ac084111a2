// Recover a 3-sparse vector from 12 noisy Gaussian measurements with the
// sublinear penalty sum |x_k|^{1/2}, then audit the sparsity bound.

#include <cstdio>

#include <flexreg/flexreg.hpp>

int main() {
  using namespace flexreg;

  const Eigen::MatrixXd a = gaussian_matrix(12, 10, 2024);
  Vector truth = Vector::Zero(10);
  truth[1] = 1.2;
  truth[4] = -0.7;
  truth[8] = 0.9;

  std::mt19937_64 rng(17);
  SolveConfig cfg;
  cfg.op = LinearOperator::dense(a);
  cfg.data = synthesize_data(cfg.op, truth, 1e-3, rng);
  cfg.penalty = PenaltySpec(ExponentSequence::constant(0.5), 1e-3);
  cfg.max_iters = 50000;
  cfg.objective_tol = 1e-15;

  const SolveReport report = solve(cfg);
  std::printf("iterations %d, converged %s\n", report.iterations_used, report.converged ? "yes" : "no");
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    std::printf("  x[%td] = % .6f   (true % .6f)\n", k, report.minimizer[k], truth[k]);
  }

  const SparsityAudit audit = sparsity_audit(report, cfg);
  std::printf("support %zu, gradient bound C = %.3e, audit %s\n", audit.support_size, audit.gradient_bound,
              audit.passed ? "passed" : "failed");

  const GlobalMinimum best = exhaustive_support_minimize(a, cfg.data, 1e-3, Vector::Constant(10, 0.5));
  std::printf("solver objective %.12f, exhaustive optimum %.12f\n", report.objective_trace.back(), best.objective);
}
