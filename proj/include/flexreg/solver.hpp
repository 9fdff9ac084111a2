#pragma once

// Forward-backward splitting for
//
//   minimize  1/2 ||A x - y||^2 + alpha sum_k |x_k|^{p_k},   0 < p_k <= 2,
//
// with optional two-sequence acceleration. When every p_k > 1 the problem
// is strictly convex and termination is certified by the optimality
// residual; otherwise the iteration stops on a window of small relative
// objective changes and returns a stationary point.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flexreg/errors.hpp"
#include "flexreg/exponents.hpp"
#include "flexreg/operators.hpp"
#include "flexreg/penalty.hpp"
#include "flexreg/prox.hpp"

namespace flexreg {

enum class StepRule { FixedSafe, Backtracking };

/// Starting point when none is given: zero, or (sublinear regime only) the
/// minimizer of the same problem with every exponent set to 1.
enum class WarmStart { Zero, L1 };

inline const char* to_string(StepRule r) { return r == StepRule::FixedSafe ? "FixedSafe" : "Backtracking"; }
inline const char* to_string(WarmStart w) { return w == WarmStart::Zero ? "zero" : "l1"; }

/// Exponents below this make the penalty lose coercivity in practice; the
/// solver then insists on an explicit bound constraint.
inline constexpr double kCoercivityFloor = 0.05;
inline constexpr double kSupportThreshold = 1e-10;
inline constexpr int kObjectiveWindow = 10;
inline constexpr double kFixedSafeFactor = 0.99;
inline constexpr double kBacktrackShrink = 0.5;

struct SolveConfig {
  PenaltySpec penalty;
  LinearOperator op = LinearOperator::identity(1);
  Vector data = Vector::Zero(1);
  int max_iters = 1000;
  double objective_tol = 1e-8;
  StepRule step_rule = StepRule::FixedSafe;
  /// First trial step of the backtracking rule.
  double initial_step = 1.0;
  bool acceleration = false;
  bool restart_on_increase = true;
  /// Box |x_k| <= bound applied inside the prox step.
  std::optional<double> bound_constraint;
  std::uint64_t seed = kDefaultSeed;
  /// Starting point; chosen by `warm_start` when empty.
  std::optional<Vector> initial;
  WarmStart warm_start = WarmStart::Zero;
  /// Sublinear regime: finish with Newton steps on the detected support.
  bool refine_support = true;
};

struct SolveReport {
  Vector minimizer;
  std::vector<double> objective_trace;
  /// Present only when every exponent exceeds one.
  std::optional<double> optimality_residual;
  std::vector<Eigen::Index> support;
  int iterations_used = 0;
  bool converged = false;
  double step_size = 0.0;
};

namespace detail {

inline void validate(const SolveConfig& cfg) {
  require(cfg.max_iters >= 1, "max_iters must be >= 1");
  require(cfg.objective_tol > 0.0, "objective_tol must be positive");
  require(cfg.penalty.alpha > 0.0 && std::isfinite(cfg.penalty.alpha), "alpha must be positive");
  if (cfg.data.size() != cfg.op.range_dim()) {
    throw DomainError("data has dimension " + std::to_string(cfg.data.size()) + " but operator range is " +
                      std::to_string(cfg.op.range_dim()));
  }
  require(cfg.data.allFinite(), "data has non-finite entries");
  if (cfg.bound_constraint) require(*cfg.bound_constraint > 0.0, "bound_constraint must be positive");
  require(cfg.initial_step > 0.0, "initial_step must be positive");
}

inline Vector exponents_for(const SolveConfig& cfg) {
  const Vector p = cfg.penalty.exponents.materialize(cfg.op.domain_dim());
  if (p.minCoeff() <= 0.0 || p.maxCoeff() > 2.0) throw DomainError("solver exponents must lie in (0, 2]");
  if (p.minCoeff() < kCoercivityFloor && !cfg.bound_constraint) {
    throw DomainError("exponents below 0.05 require an explicit bound_constraint");
  }
  return p;
}

inline double smooth_part(const SolveConfig& cfg, const Vector& x) {
  return 0.5 * (apply(cfg.op, x) - cfg.data).squaredNorm();
}

inline double residual_with(const SolveConfig& cfg, const Vector& p, const Vector& x) {
  const Vector g = apply_adjoint(cfg.op, apply(cfg.op, x) - cfg.data);
  double r = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    r = std::max(r, std::abs(g[k] + cfg.penalty.alpha * p[k] * sign(x[k]) * abs_pow(x[k], p[k] - 1.0)));
  }
  return r;
}

// Newton iteration for the stationarity equations on the support of x, where
// the objective is smooth. A step must keep every sign and must not raise
// the objective; the result is returned only if it ends no worse than x.
inline Vector refine_on_support(const SolveConfig& cfg, const Vector& p, const Vector& x) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (std::abs(x[k]) > kSupportThreshold) idx.push_back(k);
  }
  if (idx.empty()) return x;
  const auto s = static_cast<Eigen::Index>(idx.size());
  const Eigen::MatrixXd a = cfg.op.to_dense();
  Eigen::MatrixXd as(a.rows(), s);
  Vector z(s), ps(s), sigma(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    as.col(i) = a.col(idx[i]);
    z[i] = x[idx[i]];
    ps[i] = p[idx[i]];
    sigma[i] = sign(z[i]);
  }
  const double alpha = cfg.penalty.alpha;
  const Eigen::MatrixXd gram = as.transpose() * as;
  auto value = [&](const Vector& v) { return 0.5 * (as * v - cfg.data).squaredNorm() + alpha * fnorm(v, ps); };

  const double f_start = value(z);
  double fz = f_start;
  for (int it = 0; it < 50; ++it) {
    Vector g = as.transpose() * (as * z - cfg.data);
    Eigen::MatrixXd h = gram;
    for (Eigen::Index i = 0; i < s; ++i) {
      const double m = std::abs(z[i]);
      g[i] += alpha * ps[i] * sigma[i] * abs_pow(m, ps[i] - 1.0);
      h(i, i) += alpha * ps[i] * (ps[i] - 1.0) * abs_pow(m, ps[i] - 2.0);
    }
    if (g.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, z.cwiseAbs().maxCoeff())) break;
    const Vector d = h.ldlt().solve(-g);
    if (!d.allFinite() || g.dot(d) >= 0.0) break;
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const Vector trial = z + t * d;
      if ((trial.cwiseProduct(sigma).array() <= 0.0).any()) continue;
      const double ft = value(trial);
      if (ft <= fz) {
        moved = (trial - z).cwiseAbs().maxCoeff() > 0.0;
        z = trial;
        fz = ft;
        break;
      }
    }
    if (!moved) break;
  }
  if (!(fz <= f_start)) return x;
  Vector out = Vector::Zero(x.size());
  for (Eigen::Index i = 0; i < s; ++i) out[idx[i]] = z[i];
  return out;
}

}  // namespace detail

/// 1/2 ||A x - y||^2 + alpha F-norm(x).
inline double objective(const Vector& x, const SolveConfig& cfg) {
  return detail::smooth_part(cfg, x) + cfg.penalty.alpha * fnorm(x, cfg.penalty.exponents);
}

/// max_k |[A*(A x - y)]_k + alpha q_k sign(x_k) |x_k|^{q_k-1}|, which
/// vanishes exactly at the unique minimizer when every q_k > 1.
inline double optimality_residual(const Vector& x, const SolveConfig& cfg) {
  detail::validate(cfg);
  if (x.size() != cfg.op.domain_dim()) throw DomainError("optimality_residual: dimension mismatch");
  const Vector q = cfg.penalty.exponents.materialize(x.size());
  if (q.minCoeff() <= 1.0) throw DomainError("optimality_residual requires every exponent > 1");
  return detail::residual_with(cfg, q, x);
}

inline SolveReport solve(const SolveConfig& cfg) {
  detail::validate(cfg);
  const Vector p = detail::exponents_for(cfg);
  const bool convex = p.minCoeff() > 1.0;
  const double alpha = cfg.penalty.alpha;
  const Eigen::Index n = cfg.op.domain_dim();

  double gamma = cfg.initial_step;
  if (cfg.step_rule == StepRule::FixedSafe) {
    const double lip = operator_norm_sq(cfg.op, cfg.seed);
    if (!(lip > 0.0)) throw DomainError("FixedSafe step rule needs a nonzero operator norm");
    gamma = kFixedSafeFactor / lip;
  }

  Vector x = cfg.initial ? *cfg.initial : Vector::Zero(n);
  if (!cfg.initial && cfg.warm_start == WarmStart::L1 && !convex) {
    SolveConfig l1 = cfg;
    l1.penalty = PenaltySpec(ExponentSequence::constant(1.0), alpha);
    l1.warm_start = WarmStart::Zero;
    x = solve(l1).minimizer;
  }
  if (x.size() != n) throw DomainError("initial point has the wrong dimension");
  check_coefficients(x);

  auto full_objective = [&](const Vector& v, double smooth) {
    const double f = smooth + alpha * fnorm(v, p);
    if (!std::isfinite(f)) throw NumericalError("non-finite objective encountered");
    return f;
  };

  // One forward-backward step from `base`; backtracking shrinks gamma until
  // the quadratic model majorizes the smooth part at the new point.
  auto step_from = [&](const Vector& base, double& smooth_new) {
    const Vector residual = apply(cfg.op, base) - cfg.data;
    const Vector grad = apply_adjoint(cfg.op, residual);
    const double smooth_base = 0.5 * residual.squaredNorm();
    for (;;) {
      Vector next = prox_vector(base - gamma * grad, gamma * alpha, p, cfg.bound_constraint);
      smooth_new = detail::smooth_part(cfg, next);
      if (cfg.step_rule == StepRule::FixedSafe) return next;
      const Vector d = next - base;
      const double model = smooth_base + grad.dot(d) + d.squaredNorm() / (2.0 * gamma);
      if (smooth_new <= model + 1e-12 * std::max(1.0, std::abs(model))) return next;
      gamma *= kBacktrackShrink;
      if (gamma < 1e-300) throw NumericalError("backtracking step underflow");
    }
  };

  SolveReport report;
  double smooth = detail::smooth_part(cfg, x);
  double f = full_objective(x, smooth);
  report.objective_trace.push_back(f);

  if (convex && detail::residual_with(cfg, p, x) <= cfg.objective_tol) {
    report.converged = true;
  }

  Vector extrapolated = x;
  double momentum = 1.0;
  int small_changes = 0;
  int it = 0;
  while (!report.converged && it < cfg.max_iters) {
    ++it;
    double smooth_new = 0.0;
    Vector next = step_from(cfg.acceleration ? extrapolated : x, smooth_new);
    double f_new = full_objective(next, smooth_new);

    if (cfg.acceleration) {
      if (cfg.restart_on_increase && f_new > f) {
        momentum = 1.0;
        next = step_from(x, smooth_new);
        f_new = full_objective(next, smooth_new);
        extrapolated = next;
      } else {
        const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        extrapolated = next + ((momentum - 1.0) / momentum_next) * (next - x);
        momentum = momentum_next;
      }
    }

    const double change = std::abs(f - f_new) / std::max(std::abs(f), std::numeric_limits<double>::min());
    x = std::move(next);
    f = f_new;
    report.objective_trace.push_back(f);

    if (convex) {
      report.converged = detail::residual_with(cfg, p, x) <= cfg.objective_tol;
    } else {
      small_changes = change <= cfg.objective_tol ? small_changes + 1 : 0;
      report.converged = small_changes >= kObjectiveWindow;
    }
  }

  if (!convex && cfg.refine_support && !cfg.bound_constraint) {
    Vector refined = detail::refine_on_support(cfg, p, x);
    const double f_refined = full_objective(refined, detail::smooth_part(cfg, refined));
    if (f_refined <= f + 1e-14 * std::max(1.0, std::abs(f))) {
      if ((refined - x).cwiseAbs().maxCoeff() > 0.0) report.objective_trace.push_back(f_refined);
      x = std::move(refined);
      f = f_refined;
    }
  }

  report.minimizer = x;
  report.iterations_used = it;
  report.step_size = gamma;
  if (convex) report.optimality_residual = detail::residual_with(cfg, p, x);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::abs(x[k]) > kSupportThreshold) report.support.push_back(k);
  }
  return report;
}

/// Per-coordinate entry of a sparsity audit.
struct SupportBound {
  Eigen::Index index = 0;
  double value = 0.0;
  double exponent = 0.0;
  /// (alpha p_i / C)^{1/(1-p_i)}.
  double lower_bound = 0.0;
  /// |x_i| - lower_bound.
  double margin = 0.0;
  /// (alpha p_i / |g_i|)^{1/(1-p_i)}, which equals |x_i| at a stationary point.
  double stationary_magnitude = 0.0;
  /// p_i^{1/(1-p_i)}.
  double epsilon = 0.0;
};

struct SparsityAudit {
  /// max_i |[A*(A x - y)]_i|.
  double gradient_bound = 0.0;
  std::size_t support_size = 0;
  std::vector<SupportBound> entries;
  /// Every margin >= -margin_slack * lower_bound.
  bool passed = true;
  /// max_i | |x_i| - stationary_magnitude_i | / max(1, |x_i|).
  double max_stationarity_gap = 0.0;
  /// Support coordinates with 0 < |x_i| <= epsilon_i, and the bound
  /// ||A*(A x - y)||^2 / alpha^2 on their count.
  std::size_t small_count = 0;
  double small_count_bound = 0.0;
};

/// Checks the lower bound on nonzero coordinates of a sublinear-regime
/// stationary point. Requires every exponent < 1.
inline SparsityAudit sparsity_audit(const SolveReport& report, const SolveConfig& cfg, double margin_slack = 1e-8) {
  detail::validate(cfg);
  const Vector& x = report.minimizer;
  if (x.size() != cfg.op.domain_dim()) throw DomainError("sparsity_audit: dimension mismatch");
  const Vector p = cfg.penalty.exponents.materialize(x.size());
  if (p.maxCoeff() >= 1.0) throw DomainError("sparsity_audit requires every exponent < 1");
  const double alpha = cfg.penalty.alpha;

  const Vector g = apply_adjoint(cfg.op, apply(cfg.op, x) - cfg.data);
  SparsityAudit audit;
  audit.gradient_bound = g.cwiseAbs().maxCoeff();
  audit.small_count_bound = g.squaredNorm() / (alpha * alpha);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) <= kSupportThreshold) continue;
    SupportBound e;
    e.index = i;
    e.value = x[i];
    e.exponent = p[i];
    const double inv = 1.0 / (1.0 - p[i]);
    e.lower_bound = std::pow(alpha * p[i] / audit.gradient_bound, inv);
    e.margin = std::abs(x[i]) - e.lower_bound;
    e.stationary_magnitude = std::pow(alpha * p[i] / std::abs(g[i]), inv);
    e.epsilon = std::pow(p[i], inv);
    audit.passed = audit.passed && e.margin >= -margin_slack * e.lower_bound;
    audit.max_stationarity_gap =
        std::max(audit.max_stationarity_gap, std::abs(std::abs(x[i]) - e.stationary_magnitude) / std::max(1.0, std::abs(x[i])));
    if (std::abs(x[i]) <= e.epsilon) ++audit.small_count;
    audit.entries.push_back(e);
  }
  audit.support_size = audit.entries.size();
  return audit;
}

}  // namespace flexreg
