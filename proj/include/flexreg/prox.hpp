#pragma once

// Proximal map of t -> alpha |t|^p for p in (0, 2]:
//
//   prox(t) = argmin_u  1/2 (u - t)^2 + alpha |u|^p.
//
// p = 1 and p = 2 have closed forms. Otherwise a nonzero minimizer u > 0
// (for t > 0, sign restored afterwards) solves the stationarity equation
//
//   g(u) = u + alpha p u^{p-1} - |t| = 0.
//
// For 1 < p < 2, g is increasing and concave on (0, |t|] with g(0+) < 0 <
// g(|t|), so there is exactly one root. For 0 < p < 1, g is convex with its
// minimum at u_infl = (alpha p (1-p))^{1/(2-p)}; the local minimizer of the
// objective is the larger root, which must still beat u = 0.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "flexreg/errors.hpp"
#include "flexreg/exponents.hpp"
#include "flexreg/penalty.hpp"

namespace flexreg {

enum class ProxBranch {
  Zero,
  Interior,
  SoftThreshold,
  ClosedFormQuadratic,
  /// Only produced by the bound-constrained variant: |u| = bound.
  BoundActive,
};

inline const char* to_string(ProxBranch b) {
  switch (b) {
    case ProxBranch::Zero: return "Zero";
    case ProxBranch::Interior: return "Interior";
    case ProxBranch::SoftThreshold: return "SoftThreshold";
    case ProxBranch::ClosedFormQuadratic: return "ClosedFormQuadratic";
    case ProxBranch::BoundActive: return "BoundActive";
  }
  return "?";
}

struct ProxResult {
  double minimizer = 0.0;
  double objective_value = 0.0;
  int newton_iterations = 0;
  ProxBranch branch = ProxBranch::Zero;
};

inline constexpr int kProxMaxIterations = 200;
inline constexpr double kProxTolerance = 1e-12;
inline constexpr double kProxTieTolerance = 1e-14;

/// 1/2 (u - t)^2 + alpha |u|^p.
inline double prox_objective(double u, double t, double alpha, double p) {
  const double d = u - t;
  return 0.5 * d * d + alpha * abs_pow(u, p);
}

namespace detail {

inline void check_prox_arguments(double alpha, double p) {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw DomainError("prox: alpha must be positive and finite");
  if (!(p > 0.0 && p <= 2.0)) throw DomainError("prox: exponent p must lie in (0, 2]");
}

struct Root {
  double u;
  int iterations;
};

// Root of g(u) = u + alpha p u^{p-1} - a inside (lo, hi) with g(lo) <= 0 <
// g(hi) and g increasing on the bracket. Newton steps leaving the bracket
// are replaced by bisection.
inline Root stationary_root(double a, double alpha, double p, double lo, double hi, double u) {
  const double tol = kProxTolerance * std::max(1.0, a);
  const double ap = alpha * p;
  if (!(u > lo && u < hi)) u = 0.5 * (lo + hi);
  for (int it = 0; it <= kProxMaxIterations; ++it) {
    const double u_pm2 = std::pow(u, p - 2.0);
    const double g = u + ap * u * u_pm2 - a;
    if (std::abs(g) <= tol) return {u, it};
    if (g > 0.0) {
      hi = u;
    } else {
      lo = u;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return {u, it};
    const double dg = 1.0 + ap * (p - 1.0) * u_pm2;
    double next = u - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    u = next;
  }
  throw NumericalError("prox: Newton iteration cap exceeded");
}

}  // namespace detail

/// Global minimizer of 1/2 (u - t)^2 + alpha |u|^p. When p < 1 and zero ties
/// the interior candidate (within kProxTieTolerance), zero is selected.
inline ProxResult prox_scalar(double t, double alpha, double p) {
  detail::check_prox_arguments(alpha, p);
  if (!std::isfinite(t)) throw DomainError("prox: t must be finite");

  ProxResult out;
  const double a = std::abs(t);
  const double s = sign(t);
  auto finish = [&](double u, ProxBranch branch) {
    out.minimizer = u;
    out.branch = u == 0.0 ? ProxBranch::Zero : branch;
    out.objective_value = prox_objective(u, t, alpha, p);
    return out;
  };

  if (p == 2.0) return finish(t / (1.0 + 2.0 * alpha), ProxBranch::ClosedFormQuadratic);
  if (p == 1.0) return finish(s * std::max(a - alpha, 0.0), ProxBranch::SoftThreshold);
  if (a == 0.0) return finish(0.0, ProxBranch::Zero);

  if (p > 1.0) {
    const auto root = detail::stationary_root(a, alpha, p, 0.0, a, a);
    out.newton_iterations = root.iterations;
    return finish(s * root.u, ProxBranch::Interior);
  }

  const double u_infl = std::pow(alpha * p * (1.0 - p), 1.0 / (2.0 - p));
  if (u_infl >= a) return finish(0.0, ProxBranch::Zero);
  const double g_infl = u_infl + alpha * p * std::pow(u_infl, p - 1.0) - a;
  if (g_infl > 0.0) return finish(0.0, ProxBranch::Zero);

  double u_star = u_infl;
  if (g_infl < 0.0) {
    const double start = std::max(u_infl, a - alpha * p * std::pow(a, p - 1.0));
    const auto root = detail::stationary_root(a, alpha, p, u_infl, a, start);
    out.newton_iterations = root.iterations;
    u_star = root.u;
  }
  const double f_zero = 0.5 * a * a;
  const double f_star = prox_objective(u_star, a, alpha, p);
  if (f_star - f_zero >= -kProxTieTolerance * std::max(1.0, f_zero)) return finish(0.0, ProxBranch::Zero);
  return finish(s * u_star, ProxBranch::Interior);
}

/// prox_scalar restricted to |u| <= bound.
inline ProxResult prox_scalar_bounded(double t, double alpha, double p, double bound) {
  if (!(bound > 0.0)) throw DomainError("prox: bound must be positive");
  ProxResult r = prox_scalar(t, alpha, p);
  if (std::abs(r.minimizer) <= bound) return r;
  // Past the unconstrained minimizer the objective increases for p >= 1, so
  // the clamp is exact. For p < 1 the restricted minimum sits at 0 or at the
  // bound.
  const double edge = sign(t) * bound;
  const double f_edge = prox_objective(edge, t, alpha, p);
  if (p < 1.0) {
    const double f_zero = 0.5 * t * t;
    if (f_edge - f_zero >= -kProxTieTolerance * std::max(1.0, f_zero)) {
      return {0.0, f_zero, r.newton_iterations, ProxBranch::Zero};
    }
  }
  return {edge, f_edge, r.newton_iterations, ProxBranch::BoundActive};
}

/// Coordinatewise prox with per-coordinate exponents p_k.
template <typename DX, typename DP>
Vector prox_vector(const Eigen::MatrixBase<DX>& x, double alpha, const Eigen::MatrixBase<DP>& p,
                   std::optional<double> bound = std::nullopt) {
  detail::require_same_size(x, p, "prox_vector");
  Vector out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    try {
      out[k] = bound ? prox_scalar_bounded(x[k], alpha, p[k], *bound).minimizer : prox_scalar(x[k], alpha, p[k]).minimizer;
    } catch (const DomainError& e) {
      throw DomainError("index " + std::to_string(k) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("index " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

template <typename DX>
Vector prox_vector(const Eigen::MatrixBase<DX>& x, double alpha, const ExponentSequence& exponents,
                   std::optional<double> bound = std::nullopt) {
  return prox_vector(x, alpha, exponents.materialize(x.size()), bound);
}

}  // namespace flexreg
