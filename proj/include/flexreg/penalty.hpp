#pragma once

// The F-norm sum_k |x_k|^{p_k} and the quantities derived from it.
//
// Every function comes in two flavours: one taking an ExponentSequence
// (materialized to the vector length) and one taking the exponent values
// directly, which is what the solvers use in their inner loops.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "flexreg/errors.hpp"
#include "flexreg/exponents.hpp"

namespace flexreg {

using Vector = Eigen::VectorXd;

/// Magnitudes at or below this are treated as exact zeros by abs_pow.
inline constexpr double kZeroFloor = 1e-300;

/// |t|^p for p > 0 with |0|^p = 0, computed as exp(p log|t|).
inline double abs_pow(double t, double p) {
  const double a = std::abs(t);
  if (a <= kZeroFloor) return 0.0;
  return std::exp(p * std::log(a));
}

inline double sign(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

/// Regularization weight paired with the exponents.
struct PenaltySpec {
  ExponentSequence exponents = ExponentSequence::one_plus_inv_k();
  double alpha = 1.0;

  PenaltySpec() = default;
  PenaltySpec(ExponentSequence e, double a) : exponents(std::move(e)), alpha(a) {
    detail::require(std::isfinite(a) && a > 0.0, "regularization weight alpha must be positive");
  }
};

/// Throws unless x is a valid coefficient vector (n >= 1, finite entries).
template <typename Derived>
void check_coefficients(const Eigen::MatrixBase<Derived>& x) {
  detail::require(x.size() >= 1, "coefficient vector must have at least one entry");
  detail::require(x.allFinite(), "coefficient vector has non-finite entries");
}

namespace detail {

template <typename A, typename B>
void require_same_size(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.size() != b.size()) {
    throw DomainError(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

template <typename Derived, typename DerivedP>
double fnorm(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<DerivedP>& p) {
  detail::require_same_size(x, p, "fnorm");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) sum += abs_pow(x[k], p[k]);
  return sum;
}

template <typename Derived>
double fnorm(const Eigen::MatrixBase<Derived>& x, const ExponentSequence& exponents) {
  return fnorm(x, exponents.materialize(x.size()));
}

/// d(x, y) = sum |x_k - y_k|^{p_k}.
template <typename DX, typename DY, typename DerivedP>
double fmetric(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y, const Eigen::MatrixBase<DerivedP>& p) {
  detail::require_same_size(x, y, "fmetric");
  return fnorm(x - y, p);
}

template <typename DX, typename DY>
double fmetric(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y, const ExponentSequence& exponents) {
  detail::require_same_size(x, y, "fmetric");
  return fnorm(x - y, exponents.materialize(x.size()));
}

/// Gradient {q_k |x_k|^{q_k-1} sign(x_k)}; defined only for q_k > 1.
template <typename Derived, typename DerivedP>
Vector penalty_gradient(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<DerivedP>& q) {
  detail::require_same_size(x, q, "penalty_gradient");
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!(q[k] > 1.0)) {
      throw DomainError("penalty_gradient requires q_k > 1 (index " + std::to_string(k) + ")");
    }
    g[k] = q[k] * abs_pow(x[k], q[k] - 1.0) * sign(x[k]);
  }
  return g;
}

template <typename Derived>
Vector penalty_gradient(const Eigen::MatrixBase<Derived>& x, const ExponentSequence& exponents) {
  return penalty_gradient(x, exponents.materialize(x.size()));
}

/// Bregman distance of the F-norm, for 1 < q_k <= 2. Each coordinate term
/// is nonnegative by convexity; rounding below zero is clamped away.
template <typename DX, typename DY, typename DerivedP>
double bregman_distance(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y,
                        const Eigen::MatrixBase<DerivedP>& q) {
  detail::require_same_size(x, y, "bregman_distance");
  detail::require_same_size(x, q, "bregman_distance");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!(q[k] > 1.0 && q[k] <= 2.0)) {
      throw DomainError("bregman_distance requires 1 < q_k <= 2 (index " + std::to_string(k) + ")");
    }
    const double grad = q[k] * abs_pow(y[k], q[k] - 1.0) * sign(y[k]);
    const double term = abs_pow(x[k], q[k]) - abs_pow(y[k], q[k]) - grad * (x[k] - y[k]);
    sum += std::max(term, 0.0);
  }
  return sum;
}

template <typename DX, typename DY>
double bregman_distance(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y,
                        const ExponentSequence& exponents) {
  return bregman_distance(x, y, exponents.materialize(x.size()));
}

/// sqrt(sum (q_k - 1) x_k^2), the weighted l^2 norm with weights q_k - 1 >= 0.
template <typename Derived, typename DerivedP>
double weighted_l2_norm(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<DerivedP>& q) {
  detail::require_same_size(x, q, "weighted_l2_norm");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (q[k] < 1.0) throw DomainError("weighted_l2_norm requires q_k >= 1 (index " + std::to_string(k) + ")");
    sum += (q[k] - 1.0) * x[k] * x[k];
  }
  return std::sqrt(sum);
}

template <typename Derived>
double weighted_l2_norm(const Eigen::MatrixBase<Derived>& x, const ExponentSequence& exponents) {
  return weighted_l2_norm(x, exponents.materialize(x.size()));
}

}  // namespace flexreg
