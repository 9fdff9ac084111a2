#pragma once

// Finite-dimensional forward operators A and their adjoints.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <type_traits>
#include <variant>

#include "flexreg/errors.hpp"
#include "flexreg/penalty.hpp"

namespace flexreg {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

enum class OperatorKind { DenseMatrix, Diagonal, Identity };

class LinearOperator {
 public:
  struct Dense {
    Eigen::MatrixXd matrix;
  };
  struct Diag {
    Vector diagonal;
  };
  struct Ident {
    Eigen::Index n;
  };

  static LinearOperator dense(Eigen::MatrixXd matrix) {
    detail::require(matrix.rows() >= 1 && matrix.cols() >= 1, "dense operator must be non-empty");
    detail::require(matrix.allFinite(), "dense operator has non-finite entries");
    return LinearOperator(Dense{std::move(matrix)});
  }
  static LinearOperator diagonal(Vector d) {
    detail::require(d.size() >= 1, "diagonal operator must be non-empty");
    detail::require(d.allFinite(), "diagonal operator has non-finite entries");
    return LinearOperator(Diag{std::move(d)});
  }
  static LinearOperator identity(Eigen::Index n) {
    detail::require(n >= 1, "identity operator dimension must be >= 1");
    return LinearOperator(Ident{n});
  }

  OperatorKind kind() const { return static_cast<OperatorKind>(repr_.index()); }
  const std::variant<Dense, Diag, Ident>& representation() const { return repr_; }

  Eigen::Index domain_dim() const {
    return std::visit(
        [](const auto& r) -> Eigen::Index {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Dense>) return r.matrix.cols();
          else if constexpr (std::is_same_v<T, Diag>) return r.diagonal.size();
          else return r.n;
        },
        repr_);
  }

  Eigen::Index range_dim() const {
    if (const auto* d = std::get_if<Dense>(&repr_)) return d->matrix.rows();
    return domain_dim();
  }

  Eigen::MatrixXd to_dense() const {
    return std::visit(
        [](const auto& r) -> Eigen::MatrixXd {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Dense>) return r.matrix;
          else if constexpr (std::is_same_v<T, Diag>) return r.diagonal.asDiagonal();
          else return Eigen::MatrixXd::Identity(r.n, r.n);
        },
        repr_);
  }

 private:
  explicit LinearOperator(std::variant<Dense, Diag, Ident> r) : repr_(std::move(r)) {}
  std::variant<Dense, Diag, Ident> repr_;
};

/// y = A x.
inline Vector apply(const LinearOperator& op, const Eigen::Ref<const Vector>& x) {
  if (x.size() != op.domain_dim()) {
    throw DomainError("apply: operator domain has dimension " + std::to_string(op.domain_dim()) + ", got " +
                      std::to_string(x.size()));
  }
  return std::visit(
      [&](const auto& r) -> Vector {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, LinearOperator::Dense>) return r.matrix * x;
        else if constexpr (std::is_same_v<T, LinearOperator::Diag>) return r.diagonal.cwiseProduct(x);
        else return x;
      },
      op.representation());
}

/// A* r. All operators are real, so the adjoint is the transpose.
inline Vector apply_adjoint(const LinearOperator& op, const Eigen::Ref<const Vector>& r) {
  if (r.size() != op.range_dim()) {
    throw DomainError("apply_adjoint: operator range has dimension " + std::to_string(op.range_dim()) + ", got " +
                      std::to_string(r.size()));
  }
  return std::visit(
      [&](const auto& rep) -> Vector {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, LinearOperator::Dense>) return rep.matrix.transpose() * r;
        else if constexpr (std::is_same_v<T, LinearOperator::Diag>) return rep.diagonal.cwiseProduct(r);
        else return r;
      },
      op.representation());
}

inline constexpr int kPowerIterationCap = 10000;
inline constexpr double kPowerIterationTol = 1e-6;

/// ||A||^2. Identity and diagonal operators are exact; dense operators use
/// power iteration on A^T A from a seeded Gaussian start, stopping when the
/// Rayleigh quotient moves by less than kPowerIterationTol (relative).
inline double operator_norm_sq(const LinearOperator& op, std::uint64_t seed = kDefaultSeed) {
  if (op.kind() == OperatorKind::Identity) return 1.0;
  if (const auto* d = std::get_if<LinearOperator::Diag>(&op.representation())) {
    return d->diagonal.cwiseAbs2().maxCoeff();
  }
  const auto& a = std::get<LinearOperator::Dense>(op.representation()).matrix;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(a.cols());
  for (auto& vi : v) vi = normal(rng);
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < kPowerIterationCap; ++it) {
    const Vector w = a.transpose() * (a * v);
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(next - lambda) <= kPowerIterationTol * next) return next;
    lambda = next;
  }
  return lambda;
}

/// Seeded m x n Gaussian matrix with N(0, 1/m) entries.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  detail::require(rows >= 1 && cols >= 1, "gaussian matrix dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(rows)));
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = normal(rng);
  }
  return a;
}

}  // namespace flexreg
