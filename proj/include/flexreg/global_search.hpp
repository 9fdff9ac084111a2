#pragma once

// Exhaustive-support search for the global minimizer of
//
//   1/2 ||A x - y||^2 + alpha sum_k |x_k|^{p_k}
//
// on small problems (n <= 12). A global minimizer with support S is a local
// minimizer of the restricted problem over the open orthant fixed by its
// signs, where the objective is smooth. For every support the restricted
// problem is searched by damped Newton from several starting points; the
// best point found over all supports (and x = 0) is returned.
//
// This is deliberately a different route from the forward-backward solver
// and is used to certify its output.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "flexreg/errors.hpp"
#include "flexreg/penalty.hpp"

namespace flexreg {

inline constexpr Eigen::Index kMaxExhaustiveDimension = 12;

struct GlobalMinimum {
  Vector minimizer;
  double objective = 0.0;
  std::vector<Eigen::Index> support;
  /// Restricted Newton runs that converged to an interior stationary point.
  int stationary_points = 0;
};

namespace detail {

struct Restricted {
  const Eigen::MatrixXd& gram;  // A_S^T A_S
  const Vector& rhs;            // A_S^T y
  double y_sq;                  // ||y||^2
  const Vector& p;              // exponents on S
  double alpha;

  double value(const Vector& z) const {
    double pen = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) pen += abs_pow(z[i], p[i]);
    return 0.5 * (z.dot(gram * z) - 2.0 * rhs.dot(z) + y_sq) + alpha * pen;
  }
};

// Damped Newton inside the orthant of z0. Returns false when the iterate
// drifts to the orthant boundary (a smaller support) or stalls.
inline bool restricted_newton(const Restricted& f, Vector& z) {
  const Eigen::Index s = z.size();
  const Vector sigma = z.cwiseSign();
  double fz = f.value(z);
  for (int it = 0; it < 200; ++it) {
    Vector grad = f.gram * z - f.rhs;
    Eigen::MatrixXd hess = f.gram;
    for (Eigen::Index i = 0; i < s; ++i) {
      const double a = std::abs(z[i]);
      grad[i] += f.alpha * f.p[i] * sigma[i] * std::pow(a, f.p[i] - 1.0);
      hess(i, i) += f.alpha * f.p[i] * (f.p[i] - 1.0) * std::pow(a, f.p[i] - 2.0);
    }
    const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
    if (grad.cwiseAbs().maxCoeff() <= 1e-13 * scale * std::max(1.0, f.gram.diagonal().maxCoeff())) return true;

    Vector dir;
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() == Eigen::Success) {
      dir = -llt.solve(grad);
      if (dir.dot(grad) >= 0.0) dir = -grad;
    } else {
      dir = -grad;
    }

    // Largest step keeping every coordinate strictly inside the orthant.
    double t = 1.0;
    for (Eigen::Index i = 0; i < s; ++i) {
      if (sigma[i] * dir[i] < 0.0) t = std::min(t, 0.99 * std::abs(z[i]) / std::abs(dir[i]));
    }
    const double slope = grad.dot(dir);
    bool accepted = false;
    while (t > 1e-16) {
      const Vector trial = z + t * dir;
      const double ft = f.value(trial);
      if (ft <= fz + 1e-4 * t * slope) {
        // Stall: the objective no longer changes in floating point.
        const bool stalled = (z - trial).cwiseAbs().maxCoeff() <= 1e-15 * scale;
        z = trial;
        fz = ft;
        accepted = true;
        if (stalled) return true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return false;
    if (z.cwiseAbs().minCoeff() <= 1e-14 * scale) return false;
  }
  return false;
}

}  // namespace detail

/// Global minimizer over all 2^n supports. `starts` random restarts are used
/// per support in addition to the least-squares start.
inline GlobalMinimum exhaustive_support_minimize(const Eigen::MatrixXd& a, const Vector& y, double alpha,
                                                 const Vector& p, std::uint64_t seed = 1, int starts = 4) {
  const Eigen::Index n = a.cols();
  if (n > kMaxExhaustiveDimension) throw DomainError("exhaustive support search is limited to n <= 12");
  if (y.size() != a.rows() || p.size() != n) throw DomainError("exhaustive search: dimension mismatch");
  detail::require(alpha > 0.0, "alpha must be positive");
  detail::require(p.minCoeff() > 0.0, "exponents must be positive");

  const Eigen::MatrixXd gram_full = a.transpose() * a;
  const Vector rhs_full = a.transpose() * y;
  const double y_sq = y.squaredNorm();

  GlobalMinimum best;
  best.minimizer = Vector::Zero(n);
  best.objective = 0.5 * y_sq;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  const std::uint32_t count = 1u << n;
  for (std::uint32_t mask = 1; mask < count; ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (mask & (1u << k)) idx.push_back(k);
    }
    const auto s = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd gram(s, s);
    Vector rhs(s), ps(s);
    Eigen::MatrixXd as(a.rows(), s);
    for (Eigen::Index i = 0; i < s; ++i) {
      rhs[i] = rhs_full[idx[i]];
      ps[i] = p[idx[i]];
      as.col(i) = a.col(idx[i]);
      for (Eigen::Index j = 0; j < s; ++j) gram(i, j) = gram_full(idx[i], idx[j]);
    }
    const detail::Restricted f{gram, rhs, y_sq, ps, alpha};

    const Vector ls = as.colPivHouseholderQr().solve(y);
    const double mag = std::max(ls.cwiseAbs().maxCoeff(), 1e-3);
    std::vector<Vector> seeds;
    Vector z0 = ls;
    for (auto& v : z0) {
      if (std::abs(v) < 1e-3 * mag) v = (v < 0.0 ? -1e-3 : 1e-3) * mag;
    }
    seeds.push_back(z0);
    for (int r = 0; r < starts; ++r) {
      Vector z(s);
      for (auto& v : z) {
        v = normal(rng) * mag;
        if (std::abs(v) < 1e-3 * mag) v = 1e-3 * mag;
      }
      seeds.push_back(z);
    }

    for (Vector z : seeds) {
      if (!detail::restricted_newton(f, z)) continue;
      ++best.stationary_points;
      const double value = f.value(z);
      if (value < best.objective) {
        best.objective = value;
        best.minimizer.setZero();
        for (Eigen::Index i = 0; i < s; ++i) best.minimizer[idx[i]] = z[i];
      }
    }
  }
  best.objective = 0.5 * (a * best.minimizer - y).squaredNorm() + alpha * fnorm(best.minimizer, p);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (best.minimizer[k] != 0.0) best.support.push_back(k);
  }
  return best;
}

}  // namespace flexreg
