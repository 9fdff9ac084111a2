#pragma once

// Exponent sequences k -> p_k and the decision procedure for whether the
// variable-exponent space they generate coincides with l^1.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flexreg/errors.hpp"

namespace flexreg {

enum class Family {
  Constant,
  OnePlusInvK,
  OnePlusInvLogK,
  OnePlusInvLogKAlpha,
  OnePlusGeometric,
  Tabulated,
};

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Constant: return "Constant";
    case Family::OnePlusInvK: return "OnePlusInvK";
    case Family::OnePlusInvLogK: return "OnePlusInvLogK";
    case Family::OnePlusInvLogKAlpha: return "OnePlusInvLogKAlpha";
    case Family::OnePlusGeometric: return "OnePlusGeometric";
    case Family::Tabulated: return "Tabulated";
  }
  return "?";
}

/// A rule k -> p_k (k >= 1) drawn from a fixed set of families.
///
/// The log-based families evaluate 1 + 1/log(k + offset)^a, so every
/// offset >= 1 keeps the logarithm positive; the default offset 2 also keeps
/// p_1 below 2. A q_k -> 1 family may be flagged reciprocal, in which case
/// it evaluates 1/q_k; this is the p_k = 1/q_k duality used to move between
/// the superlinear and sublinear regimes.
class ExponentSequence {
 public:
  static ExponentSequence constant(double p) {
    detail::require(std::isfinite(p) && p > 0.0, "constant exponent must be positive and finite");
    ExponentSequence s(Family::Constant);
    s.p_ = p;
    return s;
  }

  static ExponentSequence one_plus_inv_k() { return ExponentSequence(Family::OnePlusInvK); }

  static ExponentSequence one_plus_inv_log_k(int offset = 2) {
    detail::require(offset >= 1, "offset must be >= 1");
    ExponentSequence s(Family::OnePlusInvLogK);
    s.offset_ = offset;
    return s;
  }

  static ExponentSequence one_plus_inv_log_k_alpha(double alpha, int offset = 2) {
    detail::require(alpha > 0.0 && alpha < 1.0, "log exponent alpha must lie in (0, 1)");
    detail::require(offset >= 1, "offset must be >= 1");
    ExponentSequence s(Family::OnePlusInvLogKAlpha);
    s.alpha_ = alpha;
    s.offset_ = offset;
    return s;
  }

  static ExponentSequence one_plus_geometric(double c, double r) {
    detail::require(std::isfinite(c) && c > 0.0, "geometric scale c must be positive");
    detail::require(r > 0.0 && r < 1.0, "geometric ratio r must lie in (0, 1)");
    ExponentSequence s(Family::OnePlusGeometric);
    s.c_ = c;
    s.r_ = r;
    return s;
  }

  /// Finite prefix plus a tail value used for every k past the prefix.
  /// `exact_tail` asserts that the sequence really is constant past the
  /// prefix, which lets the classifier decide it.
  static ExponentSequence tabulated(std::vector<double> values, double tail, bool exact_tail = false) {
    for (double v : values) {
      detail::require(std::isfinite(v) && v > 0.0, "tabulated exponents must be positive and finite");
    }
    detail::require(std::isfinite(tail) && tail > 0.0, "tabulated tail must be positive and finite");
    ExponentSequence s(Family::Tabulated);
    s.values_ = std::move(values);
    s.p_ = tail;
    s.exact_tail_ = exact_tail;
    return s;
  }

  /// The sequence 1/p_k. Constant and tabulated sequences are inverted
  /// in place; the q_k -> 1 families carry a flag.
  ExponentSequence reciprocal() const {
    ExponentSequence s = *this;
    switch (family_) {
      case Family::Constant:
        s.p_ = 1.0 / p_;
        break;
      case Family::Tabulated:
        for (double& v : s.values_) v = 1.0 / v;
        s.p_ = 1.0 / p_;
        break;
      default:
        s.reciprocal_ = !reciprocal_;
    }
    return s;
  }

  Family family() const { return family_; }
  bool is_reciprocal() const { return reciprocal_; }
  bool is_symbolic() const { return family_ != Family::Tabulated; }
  int offset() const { return offset_; }

  /// Constant value, or the tail of a tabulated sequence.
  double p() const { return p_; }
  double tail() const { return p_; }
  double alpha() const { return alpha_; }
  double c() const { return c_; }
  double r() const { return r_; }
  const std::vector<double>& values() const { return values_; }
  bool exact_tail() const { return exact_tail_; }

  /// p_k for k >= 1.
  double operator()(std::int64_t k) const {
    detail::require(k >= 1, "exponent index must be >= 1");
    const double base = base_value(k);
    return reciprocal_ ? 1.0 / base : base;
  }

  /// Entry i holds p_{i+1}.
  Eigen::VectorXd materialize(Eigen::Index n) const {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = (*this)(static_cast<std::int64_t>(i) + 1);
    return out;
  }

  double inf_p() const { return reciprocal_ ? 1.0 / base_sup() : base_inf(); }
  double sup_p() const { return reciprocal_ ? 1.0 / base_inf() : base_sup(); }
  double limit_p() const {
    const double lim = family_ == Family::Constant || family_ == Family::Tabulated ? p_ : 1.0;
    return reciprocal_ ? 1.0 / lim : lim;
  }

  friend bool operator==(const ExponentSequence&, const ExponentSequence&) = default;

 private:
  explicit ExponentSequence(Family f) : family_(f) {}

  double log_term(std::int64_t k) const {
    return std::log(static_cast<double>(k) + static_cast<double>(offset_));
  }

  double base_value(std::int64_t k) const {
    switch (family_) {
      case Family::Constant:
        return p_;
      case Family::OnePlusInvK:
        return 1.0 + 1.0 / static_cast<double>(k);
      case Family::OnePlusInvLogK:
        return 1.0 + 1.0 / log_term(k);
      case Family::OnePlusInvLogKAlpha:
        return 1.0 + 1.0 / std::pow(log_term(k), alpha_);
      case Family::OnePlusGeometric:
        return 1.0 + c_ * std::pow(r_, static_cast<double>(k));
      case Family::Tabulated:
        return static_cast<std::size_t>(k) <= values_.size() ? values_[static_cast<std::size_t>(k) - 1] : p_;
    }
    return p_;
  }

  double base_inf() const {
    switch (family_) {
      case Family::Constant: return p_;
      case Family::Tabulated: {
        double m = p_;
        for (double v : values_) m = std::min(m, v);
        return m;
      }
      default: return 1.0;
    }
  }

  double base_sup() const {
    switch (family_) {
      case Family::Constant: return p_;
      case Family::Tabulated: {
        double m = p_;
        for (double v : values_) m = std::max(m, v);
        return m;
      }
      default: return base_value(1);  // q -> 1 families decrease in k
    }
  }

  Family family_;
  double p_ = 1.0;
  double alpha_ = 0.5;
  double c_ = 1.0;
  double r_ = 0.5;
  int offset_ = 2;
  std::vector<double> values_;
  bool exact_tail_ = false;
  bool reciprocal_ = false;
};

inline double eval_exponent(const ExponentSequence& seq, std::int64_t k) { return seq(k); }

enum class Verdict { EqualToL1, StrictlyLargerThanL1, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::EqualToL1: return "EqualToL1";
    case Verdict::StrictlyLargerThanL1: return "StrictlyLargerThanL1";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

struct PartialSum {
  int N = 0;
  double partial_sum = 0.0;
};

struct SpaceClassification {
  Verdict verdict = Verdict::Inconclusive;
  std::optional<int> witness_N;
  /// Number of terms summed for every diagnostic entry.
  std::int64_t cutoff = 0;
  std::vector<PartialSum> diagnostic;
};

enum class Regime { Superlinear, Sublinear };

inline constexpr int kMaxWitness = 64;
inline constexpr std::int64_t kDiagnosticCutoff = 100000;
inline constexpr std::array<int, 7> kDiagnosticBases = {2, 3, 4, 8, 16, 32, 64};

/// One term of the series deciding l^{p_k} = l^1: N^{-1/(q_k-1)} in the
/// superlinear regime, N^{pi_k} with pi_k = p_k/(p_k-1) in the sublinear
/// one. Exponent 1 maps to N^{-inf} = 0.
inline double series_term(const ExponentSequence& seq, Regime regime, int N, std::int64_t k) {
  const double p = seq(k);
  if (p == 1.0) return 0.0;
  const double power = regime == Regime::Superlinear ? -1.0 / (p - 1.0) : p / (p - 1.0);
  return std::exp(power * std::log(static_cast<double>(N)));
}

inline double partial_sum(const ExponentSequence& seq, Regime regime, int N, std::int64_t cutoff) {
  double sum = 0.0;
  for (std::int64_t k = 1; k <= cutoff; ++k) sum += series_term(seq, regime, N, k);
  return sum;
}

namespace detail {

// Analytic convergence of sum_k N^{-1/(q_k-1)} for the q_k -> 1 families.
inline bool q_family_series_converges(const ExponentSequence& q, int N) {
  switch (q.family()) {
    case Family::OnePlusInvK:  // sum N^{-k}
    case Family::OnePlusGeometric:  // sum N^{-r^{-k}/c}, super-geometric decay
      return N > 1;
    case Family::OnePlusInvLogK:  // sum (k+offset)^{-log N}
      return std::log(static_cast<double>(N)) > 1.0;
    case Family::OnePlusInvLogKAlpha:  // Cauchy condensation: 2^j N^{-(j log 2)^alpha} diverges
      return false;
    default:
      return false;
  }
}

// Constant exponent p: the terms are all zero when p == 1 and a positive
// constant otherwise.
inline bool constant_series_converges(double p) { return p == 1.0; }

inline std::optional<bool> series_converges(const ExponentSequence& seq, int N) {
  switch (seq.family()) {
    case Family::Constant:
      return constant_series_converges(seq.p());
    case Family::Tabulated:
      if (!seq.exact_tail()) return std::nullopt;
      return constant_series_converges(seq.tail());
    default:
      // Superlinear q and sublinear 1/q produce identical terms.
      return q_family_series_converges(seq, N);
  }
}

inline SpaceClassification classify(const ExponentSequence& seq, Regime regime) {
  SpaceClassification out;
  out.cutoff = kDiagnosticCutoff;

  std::optional<int> witness;
  bool decided = true;
  for (int N = 2; N <= kMaxWitness; ++N) {
    const auto converges = series_converges(seq, N);
    if (!converges) {
      decided = false;
      break;
    }
    if (*converges) {
      witness = N;
      break;
    }
  }

  std::vector<int> bases(kDiagnosticBases.begin(), kDiagnosticBases.end());
  if (witness && std::find(bases.begin(), bases.end(), *witness) == bases.end()) {
    bases.insert(std::upper_bound(bases.begin(), bases.end(), *witness), *witness);
  }
  for (int N : bases) out.diagnostic.push_back({N, partial_sum(seq, regime, N, out.cutoff)});

  if (!decided) {
    out.verdict = Verdict::Inconclusive;
  } else if (witness) {
    out.verdict = Verdict::EqualToL1;
    out.witness_N = witness;
  } else {
    out.verdict = Verdict::StrictlyLargerThanL1;
  }
  return out;
}

}  // namespace detail

/// Decides l^{q_k} = l^1 for q_k >= 1 via sum_k N^{-1/(q_k-1)} < inf.
inline SpaceClassification classify_superlinear(const ExponentSequence& seq) {
  if (seq.inf_p() < 1.0) {
    throw DomainError("classify_superlinear requires inf p_k >= 1; use classify_sublinear");
  }
  return detail::classify(seq, Regime::Superlinear);
}

/// Decides l^{p_k} = l^1 for 0 < p_k <= 1 via sum_k N^{pi_k} < inf.
inline SpaceClassification classify_sublinear(const ExponentSequence& seq) {
  if (seq.sup_p() > 1.0) {
    throw DomainError("classify_sublinear requires sup p_k <= 1; use classify_superlinear");
  }
  return detail::classify(seq, Regime::Sublinear);
}

}  // namespace flexreg
