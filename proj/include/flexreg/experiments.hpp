#pragma once

// Noise sweeps that measure reconstruction error against the a-priori error
// bounds, for the convex (1 < q_k <= 2) and sublinear (0 < p_k <= 1)
// penalties, plus CSV/JSON report emission.

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexreg/errors.hpp"
#include "flexreg/exponents.hpp"
#include "flexreg/global_search.hpp"
#include "flexreg/operators.hpp"
#include "flexreg/penalty.hpp"
#include "flexreg/solver.hpp"

namespace flexreg {

struct AlphaRule {
  enum class Kind { ProportionalToDelta, ProportionalToDeltaSq, Explicit };
  Kind kind = Kind::ProportionalToDelta;
  double c = 1.0;
  std::vector<double> values;

  double alpha_for(std::size_t delta_index, double delta) const {
    double alpha = 0.0;
    switch (kind) {
      case Kind::ProportionalToDelta: alpha = c * delta; break;
      case Kind::ProportionalToDeltaSq: alpha = c * delta * delta; break;
      case Kind::Explicit: alpha = values.at(delta_index); break;
    }
    if (!(alpha > 0.0 && std::isfinite(alpha))) {
      throw DomainError("alpha rule produced a non-positive alpha at delta index " + std::to_string(delta_index));
    }
    return alpha;
  }
};

/// Either explicit values or a seeded random vector with `support_size`
/// nonzeros of magnitude in [min_magnitude, max_magnitude] and random sign.
struct TrueSolutionSpec {
  std::optional<Vector> values;
  Eigen::Index support_size = 3;
  std::uint64_t seed = 1;
  double min_magnitude = 0.5;
  double max_magnitude = 1.5;

  Vector realize(Eigen::Index n) const {
    if (values) {
      if (values->size() != n) throw DomainError("true solution has the wrong dimension");
      return *values;
    }
    detail::require(support_size >= 0 && support_size <= n, "support_size must lie in [0, n]");
    detail::require(0.0 < min_magnitude && min_magnitude <= max_magnitude, "bad magnitude range");
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::uniform_real_distribution<double> mag(min_magnitude, max_magnitude);
    std::bernoulli_distribution coin(0.5);
    Vector x = Vector::Zero(n);
    for (Eigen::Index i = 0; i < support_size; ++i) {
      const double m = mag(rng);
      x[idx[static_cast<std::size_t>(i)]] = coin(rng) ? m : -m;
    }
    return x;
  }
};

/// Solver settings used for every solve of a sweep. An absent tolerance
/// defaults per regime (residual 1e-10 convex, relative change 1e-15
/// otherwise).
struct SweepSolverSettings {
  int max_iters = 200000;
  std::optional<double> objective_tol;
  StepRule step_rule = StepRule::FixedSafe;
  bool acceleration = true;
  bool restart_on_increase = true;
  std::optional<double> bound_constraint;
  std::uint64_t seed = kDefaultSeed;
  WarmStart warm_start = WarmStart::Zero;
};

struct RateConfig {
  LinearOperator op = LinearOperator::identity(1);
  TrueSolutionSpec true_solution;
  ExponentSequence exponents = ExponentSequence::one_plus_inv_k();
  std::vector<double> delta_grid;
  AlphaRule alpha_rule;
  std::uint64_t noise_seed = 1;
  int trials_per_delta = 3;
  SweepSolverSettings solver;
  /// Run the exhaustive-support search on sublinear sweeps with n <= 12.
  bool certify_global = true;
};

struct RateRecord {
  double delta = 0.0;
  double alpha = 0.0;
  double measured_error = 0.0;
  double bound_rhs = 0.0;
  bool satisfied = false;
  bool support_recovered = false;
  int trial = 0;
  bool converged = false;
  std::optional<bool> global_certified;
  /// F-norm of the regularized solution and of the true solution.
  double solution_penalty = 0.0;
  double truth_penalty = 0.0;

  friend bool operator==(const RateRecord&, const RateRecord&) = default;
};

struct RateSweep {
  std::vector<RateRecord> records;
  Vector truth;
  /// ||w|| of the source element (convex sweeps only).
  std::optional<double> source_norm;
  /// Least-squares slope of log(measured_error) against log(delta).
  double error_slope = 0.0;
  /// Sublinear sweeps: max of measured_error / (delta^2/alpha + alpha + delta)
  /// and the log-log slope of that ratio against delta.
  double c_fit = 0.0;
  double ratio_slope = 0.0;
  bool bounded = true;
};

inline constexpr double kSourceResidualTol = 1e-8;
inline constexpr double kRatioSlopeBand = 0.2;

/// Least-norm w with A* w = (q_k |x_k|^{q_k-1} sign(x_k))_k. Throws when
/// the residual exceeds kSourceResidualTol relative to the target.
inline Vector construct_source_element(const LinearOperator& op, const Vector& x_dag, const ExponentSequence& exponents) {
  if (x_dag.size() != op.domain_dim()) throw DomainError("source element: dimension mismatch");
  const Vector xi = penalty_gradient(x_dag, exponents);
  Vector w;
  switch (op.kind()) {
    case OperatorKind::Identity:
      w = xi;
      break;
    case OperatorKind::Diagonal: {
      const auto& d = std::get<LinearOperator::Diag>(op.representation()).diagonal;
      w = Vector::Zero(xi.size());
      for (Eigen::Index k = 0; k < xi.size(); ++k) {
        if (d[k] != 0.0) w[k] = xi[k] / d[k];
      }
      break;
    }
    case OperatorKind::DenseMatrix: {
      const auto& a = std::get<LinearOperator::Dense>(op.representation()).matrix;
      w = a.transpose().completeOrthogonalDecomposition().solve(xi);
      break;
    }
  }
  const double residual = (apply_adjoint(op, w) - xi).norm();
  if (residual > kSourceResidualTol * std::max(xi.norm(), std::numeric_limits<double>::min())) {
    throw DomainError("source condition not attainable: adjoint residual " + std::to_string(residual));
  }
  return w;
}

/// y = A x + delta * n / ||n|| with n standard normal from `rng`.
inline Vector synthesize_data(const LinearOperator& op, const Vector& x, double delta, std::mt19937_64& rng) {
  Vector y = apply(op, x);
  if (delta == 0.0) return y;
  std::normal_distribution<double> normal;
  Vector noise(y.size());
  for (auto& v : noise) v = normal(rng);
  return y + (delta / noise.norm()) * noise;
}

namespace detail {

inline void validate(const RateConfig& cfg) {
  require(!cfg.delta_grid.empty(), "delta_grid must not be empty");
  for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i) {
    require(std::isfinite(cfg.delta_grid[i]) && cfg.delta_grid[i] >= 0.0, "delta_grid entries must be >= 0");
    if (i > 0) require(cfg.delta_grid[i] < cfg.delta_grid[i - 1], "delta_grid must be strictly decreasing");
  }
  require(cfg.trials_per_delta >= 1, "trials_per_delta must be >= 1");
  if (cfg.alpha_rule.kind == AlphaRule::Kind::Explicit) {
    require(cfg.alpha_rule.values.size() == cfg.delta_grid.size(), "explicit alpha list must match delta_grid");
  }
}

inline std::mt19937_64 noise_rng(std::uint64_t seed, std::size_t delta_index, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(delta_index), static_cast<std::uint32_t>(trial)};
  return std::mt19937_64(seq);
}

inline std::vector<Eigen::Index> support_of(const Vector& x) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (std::abs(x[k]) > kSupportThreshold) s.push_back(k);
  }
  return s;
}

// Ordinary least-squares slope of log(v) on log(d) over positive pairs.
inline double loglog_slope(const std::vector<double>& d, const std::vector<double>& v) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0 && v[i] > 0.0) {
      lx.push_back(std::log(d[i]));
      ly.push_back(std::log(v[i]));
    }
  }
  if (lx.size() < 2) return 0.0;
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

inline SolveConfig sweep_solve_config(const RateConfig& cfg, double alpha, const Vector& y, double default_tol) {
  SolveConfig sc;
  sc.penalty = PenaltySpec(cfg.exponents, alpha);
  sc.op = cfg.op;
  sc.data = y;
  sc.max_iters = cfg.solver.max_iters;
  sc.objective_tol = cfg.solver.objective_tol.value_or(default_tol);
  sc.step_rule = cfg.solver.step_rule;
  sc.acceleration = cfg.solver.acceleration;
  sc.restart_on_increase = cfg.solver.restart_on_increase;
  sc.bound_constraint = cfg.solver.bound_constraint;
  sc.seed = cfg.solver.seed;
  sc.warm_start = cfg.solver.warm_start;
  return sc;
}

}  // namespace detail

/// For every (delta, trial): synthesize y^delta, solve, and compare the
/// weighted l^2 error with (6L/sqrt 2)(delta/sqrt(alpha) + sqrt(alpha) ||w||)
/// where L = max(F(x_dag), F(x_alpha^delta)).
inline RateSweep run_convex_rate_sweep(const RateConfig& cfg) {
  detail::validate(cfg);
  const Eigen::Index n = cfg.op.domain_dim();
  const Vector q = cfg.exponents.materialize(n);
  if (q.minCoeff() <= 1.0 || q.maxCoeff() > 2.0) throw DomainError("convex sweep requires exponents in (1, 2]");

  RateSweep sweep;
  sweep.truth = cfg.true_solution.realize(n);
  const Vector w = construct_source_element(cfg.op, sweep.truth, cfg.exponents);
  const double w_norm = w.norm();
  sweep.source_norm = w_norm;
  const double truth_penalty = fnorm(sweep.truth, q);
  const auto truth_support = detail::support_of(sweep.truth);

  std::vector<double> deltas, errors;
  for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i) {
    const double delta = cfg.delta_grid[i];
    const double alpha = cfg.alpha_rule.alpha_for(i, delta);
    for (int trial = 0; trial < cfg.trials_per_delta; ++trial) {
      auto rng = detail::noise_rng(cfg.noise_seed, i, trial);
      const Vector y = synthesize_data(cfg.op, sweep.truth, delta, rng);
      const SolveReport rep = solve(detail::sweep_solve_config(cfg, alpha, y, 1e-10));

      RateRecord r;
      r.delta = delta;
      r.alpha = alpha;
      r.trial = trial;
      r.converged = rep.converged;
      r.solution_penalty = fnorm(rep.minimizer, q);
      r.truth_penalty = truth_penalty;
      r.measured_error = weighted_l2_norm(rep.minimizer - sweep.truth, q);
      const double L = std::max(truth_penalty, r.solution_penalty);
      r.bound_rhs = 6.0 * L / std::sqrt(2.0) * (delta / std::sqrt(alpha) + std::sqrt(alpha) * w_norm);
      r.satisfied = r.measured_error <= r.bound_rhs;
      r.support_recovered = detail::support_of(rep.minimizer) == truth_support;
      sweep.records.push_back(r);
      deltas.push_back(delta);
      errors.push_back(r.measured_error);
    }
  }
  sweep.error_slope = detail::loglog_slope(deltas, errors);
  return sweep;
}

/// Sublinear counterpart with the l^1 error and the trend test on
/// measured_error / (delta^2/alpha + alpha + delta).
inline RateSweep run_nonconvex_rate_sweep(const RateConfig& cfg) {
  detail::validate(cfg);
  const Eigen::Index n = cfg.op.domain_dim();
  const Vector p = cfg.exponents.materialize(n);
  if (p.minCoeff() <= 0.0 || p.maxCoeff() > 1.0) throw DomainError("nonconvex sweep requires exponents in (0, 1]");

  RateSweep sweep;
  sweep.truth = cfg.true_solution.realize(n);
  const auto truth_support = detail::support_of(sweep.truth);
  const double truth_penalty = fnorm(sweep.truth, p);

  // e_k must lie in the range of A* on the support of x_dag.
  {
    const Eigen::MatrixXd at = cfg.op.to_dense().transpose();
    const auto cod = at.completeOrthogonalDecomposition();
    for (Eigen::Index k : truth_support) {
      const Vector e = Vector::Unit(n, k);
      if ((at * cod.solve(e) - e).norm() > kSourceResidualTol) {
        throw DomainError("canonical vector e_" + std::to_string(k) + " is not in the range of the adjoint");
      }
    }
  }

  const bool certify = cfg.certify_global && n <= kMaxExhaustiveDimension;
  const Eigen::MatrixXd dense = certify ? cfg.op.to_dense() : Eigen::MatrixXd();

  std::vector<double> deltas, errors, ratios;
  for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i) {
    const double delta = cfg.delta_grid[i];
    const double alpha = cfg.alpha_rule.alpha_for(i, delta);
    for (int trial = 0; trial < cfg.trials_per_delta; ++trial) {
      auto rng = detail::noise_rng(cfg.noise_seed, i, trial);
      const Vector y = synthesize_data(cfg.op, sweep.truth, delta, rng);
      const SolveConfig sc = detail::sweep_solve_config(cfg, alpha, y, 1e-15);
      const SolveReport rep = solve(sc);

      RateRecord r;
      r.delta = delta;
      r.alpha = alpha;
      r.trial = trial;
      r.converged = rep.converged;
      r.solution_penalty = fnorm(rep.minimizer, p);
      r.truth_penalty = truth_penalty;
      r.measured_error = (rep.minimizer - sweep.truth).lpNorm<1>();
      r.support_recovered = detail::support_of(rep.minimizer) == truth_support;
      if (certify) {
        const auto global = exhaustive_support_minimize(dense, y, alpha, p, cfg.solver.seed);
        const double f = objective(rep.minimizer, sc);
        r.global_certified = f <= global.objective + 1e-8 * std::max(1.0, std::abs(global.objective));
      }
      sweep.records.push_back(r);
      deltas.push_back(delta);
      errors.push_back(r.measured_error);
      ratios.push_back(r.measured_error / (delta * delta / alpha + alpha + delta));
    }
  }

  sweep.error_slope = detail::loglog_slope(deltas, errors);
  sweep.c_fit = *std::max_element(ratios.begin(), ratios.end());
  sweep.ratio_slope = detail::loglog_slope(deltas, ratios);
  sweep.bounded = std::abs(sweep.ratio_slope) <= kRatioSlopeBand;
  for (auto& r : sweep.records) {
    r.bound_rhs = sweep.c_fit * (r.delta * r.delta / r.alpha + r.alpha + r.delta);
    r.satisfied = sweep.bounded && r.measured_error <= r.bound_rhs;
  }
  return sweep;
}

enum class ReportFormat { CSV, JSON };

namespace detail {

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* format_bool(bool b) { return b ? "true" : "false"; }

inline std::string format_optional_bool(const std::optional<bool>& b, bool json) {
  if (!b) return json ? "null" : "";
  return format_bool(*b);
}

}  // namespace detail

inline constexpr const char* kReportColumns =
    "delta,alpha,measured_error,bound_rhs,satisfied,support_recovered,trial,converged,global_certified,"
    "solution_penalty,truth_penalty";

/// Writes one line (CSV) or one object (JSON) per record in input order.
inline void emit_report(const std::vector<RateRecord>& records, ReportFormat format, std::ostream& os) {
  if (records.empty()) throw DomainError("emit_report: no records");
  using detail::format_bool;
  using detail::format_number;
  if (format == ReportFormat::CSV) {
    os << kReportColumns << '\n';
    for (const auto& r : records) {
      os << format_number(r.delta) << ',' << format_number(r.alpha) << ',' << format_number(r.measured_error) << ','
         << format_number(r.bound_rhs) << ',' << format_bool(r.satisfied) << ',' << format_bool(r.support_recovered)
         << ',' << r.trial << ',' << format_bool(r.converged) << ','
         << detail::format_optional_bool(r.global_certified, false) << ',' << format_number(r.solution_penalty) << ','
         << format_number(r.truth_penalty) << '\n';
    }
  } else {
    os << "[\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      os << "  {\"delta\": " << format_number(r.delta) << ", \"alpha\": " << format_number(r.alpha)
         << ", \"measured_error\": " << format_number(r.measured_error) << ", \"bound_rhs\": "
         << format_number(r.bound_rhs) << ", \"satisfied\": " << format_bool(r.satisfied)
         << ", \"support_recovered\": " << format_bool(r.support_recovered) << ", \"trial\": " << r.trial
         << ", \"converged\": " << format_bool(r.converged)
         << ", \"global_certified\": " << detail::format_optional_bool(r.global_certified, true)
         << ", \"solution_penalty\": " << format_number(r.solution_penalty)
         << ", \"truth_penalty\": " << format_number(r.truth_penalty) << '}' << (i + 1 < records.size() ? "," : "")
         << '\n';
    }
    os << "]\n";
  }
  if (!os) throw std::runtime_error("emit_report: write failed");
}

inline void emit_report(const std::vector<RateRecord>& records, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path);
  emit_report(records, format, out);
}

/// Inverse of emit_report.
inline std::vector<RateRecord> parse_report(const std::string& text, ReportFormat format) {
  std::vector<RateRecord> out;
  auto as_bool = [](const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("report: bad boolean '" + s + "'");
  };
  if (format == ReportFormat::JSON) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("report: ") + e.what());
    }
    auto num = [](const nlohmann::json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
    for (const auto& o : j) {
      RateRecord r;
      r.delta = num(o.at("delta"));
      r.alpha = num(o.at("alpha"));
      r.measured_error = num(o.at("measured_error"));
      r.bound_rhs = num(o.at("bound_rhs"));
      r.satisfied = o.at("satisfied").get<bool>();
      r.support_recovered = o.at("support_recovered").get<bool>();
      r.trial = o.at("trial").get<int>();
      r.converged = o.at("converged").get<bool>();
      if (!o.at("global_certified").is_null()) r.global_certified = o.at("global_certified").get<bool>();
      r.solution_penalty = num(o.at("solution_penalty"));
      r.truth_penalty = num(o.at("truth_penalty"));
      out.push_back(r);
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportColumns) throw ConfigError("report: unexpected CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 11) throw ConfigError("report: expected 11 CSV columns");
    RateRecord r;
    r.delta = std::stod(cells[0]);
    r.alpha = std::stod(cells[1]);
    r.measured_error = std::stod(cells[2]);
    r.bound_rhs = std::stod(cells[3]);
    r.satisfied = as_bool(cells[4]);
    r.support_recovered = as_bool(cells[5]);
    r.trial = std::stoi(cells[6]);
    r.converged = as_bool(cells[7]);
    if (!cells[8].empty()) r.global_certified = as_bool(cells[8]);
    r.solution_penalty = std::stod(cells[9]);
    r.truth_penalty = std::stod(cells[10]);
    out.push_back(r);
  }
  return out;
}

}  // namespace flexreg
