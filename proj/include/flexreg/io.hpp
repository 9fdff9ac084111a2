#pragma once

// JSON and CSV (de)serialization for exponent families, operators,
// coefficient vectors, solver problems/reports and sweep configurations.
// Malformed input raises ConfigError; well-formed input that violates a
// domain precondition raises DomainError from the constructors.

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexreg/errors.hpp"
#include "flexreg/experiments.hpp"
#include "flexreg/exponents.hpp"
#include "flexreg/operators.hpp"
#include "flexreg/solver.hpp"

namespace flexreg::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline json load_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

namespace detail {

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key);
}

inline std::vector<double> split_numbers(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("bad CSV number '" + cell + "'");
    }
  }
  return out;
}

}  // namespace detail

// ---- coefficient vectors --------------------------------------------------

inline Vector read_csv_vector(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto row = detail::split_numbers(line);
    if (row.size() != 1) throw ConfigError("vector CSV must have a single column");
    values.push_back(row[0]);
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline Eigen::MatrixXd read_csv_matrix(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(detail::split_numbers(line));
    if (rows.back().size() != rows.front().size()) throw ConfigError("ragged matrix CSV");
  }
  if (rows.empty()) throw ConfigError("empty matrix CSV");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

/// A flat JSON array, or {"csv": path} relative to `base`.
inline Vector vector_from_json(const json& j, const fs::path& base = {}) {
  if (j.is_object() && j.contains("csv")) return read_csv_vector(base / detail::get<std::string>(j, "csv"));
  if (!j.is_array()) throw ConfigError("expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("expected a JSON array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// ---- exponent families ----------------------------------------------------

inline json to_json(const ExponentSequence& s) {
  json params = json::object();
  switch (s.family()) {
    case Family::Constant: params["p"] = s.p(); break;
    case Family::OnePlusInvLogKAlpha: params["alpha"] = s.alpha(); break;
    case Family::OnePlusGeometric:
      params["c"] = s.c();
      params["r"] = s.r();
      break;
    case Family::Tabulated:
      params["values"] = s.values();
      params["tail"] = s.tail();
      params["exact_tail"] = s.exact_tail();
      break;
    default: break;
  }
  if (s.is_reciprocal()) params["reciprocal"] = true;
  return json{{"family", to_string(s.family())}, {"params", params}, {"offset", s.offset()}};
}

/// {"family": name, "params": {...}, "offset": int}; params and offset may
/// be omitted where the family has none.
inline ExponentSequence exponents_from_json(const json& j) try {
  const auto family = detail::get<std::string>(j, "family");
  const json params = j.contains("params") ? j.at("params") : json::object();
  const int offset = detail::get_or<int>(j, "offset", 2);
  ExponentSequence s = ExponentSequence::one_plus_inv_k();
  if (family == "Constant") {
    s = ExponentSequence::constant(detail::get<double>(params, "p"));
  } else if (family == "OnePlusInvK") {
    s = ExponentSequence::one_plus_inv_k();
  } else if (family == "OnePlusInvLogK") {
    s = ExponentSequence::one_plus_inv_log_k(offset);
  } else if (family == "OnePlusInvLogKAlpha") {
    s = ExponentSequence::one_plus_inv_log_k_alpha(detail::get<double>(params, "alpha"), offset);
  } else if (family == "OnePlusGeometric") {
    s = ExponentSequence::one_plus_geometric(detail::get<double>(params, "c"), detail::get<double>(params, "r"));
  } else if (family == "Tabulated") {
    s = ExponentSequence::tabulated(detail::get<std::vector<double>>(params, "values"),
                                    detail::get<double>(params, "tail"),
                                    detail::get_or<bool>(params, "exact_tail", false));
  } else {
    throw ConfigError("unknown exponent family '" + family + "'");
  }
  if (detail::get_or<bool>(params, "reciprocal", false)) s = s.reciprocal();
  return s;
} catch (const DomainError& e) {
  throw ConfigError(std::string("exponents: ") + e.what());
}

/// "1+1/k", "1+1/log(k)", "1+1/log(k)^<alpha>" or "const:<p>".
inline ExponentSequence parse_family_string(const std::string& text) {
  std::smatch m;
  if (text == "1+1/k") return ExponentSequence::one_plus_inv_k();
  if (text == "1+1/log(k)") return ExponentSequence::one_plus_inv_log_k();
  static const std::regex log_alpha(R"(1\+1/log\(k\)\^([0-9]*\.?[0-9]+([eE][-+]?[0-9]+)?))");
  if (std::regex_match(text, m, log_alpha)) {
    const double alpha = std::stod(m[1].str());
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("log exponent must lie in (0, 1): " + text);
    return ExponentSequence::one_plus_inv_log_k_alpha(alpha);
  }
  static const std::regex constant(R"(const:([0-9]*\.?[0-9]+([eE][-+]?[0-9]+)?))");
  if (std::regex_match(text, m, constant)) {
    const double p = std::stod(m[1].str());
    if (!(p > 0.0)) throw ConfigError("constant exponent must be positive: " + text);
    return ExponentSequence::constant(p);
  }
  throw ConfigError("unrecognized family '" + text + "'");
}

// ---- operators ------------------------------------------------------------

/// {"kind": "DenseMatrix", "rows": [[...], ...]} or {"kind": "DenseMatrix",
/// "csv": path}, {"kind": "Diagonal", "diagonal": [...]},
/// {"kind": "Identity", "n": int}, or the seeded generator
/// {"kind": "Gaussian", "rows": m, "cols": n, "seed": s}.
inline LinearOperator operator_from_json(const json& j, const fs::path& base = {}) {
  const auto kind = detail::get<std::string>(j, "kind");
  if (kind == "DenseMatrix") {
    if (j.contains("csv")) return LinearOperator::dense(read_csv_matrix(base / detail::get<std::string>(j, "csv")));
    const auto rows = detail::get<std::vector<std::vector<double>>>(j, "rows");
    if (rows.empty() || rows.front().empty()) throw ConfigError("dense operator has no entries");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) throw ConfigError("ragged dense operator rows");
      for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return LinearOperator::dense(std::move(m));
  }
  if (kind == "Diagonal") return LinearOperator::diagonal(vector_from_json(j.at("diagonal"), base));
  if (kind == "Identity") return LinearOperator::identity(detail::get<Eigen::Index>(j, "n"));
  if (kind == "Gaussian") {
    return LinearOperator::dense(gaussian_matrix(detail::get<Eigen::Index>(j, "rows"), detail::get<Eigen::Index>(j, "cols"),
                                                 detail::get<std::uint64_t>(j, "seed")));
  }
  throw ConfigError("unknown operator kind '" + kind + "'");
}

// ---- solver problems and reports ----------------------------------------

inline StepRule step_rule_from_string(const std::string& s) {
  if (s == "FixedSafe") return StepRule::FixedSafe;
  if (s == "Backtracking") return StepRule::Backtracking;
  throw ConfigError("unknown step_rule '" + s + "'");
}

inline WarmStart warm_start_from_string(const std::string& s) {
  if (s == "zero") return WarmStart::Zero;
  if (s == "l1") return WarmStart::L1;
  throw ConfigError("warm_start must be 'zero' or 'l1'");
}

/// problem.json: {"operator", "data", "exponents", "alpha", "solver": {...}}.
inline SolveConfig solve_config_from_json(const json& j, const fs::path& base = {}) {
  if (!j.is_object()) throw ConfigError("problem must be a JSON object");
  SolveConfig cfg;
  if (!j.contains("operator") || !j.contains("data") || !j.contains("exponents")) {
    throw ConfigError("problem needs 'operator', 'data' and 'exponents'");
  }
  cfg.op = operator_from_json(j.at("operator"), base);
  cfg.data = vector_from_json(j.at("data"), base);
  cfg.penalty = PenaltySpec(exponents_from_json(j.at("exponents")), detail::get<double>(j, "alpha"));
  const json solver = j.contains("solver") ? j.at("solver") : json::object();
  cfg.max_iters = detail::get_or<int>(solver, "max_iters", cfg.max_iters);
  cfg.objective_tol = detail::get_or<double>(solver, "objective_tol", cfg.objective_tol);
  cfg.step_rule = step_rule_from_string(detail::get_or<std::string>(solver, "step_rule", "FixedSafe"));
  cfg.initial_step = detail::get_or<double>(solver, "initial_step", cfg.initial_step);
  cfg.acceleration = detail::get_or<bool>(solver, "acceleration", cfg.acceleration);
  cfg.restart_on_increase = detail::get_or<bool>(solver, "restart_on_increase", cfg.restart_on_increase);
  if (solver.contains("bound_constraint") && !solver.at("bound_constraint").is_null()) {
    cfg.bound_constraint = detail::get<double>(solver, "bound_constraint");
  }
  cfg.seed = detail::get_or<std::uint64_t>(solver, "seed", cfg.seed);
  cfg.warm_start = warm_start_from_string(detail::get_or<std::string>(solver, "warm_start", "zero"));
  cfg.refine_support = detail::get_or<bool>(solver, "refine_support", cfg.refine_support);
  if (j.contains("initial")) cfg.initial = vector_from_json(j.at("initial"), base);
  return cfg;
}

inline json to_json(const SolveReport& r) {
  json j;
  j["minimizer"] = vector_to_json(r.minimizer);
  j["objective_trace"] = r.objective_trace;
  j["optimality_residual"] = r.optimality_residual ? json(*r.optimality_residual) : json(nullptr);
  std::vector<long long> support(r.support.begin(), r.support.end());
  j["support"] = support;
  j["iterations_used"] = r.iterations_used;
  j["converged"] = r.converged;
  j["step_size"] = r.step_size;
  return j;
}

inline json to_json(const SpaceClassification& c, bool with_diagnostic) {
  json j;
  j["verdict"] = to_string(c.verdict);
  j["witness_N"] = c.witness_N ? json(*c.witness_N) : json(nullptr);
  if (with_diagnostic) {
    j["cutoff"] = c.cutoff;
    json d = json::array();
    for (const auto& e : c.diagnostic) d.push_back({{"N", e.N}, {"partial_sum", e.partial_sum}});
    j["diagnostic"] = d;
  }
  return j;
}

inline json to_json(const ProxResult& r) {
  return json{{"minimizer", r.minimizer},
              {"objective_value", r.objective_value},
              {"branch", to_string(r.branch)},
              {"newton_iterations", r.newton_iterations}};
}

// ---- sweep configurations ------------------------------------------------

inline AlphaRule alpha_rule_from_json(const json& j) {
  AlphaRule rule;
  const auto name = detail::get<std::string>(j, "rule");
  if (name == "ProportionalToDelta") {
    rule.kind = AlphaRule::Kind::ProportionalToDelta;
    rule.c = detail::get_or<double>(j, "c", 1.0);
  } else if (name == "ProportionalToDeltaSq") {
    rule.kind = AlphaRule::Kind::ProportionalToDeltaSq;
    rule.c = detail::get_or<double>(j, "c", 1.0);
  } else if (name == "Explicit") {
    rule.kind = AlphaRule::Kind::Explicit;
    rule.values = detail::get<std::vector<double>>(j, "values");
  } else {
    throw ConfigError("unknown alpha rule '" + name + "'");
  }
  return rule;
}

enum class SweepRegime { Convex, Nonconvex };

struct RatesProblem {
  RateConfig config;
  SweepRegime regime = SweepRegime::Convex;
};

/// rates.json; keys mirror RateConfig ("operator", "true_solution",
/// "exponents", "delta_grid", "alpha_rule", "noise_seed",
/// "trials_per_delta", "solver") plus optional "regime" and
/// "certify_global".
inline RatesProblem rates_problem_from_json(const json& j, const fs::path& base = {}) {
  if (!j.is_object()) throw ConfigError("rates config must be a JSON object");
  for (const char* key : {"operator", "true_solution", "exponents", "delta_grid", "alpha_rule"}) {
    if (!j.contains(key)) throw ConfigError(std::string("rates config needs '") + key + "'");
  }
  RatesProblem out;
  RateConfig& cfg = out.config;
  cfg.op = operator_from_json(j.at("operator"), base);
  const json& ts = j.at("true_solution");
  if (ts.is_array() || (ts.is_object() && ts.contains("csv"))) {
    cfg.true_solution.values = vector_from_json(ts, base);
  } else if (ts.is_object() && ts.contains("values")) {
    cfg.true_solution.values = vector_from_json(ts.at("values"), base);
  } else {
    cfg.true_solution.support_size = detail::get<Eigen::Index>(ts, "support_size");
    cfg.true_solution.seed = detail::get_or<std::uint64_t>(ts, "seed", 1);
    cfg.true_solution.min_magnitude = detail::get_or<double>(ts, "min_magnitude", 0.5);
    cfg.true_solution.max_magnitude = detail::get_or<double>(ts, "max_magnitude", 1.5);
  }
  cfg.exponents = exponents_from_json(j.at("exponents"));
  cfg.delta_grid = detail::get<std::vector<double>>(j, "delta_grid");
  cfg.alpha_rule = alpha_rule_from_json(j.at("alpha_rule"));
  cfg.noise_seed = detail::get_or<std::uint64_t>(j, "noise_seed", 1);
  cfg.trials_per_delta = detail::get_or<int>(j, "trials_per_delta", 3);
  cfg.certify_global = detail::get_or<bool>(j, "certify_global", true);
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    cfg.solver.max_iters = detail::get_or<int>(s, "max_iters", cfg.solver.max_iters);
    if (s.contains("objective_tol")) cfg.solver.objective_tol = detail::get<double>(s, "objective_tol");
    cfg.solver.step_rule = step_rule_from_string(detail::get_or<std::string>(s, "step_rule", "FixedSafe"));
    cfg.solver.acceleration = detail::get_or<bool>(s, "acceleration", cfg.solver.acceleration);
    cfg.solver.restart_on_increase = detail::get_or<bool>(s, "restart_on_increase", cfg.solver.restart_on_increase);
    if (s.contains("bound_constraint") && !s.at("bound_constraint").is_null()) {
      cfg.solver.bound_constraint = detail::get<double>(s, "bound_constraint");
    }
    cfg.solver.seed = detail::get_or<std::uint64_t>(s, "seed", cfg.solver.seed);
    cfg.solver.warm_start = warm_start_from_string(detail::get_or<std::string>(s, "warm_start", "zero"));
  }
  const auto regime = detail::get_or<std::string>(j, "regime", "");
  if (regime == "convex") {
    out.regime = SweepRegime::Convex;
  } else if (regime == "nonconvex") {
    out.regime = SweepRegime::Nonconvex;
  } else if (regime.empty()) {
    out.regime = cfg.exponents.sup_p() <= 1.0 ? SweepRegime::Nonconvex : SweepRegime::Convex;
  } else {
    throw ConfigError("regime must be 'convex' or 'nonconvex'");
  }
  return out;
}

}  // namespace flexreg::io
