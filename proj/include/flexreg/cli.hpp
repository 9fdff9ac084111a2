#pragma once

// Command-line front end: classify, prox, solve and rates subcommands.
//
// Exit status: 0 on success, 1 on a domain error (bad regime, dimension
// mismatch, numerical failure), 2 on malformed input. Errors are reported
// as a single JSON line on the error stream.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexreg/errors.hpp"
#include "flexreg/experiments.hpp"
#include "flexreg/exponents.hpp"
#include "flexreg/io.hpp"
#include "flexreg/prox.hpp"
#include "flexreg/solver.hpp"

namespace flexreg::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSeedVariable = "FLEXREG_SEED";

enum ExitStatus : int { kOk = 0, kDomainFailure = 1, kMalformed = 2 };

namespace detail {

inline void report_error(std::ostream& err, const char* kind, const std::string& message) {
  err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

inline std::optional<std::uint64_t> seed_override() {
  const char* raw = std::getenv(kSeedVariable);
  if (!raw || !*raw) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used);
    if (raw[used] != '\0') throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(kSeedVariable) + " is not an unsigned integer");
  }
}

inline void write_output(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw ConfigError("cannot write " + out_path);
  file << text;
}

}  // namespace detail

/// Parses argv and runs one subcommand. Output goes to `out` unless --out
/// names a file.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Variable-exponent sparse regularization toolkit", "flexreg"};
  app.set_version_flag("--version", std::string("flexreg ") + kVersion);
  app.require_subcommand(1, 1);

  std::string family, config_path, out_path, format;
  bool diagnostic = false;
  double t = 0.0, alpha = 0.0, p = 0.0;

  auto* classify = app.add_subcommand("classify", "Decide whether l^{p_k} coincides with l^1");
  classify->add_option("--family", family, "1+1/k | 1+1/log(k) | 1+1/log(k)^<alpha> | const:<p>");
  classify->add_option("--config", config_path, "JSON exponent family {\"family\", \"params\", \"offset\"}");
  classify->add_flag("--diagnostic", diagnostic, "Include partial-sum diagnostics");
  classify->add_option("--out", out_path, "Output file (default: standard output)");

  auto* prox = app.add_subcommand("prox", "Scalar proximal map of alpha |u|^p");
  prox->add_option("--t", t, "Input point")->required();
  prox->add_option("--alpha", alpha, "Weight alpha > 0")->required();
  prox->add_option("--p", p, "Exponent in (0, 2]")->required();
  prox->add_option("--out", out_path, "Output file (default: standard output)");

  auto* solve_cmd = app.add_subcommand("solve", "Minimize 1/2||Ax-y||^2 + alpha sum |x_k|^{p_k}");
  solve_cmd->add_option("--config", config_path, "problem.json")->required();
  solve_cmd->add_option("--out", out_path, "Report file (default: standard output)");

  auto* rates = app.add_subcommand("rates", "Run a noise sweep and emit a rate report");
  rates->add_option("--config", config_path, "rates.json")->required();
  rates->add_option("--out", out_path, "Report file (default: standard output)");
  rates->add_option("--format", format, "csv | json (default: from --out extension, else csv)")
      ->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    detail::report_error(err, "UsageError", e.what());
    return kMalformed;
  }

  try {
    const auto base = [&] { return std::filesystem::path(config_path).parent_path(); };
    if (*classify) {
      if (family.empty() == config_path.empty()) throw ConfigError("classify needs exactly one of --family, --config");
      const ExponentSequence seq =
          family.empty() ? io::exponents_from_json(io::load_json(config_path)) : io::parse_family_string(family);
      SpaceClassification c;
      if (seq.inf_p() >= 1.0) {
        c = classify_superlinear(seq);
      } else if (seq.sup_p() <= 1.0) {
        c = classify_sublinear(seq);
      } else {
        throw DomainError("exponents straddle 1; neither regime applies");
      }
      detail::write_output(io::to_json(c, diagnostic).dump() + "\n", out_path, out);
    } else if (*prox) {
      detail::write_output(io::to_json(prox_scalar(t, alpha, p)).dump() + "\n", out_path, out);
    } else if (*solve_cmd) {
      SolveConfig cfg = io::solve_config_from_json(io::load_json(config_path), base());
      if (const auto seed = detail::seed_override()) cfg.seed = *seed;
      const SolveReport report = solve(cfg);
      detail::write_output(io::to_json(report).dump(2) + "\n", out_path, out);
    } else if (*rates) {
      io::RatesProblem problem = io::rates_problem_from_json(io::load_json(config_path), base());
      if (const auto seed = detail::seed_override()) {
        problem.config.noise_seed = *seed;
        problem.config.solver.seed = *seed;
      }
      const RateSweep sweep = problem.regime == io::SweepRegime::Convex ? run_convex_rate_sweep(problem.config)
                                                                         : run_nonconvex_rate_sweep(problem.config);
      if (format.empty()) format = std::filesystem::path(out_path).extension() == ".json" ? "json" : "csv";
      std::ostringstream text;
      emit_report(sweep.records, format == "json" ? ReportFormat::JSON : ReportFormat::CSV, text);
      detail::write_output(text.str(), out_path, out);
    }
  } catch (const ConfigError& e) {
    detail::report_error(err, "ConfigError", e.what());
    return kMalformed;
  } catch (const DomainError& e) {
    detail::report_error(err, "DomainError", e.what());
    return kDomainFailure;
  } catch (const NumericalError& e) {
    detail::report_error(err, "NumericalError", e.what());
    return kDomainFailure;
  } catch (const nlohmann::json::exception& e) {
    detail::report_error(err, "ConfigError", e.what());
    return kMalformed;
  } catch (const std::exception& e) {
    detail::report_error(err, "Error", e.what());
    return kDomainFailure;
  }
  return kOk;
}

}  // namespace flexreg::cli
