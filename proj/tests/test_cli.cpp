#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "flexreg/cli.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status = 0;
  std::string out, err;
};

// In-process invocation.
Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "flexreg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.status = flexreg::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Runs the installed executable and captures standard output.
Result run_binary(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" FLEXREG_CLI_PATH "\" " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const fs::path samples = FLEXREG_SAMPLES_DIR;

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("flexreg_cli_" + std::to_string(::getpid()) + "_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, ClassifyPaperExample) {
  const auto r = run({"classify", "--family", "1+1/k"});
  EXPECT_EQ(r.status, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("verdict"), "EqualToL1");
  EXPECT_EQ(j.at("witness_N"), 2);
}

TEST(Cli, ClassifyDiagnosticAndConfig) {
  const fs::path dir = fs::temp_directory_path() / ("flexreg_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::ofstream(dir / "fam.json") << R"({"family": "Tabulated", "params": {"values": [0.9, 0.8], "tail": 0.5}, "offset": 1})";
  const auto r = run({"classify", "--config", (dir / "fam.json").string(), "--diagnostic"});
  EXPECT_EQ(r.status, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("verdict"), "Inconclusive");
  EXPECT_FALSE(j.at("diagnostic").empty());
  fs::remove_all(dir);
}

TEST(Cli, ClassifyErrors) {
  EXPECT_EQ(run({"classify", "--family", "2+k"}).status, 2);
  EXPECT_EQ(run({"classify"}).status, 2);
  const auto mixed = run({"classify", "--family", "const:0.5", "--config", "x.json"});
  EXPECT_EQ(mixed.status, 2);
  const fs::path fam = write_temp("straddle.json", R"({"family": "Tabulated", "params": {"values": [0.5, 1.5], "tail": 1.2}, "offset": 1})");
  const auto straddle = run({"classify", "--config", fam.string()});
  fs::remove(fam);
  EXPECT_EQ(straddle.status, 1);
  const json e = json::parse(straddle.err);
  EXPECT_EQ(e.at("error"), "DomainError");
}

TEST(Cli, ProxSoftThreshold) {
  const auto r = run({"prox", "--t", "1.0", "--alpha", "0.5", "--p", "1"});
  EXPECT_EQ(r.status, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("minimizer"), 0.5);
  EXPECT_EQ(j.at("branch"), "SoftThreshold");
  EXPECT_EQ(run({"prox", "--t", "1.0", "--alpha", "-1", "--p", "1"}).status, 1);
  EXPECT_EQ(run({"prox", "--t", "1.0"}).status, 2);
}

TEST(Cli, ProxOutputRoundTrips) {
  const auto r = run({"prox", "--t", "2", "--alpha", "1", "--p", "1.5"});
  const double u = json::parse(r.out).at("minimizer");
  EXPECT_EQ(u, flexreg::prox_scalar(2.0, 1.0, 1.5).minimizer);
}

TEST(Cli, SolveMissingConfigIsMalformed) {
  const auto r = run({"solve", "--config", "missing.json"});
  EXPECT_EQ(r.status, 2);
  const json e = json::parse(r.err);
  EXPECT_EQ(e.at("error"), "ConfigError");
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, SolveDimensionMismatchIsDomainError) {
  const fs::path cfg = write_temp("mismatch.json", R"({
    "operator": {"kind": "Identity", "n": 3},
    "data": [1, 2],
    "exponents": {"family": "OnePlusInvK"},
    "alpha": 0.1})");
  EXPECT_EQ(run({"solve", "--config", cfg.string()}).status, 1);
  fs::remove(cfg);
}

TEST(Cli, SolveWritesReport) {
  const auto r = run({"solve", "--config", (samples / "problem.json").string()});
  ASSERT_EQ(r.status, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_LE(j.at("optimality_residual").get<double>(), 1e-9);
  EXPECT_EQ(j.at("minimizer").size(), 10u);
}

TEST(Cli, RatesCsvAndJson) {
  const auto csv = run({"rates", "--config", (samples / "rates.json").string()});
  ASSERT_EQ(csv.status, 0) << csv.err;
  EXPECT_EQ(csv.out.rfind("delta,alpha,measured_error,bound_rhs,satisfied,support_recovered", 0), 0u);
  const auto js = run({"rates", "--config", (samples / "rates.json").string(), "--format", "json"});
  ASSERT_EQ(js.status, 0);
  EXPECT_EQ(json::parse(js.out).size(), 12u);
  EXPECT_EQ(run({"rates", "--config", (samples / "rates.json").string(), "--format", "xml"}).status, 2);
}

TEST(Cli, HelpListsSubcommandsAndVersion) {
  const auto help = run({"--help"});
  EXPECT_EQ(help.status, 0);
  for (const char* word : {"classify", "prox", "solve", "rates"}) EXPECT_NE(help.out.find(word), std::string::npos);
  const auto version = run({"--version"});
  EXPECT_EQ(version.status, 0);
  EXPECT_NE(version.out.find("0.1.0"), std::string::npos);
  EXPECT_EQ(run({}).status, 2);
  EXPECT_EQ(run({"frobnicate"}).status, 2);
}

TEST(CliBinary, ExitCodesAndDeterminism) {
  EXPECT_EQ(run_binary("solve --config missing.json").status, 2);
  EXPECT_EQ(run_binary("classify --family 1+1/k").status, 0);
  const std::string cfg = (samples / "rates_sparse.json").string();
  const auto a = run_binary("rates --config " + cfg, "FLEXREG_SEED=5");
  const auto b = run_binary("rates --config " + cfg, "FLEXREG_SEED=5");
  const auto c = run_binary("rates --config " + cfg, "FLEXREG_SEED=6");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(run_binary("rates --config " + cfg, "FLEXREG_SEED=abc").status, 2);
}

TEST(CliBinary, OutFileMatchesStdout) {
  const fs::path out = fs::temp_directory_path() / ("flexreg_cli_out_" + std::to_string(::getpid()) + ".json");
  const std::string cfg = (samples / "sparse_problem.json").string();
  ASSERT_EQ(run_binary("solve --config " + cfg + " --out " + out.string()).status, 0);
  EXPECT_EQ(slurp(out), run_binary("solve --config " + cfg).out);
  fs::remove(out);
}
