#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynrisk/bsde_solver.hpp"
#include "dynrisk/generators.hpp"
#include "dynrisk/report.hpp"
#include "dynrisk/stochastics.hpp"

namespace dynrisk {

struct SuiteInfo {
  std::string name;
  std::string verifies;
  std::vector<std::string> fields;
};

/// Suites in execution order; "all" is not listed.
const std::vector<SuiteInfo>& suite_catalog();

/// Schema or cross-reference error; the message starts with the file and field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Builds a claim for a given grid and dimension (log-contracts depend on the grid).
using ClaimFactory = std::function<PathFunctional(const TimeGrid&, std::size_t)>;

struct ExperimentConfig {
  std::string name;
  std::string origin;
  std::uint64_t seed = 0;
  double horizon = 1.0;
  unsigned levels = 0;
  std::size_t dimension = 1;
  std::size_t samples = 0;
  std::map<std::string, GeneratorSpec> generators;
  std::map<std::string, ClaimFactory> claims;
  /// Selected suites in catalog order.
  std::vector<std::string> suites;
  /// Entries of every selected suite, as written in the file.
  std::map<std::string, Json> sections;
  std::string output_dir;
  /// Regression bias constant; calibrated per batch when absent.
  std::optional<double> bias_constant;
  bool confirm = true;
  SolverOptions solver;
};

ExperimentConfig parse_config(const Json& doc, const std::string& origin = "config");
/// Reads a JSON config; parse errors carry line and column.
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::size_t jobs = 1;
  bool fail_fast = false;
  /// Overrides the config's output directory when set.
  std::optional<std::filesystem::path> out_dir;
};

struct VerdictCounts {
  std::size_t pass = 0;
  std::size_t inconclusive = 0;
  std::size_t violation = 0;

  void add(Verdict v);
  void add(const VerdictCounts& other);
  Verdict worst() const;
};

struct SuiteOutcome {
  std::string suite;
  Json report;
  std::string csv;
  VerdictCounts counts;
  std::string error;
  bool skipped = false;
};

struct RunResult {
  std::vector<SuiteOutcome> suites;
  VerdictCounts counts;
  std::filesystem::path out_dir;
  /// 0 clean, 1 some violation, 3 some suite failed to run.
  int exit_code = 0;
};

/// Runs one suite of a parsed config.
SuiteOutcome run_suite(const ExperimentConfig& config, const std::string& suite);
/// Runs the selected suites and writes <suite>.json, <suite>.csv, summary.json and metadata.json.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace dynrisk
