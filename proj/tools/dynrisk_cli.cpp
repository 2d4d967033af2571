#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dynrisk/experiment.hpp"

namespace {

int list_suites(bool as_json) {
  const auto& catalog = dynrisk::suite_catalog();
  if (as_json) {
    dynrisk::Json out = dynrisk::Json::array();
    for (const auto& s : catalog) out.push_back({{"name", s.name}, {"verifies", s.verifies}, {"fields", s.fields}});
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& s : catalog) {
    std::cout << s.name << " => " << s.verifies << "\n  fields:";
    for (const auto& f : s.fields) std::cout << " " << f;
    std::cout << "\n";
  }
  std::cout << "all => every suite with a section in the config\n";
  return 0;
}

int run(const std::string& config_path, std::size_t jobs, bool fail_fast, const std::string& out_dir) {
  dynrisk::ExperimentConfig config;
  try {
    config = dynrisk::load_config(config_path);
  } catch (const dynrisk::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  dynrisk::RunOptions options;
  options.jobs = jobs;
  options.fail_fast = fail_fast;
  if (!out_dir.empty()) {
    options.out_dir = out_dir;
  } else if (const char* env = std::getenv("DYNRISK_OUT_DIR"); env && *env) {
    options.out_dir = std::filesystem::path(env) / config.name;
  }
  const auto result = dynrisk::run_experiment(config, options);
  for (const auto& s : result.suites) {
    std::cout << s.suite << ": ";
    if (s.skipped)
      std::cout << "SKIPPED";
    else if (!s.error.empty())
      std::cout << "ERROR " << s.error;
    else
      std::cout << dynrisk::to_string(s.counts.worst()) << " (pass " << s.counts.pass << ", inconclusive "
                << s.counts.inconclusive << ", violation " << s.counts.violation << ")";
    std::cout << "\n";
  }
  std::cout << "reports in " << result.out_dir.string() << "\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks of concentration inequalities for BSDE-driven risk measures"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run the suites selected in a config file");
  std::string config_path, out_dir;
  std::size_t jobs = 1;
  bool fail_fast = false;
  run_cmd->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--jobs", jobs, "suites run concurrently")->check(CLI::Range(1, 64));
  run_cmd->add_flag("--fail-fast", fail_fast, "skip remaining suites after an error or violation");
  run_cmd->add_option("--out", out_dir, "output directory (default: $DYNRISK_OUT_DIR/<name>, then the config)");

  auto* list_cmd = app.add_subcommand("list-suites", "print the suite catalog");
  bool as_json = false;
  list_cmd->add_flag("--json", as_json, "machine-readable catalog");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(config_path, jobs, fail_fast, out_dir);
    return list_suites(as_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
