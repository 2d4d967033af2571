#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dynrisk/experiment.hpp"

using namespace dynrisk;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "dynrisk_experiment_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSmall = R"({
  "name": "small",
  "seed": "42",
  "grid": {"T": "1", "n": "3"},
  "samples": "4000",
  "generators": [
    {"id": "ent", "kind": "entropic"},
    {"id": "k1", "kind": "lipschitz", "kappa": "1"}
  ],
  "claims": [
    {"id": "W_T", "kind": "terminal"},
    {"id": "max", "kind": "grid_max"}
  ],
  "suites": ["all"],
  "tolerances": {"bias_constant": "0.5"},
  "profile": [
    {"generator": "ent", "claim": "W_T", "bound": "quadratic_growth", "lambdas": ["0", "1", "2"]},
    {"generator": "k1", "claim": "max", "bound": "kappa_dominated", "lambdas": ["0", "1"]}
  ],
  "deviation": [
    {"claim": "W_T", "generator": "ent", "bound": "quadratic_growth", "r": ["1", "2"]}
  ]
})";

std::string config_error(const std::string& text) {
  try {
    parse_config(Json::parse(text), "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  if (at == std::string::npos) throw std::logic_error("pattern not found: " + from);
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST(Catalog, SuitesInExecutionOrder) {
  std::vector<std::string> names;
  for (const auto& s : suite_catalog()) names.push_back(s.name);
  const std::vector<std::string> expected{"profile", "dual",   "transport", "deviation",
                                          "dimfree", "pde",    "axioms",    "discretization"};
  EXPECT_EQ(names, expected);
  for (const auto& s : suite_catalog()) {
    EXPECT_FALSE(s.verifies.empty());
    EXPECT_FALSE(s.fields.empty());
  }
}

TEST(Config, ParsesTheSmallConfig) {
  const auto cfg = parse_config(Json::parse(kSmall), "small.json");
  EXPECT_EQ(cfg.name, "small");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.levels, 3u);
  EXPECT_EQ(cfg.samples, 4000u);
  EXPECT_EQ(cfg.suites, (std::vector<std::string>{"profile", "deviation"}));
  ASSERT_TRUE(cfg.bias_constant.has_value());
  EXPECT_DOUBLE_EQ(*cfg.bias_constant, 0.5);
}

TEST(Config, DiagnosticsNameTheFieldPath) {
  EXPECT_NE(config_error(replace(kSmall, R"("samples": "4000",)", R"("samples": "4000", "colour": "red",)"))
                .find("cfg.json: $: unknown field 'colour'"),
            std::string::npos);
  EXPECT_NE(config_error(replace(kSmall, R"("seed": "42")", R"("seed": 42)")).find("$.seed"), std::string::npos);
  EXPECT_NE(config_error(replace(kSmall, R"("kappa": "1")", R"("kappa": "-1")")).find("$.generators[1]: kappa must be"),
            std::string::npos);
  EXPECT_NE(config_error(replace(kSmall, R"("claim": "max")", R"("claim": "nope")")).find("$.profile[1].claim"),
            std::string::npos);
  EXPECT_NE(config_error(replace(kSmall, R"(["all"])", R"(["pde"])")).find("$.suites[0]"), std::string::npos);
  EXPECT_NE(config_error(replace(kSmall, R"(["all"])", R"(["bogus"])")).find("unknown suite"), std::string::npos);
  // A claim outside the bound's classes is caught before anything runs.
  EXPECT_NE(config_error(replace(kSmall, R"("claim": "W_T", "bound": "quadratic_growth", "lambdas")",
                                 R"("claim": "W_T", "bound": "kappa_dominated", "lambdas")")),
            "");
}

TEST(Config, InvalidJsonReportsLineAndColumn) {
  const auto dir = scratch_dir("badjson");
  const auto path = dir / "bad.json";
  std::ofstream(path) << "{\n  \"name\": \"x\",\n  \"seed\": ,\n}\n";
  try {
    load_config(path);
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Run, WritesReportsAndIsByteReproducible) {
  const auto cfg = parse_config(Json::parse(kSmall), "small.json");
  const auto a = scratch_dir("run_a"), b = scratch_dir("run_b");
  RunOptions oa, ob;
  oa.out_dir = a;
  ob.out_dir = b;
  ob.jobs = 2;
  const auto ra = run_experiment(cfg, oa);
  const auto rb = run_experiment(cfg, ob);
  EXPECT_EQ(ra.exit_code, 0);
  EXPECT_EQ(rb.exit_code, 0);
  for (const char* f : {"profile.json", "profile.csv", "deviation.json", "deviation.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_TRUE(fs::exists(a / "metadata.json"));
  const auto summary = Json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(summary["verdict"], "PASS");
  EXPECT_EQ(summary.dump().find("utc"), std::string::npos);
  // RFC 4180: CRLF line ends and a header row.
  const auto csv = slurp(a / "profile.csv");
  EXPECT_EQ(csv.rfind("entry,", 0), 0u);
  EXPECT_NE(csv.find("\r\n"), std::string::npos);
}

TEST(Run, SingleSuite) {
  const auto cfg = parse_config(Json::parse(kSmall), "small.json");
  const auto out = run_suite(cfg, "deviation");
  EXPECT_TRUE(out.error.empty());
  EXPECT_EQ(out.counts.violation, 0u);
  EXPECT_EQ(out.counts.pass, 2u);
  EXPECT_THROW(run_suite(cfg, "pde"), std::invalid_argument);
}

#ifdef DYNRISK_CLI
TEST(Cli, ExitCodesAndListing) {
  const auto dir = scratch_dir("cli");
  const std::string cli = DYNRISK_CLI;
  const auto good = dir / "good.json";
  std::ofstream(good) << kSmall;
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << replace(kSmall, R"("seed": "42")", R"("seed": "x")");

  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > " + (dir / "stdout.txt").string() + " 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  EXPECT_EQ(run("run " + good.string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
  EXPECT_EQ(run("run " + bad.string()), 2);
  EXPECT_NE(slurp(dir / "stdout.txt").find("$.seed"), std::string::npos);
  EXPECT_EQ(run("list-suites --json"), 0);
  const auto listing = Json::parse(slurp(dir / "stdout.txt"));
  EXPECT_EQ(listing.size(), suite_catalog().size());
  EXPECT_NE(run("frobnicate"), 0);
}
#endif

TEST(ShippedConfigs, AllParse) {
  const fs::path dir = fs::path(DYNRISK_SOURCE_DIR) / "configs";
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 9u);
}
