#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emc/bench.hpp"
#include "emc/models/rbc.hpp"

namespace {

namespace fs = std::filesystem;
using namespace emc;
using namespace emc::bench;

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("emc_bench_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& body) {
  fs::path p = dir / name;
  std::ofstream out(p);
  out << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string kTinyGrowth =
    "[experiment]\n"
    "name = growth\n"
    "\n"
    "[emc]\n"
    "iters = 2\n"
    "paths = 200\n"
    "sa_iters = 40\n"
    "seed = 3\n"
    "\n"
    "[stats]\n"
    "paths = 400\n"
    "\n"
    "[output]\n"
    "dir = OUTDIR\n";

std::string tiny_growth_config(const fs::path& out_dir) {
  std::string body = kTinyGrowth;
  body.replace(body.find("OUTDIR"), 6, out_dir.string());
  return body;
}

}  // namespace

TEST_CASE("config files parse sections, comments, and values") {
  io::Config cfg = io::Config::parse_text(
      "# comment\n"
      "[alpha]\n"
      "x = 1.5\n"
      "name = hello world \n"
      "list = 1, 2.5 ,3\n"
      "; another comment\n"
      "[beta]\n"
      "n = 42\n",
      "inline");
  REQUIRE(cfg.has("alpha", "x"));
  REQUIRE(cfg.get_double("alpha", "x") == 1.5);
  REQUIRE(cfg.get_string("alpha", "name") == "hello world");
  REQUIRE(cfg.get_int("beta", "n") == 42);
  REQUIRE(cfg.get_double_list("alpha", "list") == std::vector<double>{1.0, 2.5, 3.0});
  REQUIRE(cfg.get_int("beta", "missing", 7) == 7);
  REQUIRE_FALSE(cfg.has("beta", "missing"));
}

TEST_CASE("config parse errors carry origin and line") {
  REQUIRE_THROWS_WITH(io::Config::parse_text("x = 1\n", "cfg"),
                      Catch::Matchers::ContainsSubstring("cfg:1"));
  REQUIRE_THROWS_WITH(io::Config::parse_text("[a]\nbad line\n", "cfg"),
                      Catch::Matchers::ContainsSubstring("cfg:2"));
  REQUIRE_THROWS_WITH(io::Config::parse_text("[unterminated\n", "cfg"),
                      Catch::Matchers::ContainsSubstring("cfg:1"));

  io::Config cfg = io::Config::parse_text("[a]\nx = 1.5z\nn = nope\n", "cfg");
  REQUIRE_THROWS_AS(cfg.get_double("a", "x"), io::ConfigError);
  REQUIRE_THROWS_AS(cfg.get_int("a", "n"), io::ConfigError);
  REQUIRE_THROWS_AS(cfg.get_string("a", "missing"), io::ConfigError);
  REQUIRE_THROWS_AS(io::Config::parse_file("/nonexistent/path.cfg"), io::ConfigError);
}

TEST_CASE("shortest round-trip formatting of doubles") {
  REQUIRE(io::format_double(0.0) == "0");
  REQUIRE(io::format_double(1.5) == "1.5");
  REQUIRE(io::format_double(-3.0) == "-3");
  double pi = 3.141592653589793;
  std::string s = io::format_double(pi);
  REQUIRE(std::strtod(s.c_str(), nullptr) == pi);
  double tiny = 1.0000000000000002;
  REQUIRE(std::strtod(io::format_double(tiny).c_str(), nullptr) == tiny);
  double big = 1.8374618274618294e17;
  REQUIRE(std::strtod(io::format_double(big).c_str(), nullptr) == big);
}

TEST_CASE("csv writer commits atomically") {
  fs::path dir = temp_dir("csv");
  fs::path target = dir / "sub" / "table.csv";
  {
    io::CsvWriter w(target);
    w.write_row({"a", "b"});
    w.write_row({"1", "two, maybe"});
    // not committed yet
    REQUIRE_FALSE(fs::exists(target));
  }
  // abandoned writer leaves nothing behind
  REQUIRE_FALSE(fs::exists(target));

  {
    io::CsvWriter w(target);
    w.write_row({"a", "b"});
    w.write_row({"1", "2"});
    w.commit();
  }
  REQUIRE(slurp(target) == "a,b\n1,2\n");
}

TEST_CASE("experiment loader rejects bad configurations") {
  fs::path dir = temp_dir("loader");

  auto expect_error = [&](const std::string& body, const std::string& needle) {
    fs::path p = write_config(dir, "bad.cfg", body);
    REQUIRE_THROWS_WITH(load_experiment_config(p.string()),
                        Catch::Matchers::ContainsSubstring(needle));
  };

  expect_error("[emc]\niters = 2\n", "experiment");
  expect_error("[experiment]\nname = frontier\n", "unknown experiment 'frontier'");
  expect_error("[experiment]\nname = custom\n", "not supported by this build");
  expect_error("[experiment]\nname = growth\n[emc]\niters = 0\n", "iters");
  expect_error("[experiment]\nname = growth\n[emc]\npaths = 1\n", "paths");
  expect_error("[experiment]\nname = growth\n[emc]\nsa_iters = 0\n", "sa_iters");
  expect_error("[experiment]\nname = growth\n[emc]\nseed = 5\n[stats]\nseed = 5\n",
               "stats.seed must differ");
  expect_error("[experiment]\nname = growth\n[baselines]\nlist = lq\n", "baseline");
  expect_error("[experiment]\nname = growth\n[sa]\na0 = 0.5, -1\n", "a0");
  expect_error("[experiment]\nname = rbc\n[grid]\npoints = 1\n", "grid");
}

TEST_CASE("experiment loader applies defaults and overrides") {
  fs::path dir = temp_dir("defaults");
  fs::path p = write_config(dir, "growth.cfg", "[experiment]\nname = growth\n");

  ExperimentConfig cfg = load_experiment_config(p.string());
  REQUIRE(cfg.experiment == "growth");
  REQUIRE(cfg.emc.max_outer_iters == 5);
  REQUIRE(cfg.emc.n_paths == 10000);
  REQUIRE(cfg.emc.sa_config.max_iters == 2000);
  REQUIRE(cfg.emc.seed == 1);
  REQUIRE(cfg.eval_paths == 10000);
  REQUIRE(cfg.eval_seed == 2);  // emc seed + 1
  REQUIRE(cfg.baselines == std::vector<std::string>{"analytic"});
  REQUIRE(cfg.output_dir == "out/growth");

  CliOverrides o;
  o.seed = 9;
  o.paths = 500;
  o.sa_iters = 17;
  o.iters = 3;
  o.out_dir = (dir / "elsewhere").string();
  ExperimentConfig cfg2 = load_experiment_config(p.string(), o);
  REQUIRE(cfg2.emc.seed == 9);
  REQUIRE(cfg2.emc.n_paths == 500);
  REQUIRE(cfg2.emc.sa_config.max_iters == 17);
  REQUIRE(cfg2.emc.max_outer_iters == 3);
  REQUIRE(cfg2.eval_seed == 10);
  REQUIRE(cfg2.output_dir == (dir / "elsewhere").string());

  // overriding the seed onto the configured stats seed must still be rejected
  fs::path q = write_config(dir, "clash.cfg",
                            "[experiment]\nname = growth\n[stats]\nseed = 9\n");
  REQUIRE_THROWS_AS(load_experiment_config(q.string(), o), io::ConfigError);
}

TEST_CASE("policy grids cover the requested rectangle") {
  models::RbcParams rp;
  models::RbcSteadyState ss = models::rbc_steady_state(rp);
  ControlProblem problem = models::build_rbc(rp);
  PolicyFn lq = models::lq_policy(rp, ss);

  fs::path dir = temp_dir("grid");
  fs::path csv = dir / "grid.csv";

  GridPolicy pol;
  pol.name = "lq";
  pol.policy = lq;
  pol.derived.push_back({"consumption", [&rp](int, std::span<const double> s,
                                              std::span<const double> c) {
                           double y = std::exp(s[1]) * std::pow(s[0], rp.gamma) +
                                      (1.0 - rp.delta) * s[0];
                           return y * logistic_reciprocal(c[0]);
                         }});

  std::vector<GridAxis> axes{{"k", 10.0, 5.0, 3}, {"x", 0.0, 0.0, 1}};
  emit_policy_grid(problem, 2, axes, {}, {pol}, csv);

  std::string text = slurp(csv);
  REQUIRE(text.rfind("k,x,lq_control_1,lq_consumption\n", 0) == 0);
  int rows = 0;
  for (char ch : text)
    if (ch == '\n') ++rows;
  REQUIRE(rows == 4);  // header + 3 grid points
  REQUIRE(text.find("\n10,0,") != std::string::npos);
  REQUIRE(text.find("\n15,0,") != std::string::npos);
  REQUIRE(text.find("\n20,0,") != std::string::npos);

  REQUIRE_THROWS_AS(emit_policy_grid(problem, 6, axes, {}, {pol}, csv), std::out_of_range);
  REQUIRE_THROWS_AS(emit_policy_grid(problem, -1, axes, {}, {pol}, csv), std::out_of_range);
  std::vector<GridAxis> wrong{{"k", 10.0, 5.0, 3}};
  REQUIRE_THROWS_AS(emit_policy_grid(problem, 2, wrong, {}, {pol}, csv), std::invalid_argument);
}

TEST_CASE("grid rows reproduce the fixed point of the log-linear rule") {
  models::RbcParams rp;
  models::RbcSteadyState ss = models::rbc_steady_state(rp);
  ControlProblem problem = models::build_rbc(rp);

  GridPolicy pol;
  pol.name = "lq";
  pol.policy = models::lq_policy(rp, ss);
  pol.derived.push_back({"consumption", [&rp](int, std::span<const double> s,
                                              std::span<const double> c) {
                           double y = std::exp(s[1]) * std::pow(s[0], rp.gamma) +
                                      (1.0 - rp.delta) * s[0];
                           return y * logistic_reciprocal(c[0]);
                         }});

  fs::path dir = temp_dir("fixedpoint");
  fs::path csv = dir / "point.csv";
  std::vector<GridAxis> axes{{"k", ss.k_star, 0.0, 1}, {"x", 0.0, 0.0, 1}};
  emit_policy_grid(problem, 0, axes, {}, {pol}, csv);

  std::string text = slurp(csv);
  auto last_comma = text.rfind(',');
  double g = std::strtod(text.c_str() + last_comma + 1, nullptr);
  double y_star = std::pow(ss.k_star, rp.gamma) + (1.0 - rp.delta) * ss.k_star;
  REQUIRE(g == Catch::Approx(y_star - ss.k_star).epsilon(1e-9));
}

TEST_CASE("growth experiment writes the advertised files") {
  fs::path dir = temp_dir("run_growth");
  fs::path out = dir / "out";
  fs::path cfg_path = write_config(dir, "growth.cfg", tiny_growth_config(out));

  ExperimentConfig cfg = load_experiment_config(cfg_path.string());
  RunReport report = run_experiment(cfg);

  REQUIRE(fs::exists(out / "trace.csv"));
  REQUIRE(fs::exists(out / "policy.csv"));
  REQUIRE(fs::exists(out / "stats.csv"));
  REQUIRE(fs::exists(out / "plotdata" / "objective_basis-linear.csv"));
  REQUIRE(fs::exists(out / "plotdata" / "objective_basis-affine.csv"));

  std::string trace = slurp(out / "trace.csv");
  REQUIRE(trace.rfind("variant,k,start_mean,start_stderr,end_mean,end_stderr,accepted\n", 0) == 0);
  // two variants, two sweeps each
  int rows = -1;
  for (char ch : trace)
    if (ch == '\n') ++rows;
  REQUIRE(rows == 4);

  std::string stats = slurp(out / "stats.csv");
  REQUIRE(stats.rfind("variant,policy,sample,metric,", 0) == 0);
  REQUIRE(stats.find(",analytic,") != std::string::npos);
  REQUIRE(stats.find(",in,") != std::string::npos);
  REQUIRE(stats.find(",out,") != std::string::npos);

  // the report lists every written file and an out-of-sample value per variant
  REQUIRE(report.files.size() >= 5);
  REQUIRE(report.final_values.size() == 2);
  for (const auto& [variant, value] : report.final_values) {
    REQUIRE((variant == "basis-linear" || variant == "basis-affine"));
    REQUIRE(value.mean < 0.0);  // log-utility objective
    REQUIRE(value.mean > -8.0);
  }

  // objective series starts at k = 0 with the pre-update value
  std::string series = slurp(out / "plotdata" / "objective_basis-affine.csv");
  REQUIRE(series.rfind("k,mean,stderr\n0,", 0) == 0);
}

TEST_CASE("experiment outputs are byte-identical across reruns and threads") {
  fs::path dir = temp_dir("rerun");
  fs::path out1 = dir / "first";
  fs::path out2 = dir / "second";
  fs::path cfg1 = write_config(dir, "one.cfg", tiny_growth_config(out1));
  fs::path cfg2 = write_config(dir, "two.cfg", tiny_growth_config(out2));

  set_max_threads(1);
  run_experiment(load_experiment_config(cfg1.string()));
  set_max_threads(3);
  run_experiment(load_experiment_config(cfg2.string()));
  set_max_threads(0);

  for (const char* name : {"trace.csv", "policy.csv", "stats.csv"}) {
    CAPTURE(name);
    REQUIRE(slurp(out1 / name) == slurp(out2 / name));
  }
  REQUIRE(slurp(out1 / "plotdata" / "objective_basis-affine.csv") ==
          slurp(out2 / "plotdata" / "objective_basis-affine.csv"));
}

TEST_CASE("stats rows keep their quantiles around the mean") {
  fs::path dir = temp_dir("quantiles");
  fs::path out = dir / "out";
  fs::path cfg_path = write_config(dir, "growth.cfg", tiny_growth_config(out));
  run_experiment(load_experiment_config(cfg_path.string()));

  std::ifstream in(out / "stats.csv");
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, int> col;
  {
    std::stringstream ss(line);
    std::string field;
    int idx = 0;
    while (std::getline(ss, field, ',')) col[field] = idx++;
  }
  int checked = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    double mean = std::strtod(fields[col["mean"]].c_str(), nullptr);
    double q01 = std::strtod(fields[col["q01"]].c_str(), nullptr);
    double q99 = std::strtod(fields[col["q99"]].c_str(), nullptr);
    double lo = std::strtod(fields[col["min"]].c_str(), nullptr);
    double hi = std::strtod(fields[col["max"]].c_str(), nullptr);
    REQUIRE(q01 <= mean);
    REQUIRE(mean <= q99);
    REQUIRE(lo <= q01);
    REQUIRE(q99 <= hi);
    ++checked;
  }
  REQUIRE(checked >= 4);  // two variants x {in, out} plus baseline rows
}

#ifdef EMC_CLI_PATH
TEST_CASE("command line reports config errors with exit code one") {
  fs::path dir = temp_dir("cli");
  std::string base = std::string(EMC_CLI_PATH);

  int missing = std::system((base + " run " + (dir / "absent.cfg").string() +
                             " > /dev/null 2>&1")
                                .c_str());
  REQUIRE(WIFEXITED(missing));
  REQUIRE(WEXITSTATUS(missing) == 1);

  write_config(dir, "bad.cfg", "[experiment]\nname = fancy\n");
  int unknown = std::system((base + " run " + (dir / "bad.cfg").string() +
                             " > /dev/null 2>&1")
                                .c_str());
  REQUIRE(WIFEXITED(unknown));
  REQUIRE(WEXITSTATUS(unknown) == 1);

  fs::path out = dir / "out";
  fs::path good = write_config(dir, "good.cfg", tiny_growth_config(out));
  int ok = std::system((base + " run " + good.string() + " > /dev/null 2>&1").c_str());
  REQUIRE(WIFEXITED(ok));
  REQUIRE(WEXITSTATUS(ok) == 0);
  REQUIRE(fs::exists(out / "trace.csv"));
}
#endif
