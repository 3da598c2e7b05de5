#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "emc/bench.hpp"
#include "emc/threading.hpp"

int main(int argc, char** argv) {
  CLI::App app{"EM-C stochastic-control benchmark runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int paths = 0, sa_iters = 0, iters = 0, threads = 0;
  run->add_option("config", config_path, "Experiment config file")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides config)");
  auto* seed_opt = run->add_option("--seed", seed, "Training seed (overrides config)");
  auto* paths_opt = run->add_option("--paths", paths, "Simulated paths N (overrides config)");
  auto* sa_opt = run->add_option("--sa-iters", sa_iters, "SA iterations m (overrides config)");
  auto* iters_opt = run->add_option("--iters", iters, "EM-C sweeps K (overrides config)");
  run->add_option("--threads", threads, "Worker thread cap (default: hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads > 0) emc::set_max_threads(threads);
    emc::bench::CliOverrides overrides;
    if (*out_opt) overrides.out_dir = out_dir;
    if (*seed_opt) overrides.seed = seed;
    if (*paths_opt) overrides.paths = paths;
    if (*sa_opt) overrides.sa_iters = sa_iters;
    if (*iters_opt) overrides.iters = iters;

    auto cfg = emc::bench::load_experiment_config(config_path, overrides);
    auto report = emc::bench::run_experiment(cfg);
    for (const auto& [variant, value] : report.final_values)
      std::printf("%s: %.6g (stderr %.3g, out-of-sample)\n", variant.c_str(), value.mean,
                  value.std_error);
    for (const auto& f : report.files) std::printf("wrote %s\n", f.c_str());
    return 0;
  } catch (const emc::io::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
