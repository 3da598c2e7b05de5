#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emc/io/config.hpp"
#include "emc/io/csv.hpp"
#include "emc/models/growth.hpp"
#include "emc/models/network_pricing.hpp"
#include "emc/models/rbc.hpp"
#include "emc/models/single_pricing.hpp"
#include "emc/simulate.hpp"
#include "emc/solver.hpp"
#include "emc/stats.hpp"

namespace emc::bench {

/** Command-line values that take precedence over the config file. */
struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> sa_iters;
  std::optional<int> iters;
};

struct ExperimentConfig {
  std::string experiment;  // growth | pricing-single | pricing-multi | rbc
  io::Config raw;
  EmcConfig emc;
  int eval_paths = 0;
  std::uint64_t eval_seed = 0;
  std::vector<std::string> baselines;
  std::string output_dir;
  int grid_points = 21;
  int grid_period = -1;  // -1: experiment-specific default
};

namespace bench_detail {

inline const std::vector<std::string>& allowed_baselines(const std::string& experiment) {
  static const std::vector<std::string> growth{"analytic"};
  static const std::vector<std::string> single{"plugin"};
  static const std::vector<std::string> multi{"mto", "mts"};
  static const std::vector<std::string> rbc{"lq"};
  static const std::vector<std::string> none{};
  if (experiment == "growth") return growth;
  if (experiment == "pricing-single") return single;
  if (experiment == "pricing-multi") return multi;
  if (experiment == "rbc") return rbc;
  return none;
}

}  // namespace bench_detail

inline ExperimentConfig load_experiment_config(const std::string& path,
                                               const CliOverrides& overrides = {}) {
  ExperimentConfig cfg;
  cfg.raw = io::Config::parse_file(path);
  cfg.experiment = cfg.raw.get_string("experiment", "name");
  if (cfg.experiment == "custom")
    throw io::ConfigError(
        "experiment 'custom' is declared but not supported by this build; "
        "use one of: growth, pricing-single, pricing-multi, rbc");
  if (cfg.experiment != "growth" && cfg.experiment != "pricing-single" &&
      cfg.experiment != "pricing-multi" && cfg.experiment != "rbc")
    throw io::ConfigError("unknown experiment '" + cfg.experiment +
                          "'; expected growth, pricing-single, pricing-multi, or rbc");

  cfg.emc.max_outer_iters = static_cast<int>(cfg.raw.get_int("emc", "iters", 5));
  cfg.emc.n_paths = static_cast<int>(cfg.raw.get_int("emc", "paths", 10000));
  cfg.emc.sa_config.max_iters = static_cast<int>(cfg.raw.get_int("emc", "sa_iters", 2000));
  cfg.emc.seed = static_cast<std::uint64_t>(cfg.raw.get_int("emc", "seed", 1));
  cfg.emc.rel_tol = cfg.raw.get_double("emc", "rel_tol", 0.0);
  if (cfg.raw.has("sa", "a0")) cfg.emc.sa_config.a0 = cfg.raw.get_double_list("sa", "a0");
  if (cfg.raw.has("sa", "b0")) cfg.emc.sa_config.b0 = cfg.raw.get_double_list("sa", "b0");

  if (overrides.iters) cfg.emc.max_outer_iters = *overrides.iters;
  if (overrides.paths) cfg.emc.n_paths = *overrides.paths;
  if (overrides.sa_iters) cfg.emc.sa_config.max_iters = *overrides.sa_iters;
  if (overrides.seed) cfg.emc.seed = *overrides.seed;

  if (cfg.emc.max_outer_iters < 1) throw io::ConfigError("emc.iters must be >= 1");
  if (cfg.emc.n_paths < 2) throw io::ConfigError("emc.paths must be >= 2");
  if (cfg.emc.sa_config.max_iters < 1) throw io::ConfigError("emc.sa_iters must be >= 1");
  for (double g : cfg.emc.sa_config.a0)
    if (!(g > 0.0)) throw io::ConfigError("sa.a0 entries must be > 0");
  for (double g : cfg.emc.sa_config.b0)
    if (!(g > 0.0)) throw io::ConfigError("sa.b0 entries must be > 0");

  cfg.eval_paths = static_cast<int>(cfg.raw.get_int("stats", "paths", cfg.emc.n_paths));
  if (cfg.eval_paths < 2) throw io::ConfigError("stats.paths must be >= 2");
  cfg.eval_seed = static_cast<std::uint64_t>(
      cfg.raw.get_int("stats", "seed", static_cast<long long>(cfg.emc.seed) + 1));
  if (cfg.eval_seed == cfg.emc.seed)
    throw io::ConfigError("stats.seed must differ from emc.seed (out-of-sample evaluation)");

  if (cfg.raw.has("baselines", "list"))
    cfg.baselines = cfg.raw.get_string_list("baselines", "list");
  else
    cfg.baselines = bench_detail::allowed_baselines(cfg.experiment);
  for (const auto& b : cfg.baselines) {
    const auto& allowed = bench_detail::allowed_baselines(cfg.experiment);
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == b;
    if (!ok)
      throw io::ConfigError("baseline '" + b + "' is not available for experiment '" +
                            cfg.experiment + "'");
  }

  cfg.output_dir = cfg.raw.get_string("output", "dir", "out/" + cfg.experiment);
  if (overrides.out_dir) cfg.output_dir = *overrides.out_dir;
  if (cfg.output_dir.empty()) throw io::ConfigError("output.dir must not be empty");

  cfg.grid_points = static_cast<int>(cfg.raw.get_int("grid", "points", 21));
  if (cfg.grid_points < 2) throw io::ConfigError("grid.points must be >= 2");
  cfg.grid_period = static_cast<int>(cfg.raw.get_int("grid", "period", -1));
  return cfg;
}

// ---------------------------------------------------------------------------
// Policy-surface grids

struct GridAxis {
  std::string name;
  double lo = 0.0;
  double step = 0.0;
  int count = 1;
};

/** Extra per-row column computed from the state alone (e.g. residual capacity). */
struct GridStateColumn {
  std::string name;
  std::function<double(std::span<const double>)> fn;
};

/** Quantity computed from a policy's control at the grid point (price, consumption). */
struct GridDerived {
  std::string name;
  std::function<double(int t, std::span<const double> state, std::span<const double> control)> fn;
};

struct GridPolicy {
  std::string name;
  PolicyFn policy;
  std::vector<GridDerived> derived;
};

/**
 * Evaluates each policy on the rectangular state grid spanned by `axes` (one
 * axis per state coordinate, count 1 pins a coordinate) at period `t` and
 * writes one CSV row per grid point: state, per-policy controls, per-policy
 * derived quantities.
 */
inline void emit_policy_grid(const ControlProblem& problem, int period,
                             const std::vector<GridAxis>& axes,
                             const std::vector<GridStateColumn>& state_columns,
                             const std::vector<GridPolicy>& policies,
                             const std::filesystem::path& csv_path) {
  if (period < 0 || period >= problem.horizon)
    throw std::out_of_range("emit_policy_grid: period " + std::to_string(period) +
                            " out of range [0, " + std::to_string(problem.horizon) + ")");
  if (static_cast<int>(axes.size()) != problem.state_dim)
    throw std::invalid_argument("emit_policy_grid: need one axis per state coordinate");
  for (const auto& ax : axes)
    if (ax.count < 1) throw std::invalid_argument("emit_policy_grid: axis count must be >= 1");

  io::CsvWriter csv(csv_path);
  std::vector<std::string> header;
  for (const auto& ax : axes) header.push_back(ax.name);
  for (const auto& sc : state_columns) header.push_back(sc.name);
  for (const auto& pol : policies) {
    for (int c = 0; c < problem.control_dim; ++c)
      header.push_back(pol.name + "_control_" + std::to_string(c + 1));
    for (const auto& d : pol.derived) header.push_back(pol.name + "_" + d.name);
  }
  csv.write_row(header);

  std::vector<int> idx(axes.size(), 0);
  std::vector<double> state(problem.state_dim, 0.0);
  std::vector<double> control(problem.control_dim, 0.0);
  bool done = false;
  while (!done) {
    std::vector<std::string> row;
    for (std::size_t d = 0; d < axes.size(); ++d) {
      state[d] = axes[d].lo + idx[d] * axes[d].step;
      row.push_back(io::format_double(state[d]));
    }
    for (const auto& sc : state_columns) row.push_back(io::format_double(sc.fn(state)));
    for (const auto& pol : policies) {
      pol.policy(period, state, control);
      for (int c = 0; c < problem.control_dim; ++c) row.push_back(io::format_double(control[c]));
      for (const auto& d : pol.derived) row.push_back(io::format_double(d.fn(period, state, control)));
    }
    csv.write_row(row);
    done = true;
    for (std::size_t d = axes.size(); d-- > 0;) {
      if (++idx[d] < axes[d].count) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
  }
  csv.commit();
}

// ---------------------------------------------------------------------------
// Experiment runner

struct RunReport {
  std::vector<std::string> files;
  std::vector<std::pair<std::string, SurrogateValue>> final_values;  // per variant, out-of-sample
};

namespace bench_detail {

namespace fs = std::filesystem;

struct OutputSet {
  fs::path dir;
  io::CsvWriter trace;
  io::CsvWriter policy;
  io::CsvWriter stats;
  RunReport report;

  explicit OutputSet(const fs::path& out_dir)
      : dir(out_dir),
        trace(out_dir / "trace.csv"),
        policy(out_dir / "policy.csv"),
        stats(out_dir / "stats.csv") {
    fs::create_directories(out_dir / "plotdata");
    trace.write_row({"variant", "k", "start_mean", "start_stderr", "end_mean", "end_stderr",
                     "accepted"});
    policy.write_row({"variant", "kind", "period", "index", "value"});
    stats.write_row({"variant", "policy", "sample", "metric", "n", "mean", "stderr", "std_dev",
                     "skewness", "kurtosis", "min", "q01", "q05", "q95", "q99", "max",
                     "degenerate"});
    report.files = {(out_dir / "trace.csv").string(), (out_dir / "policy.csv").string(),
                    (out_dir / "stats.csv").string()};
  }

  void commit() {
    trace.commit();
    policy.commit();
    stats.commit();
  }
};

inline void write_trace_rows(OutputSet& out, const std::string& variant,
                             const IterationTrace& trace) {
  for (const auto& rec : trace.per_iteration) {
    std::string accepted;
    for (const auto& ss : rec.substeps) accepted += ss.accepted ? '1' : '0';
    out.trace.write_row({variant, std::to_string(rec.k), io::format_double(rec.start_mean),
                         io::format_double(rec.start_std_error), io::format_double(rec.end_mean),
                         io::format_double(rec.end_std_error), accepted});
  }
}

inline void write_policy_rows(OutputSet& out, const std::string& variant,
                              const PolicyParameters& params) {
  for (std::size_t j = 0; j < params.c0.size(); ++j)
    out.policy.write_row(
        {variant, "c0", "0", std::to_string(j), io::format_double(params.c0[j])});
  for (std::size_t t = 0; t < params.thetas.size(); ++t)
    for (std::size_t i = 0; i < params.thetas[t].size(); ++i)
      out.policy.write_row({variant, "theta", std::to_string(t + 1), std::to_string(i),
                            io::format_double(params.thetas[t][i])});
}

inline void write_stats_row(OutputSet& out, const std::string& variant, const std::string& policy,
                            const std::string& sample, const std::string& metric,
                            std::span<const double> values) {
  StatsSummary s = summarize(values);
  out.stats.write_row({variant, policy, sample, metric, std::to_string(s.n),
                       io::format_double(s.mean), io::format_double(s.std_error),
                       io::format_double(s.std_dev), io::format_double(s.skewness),
                       io::format_double(s.kurtosis), io::format_double(s.min),
                       io::format_double(s.q01), io::format_double(s.q05),
                       io::format_double(s.q95), io::format_double(s.q99),
                       io::format_double(s.max), s.degenerate ? "1" : "0"});
}

inline void write_objective_series(OutputSet& out, const std::string& variant,
                                   const IterationTrace& trace) {
  fs::path path = out.dir / "plotdata" / ("objective_" + variant + ".csv");
  io::CsvWriter csv(path);
  csv.write_row({"k", "mean", "stderr"});
  if (!trace.per_iteration.empty()) {
    const auto& first = trace.per_iteration.front();
    csv.write_row({"0", io::format_double(first.start_mean),
                   io::format_double(first.start_std_error)});
  }
  for (const auto& rec : trace.per_iteration)
    csv.write_row({std::to_string(rec.k), io::format_double(rec.end_mean),
                   io::format_double(rec.end_std_error)});
  csv.commit();
  out.report.files.push_back(path.string());
}

/** Evaluation streams: in-sample = the last sweep's guard stream, out = fresh seed. */
struct EvalStreams {
  CrnStream in;
  CrnStream out;
};

inline EvalStreams eval_streams(const ControlProblem& problem, const EmcConfig& emc,
                                std::uint64_t eval_seed, const IterationTrace& trace) {
  int k_last = trace.per_iteration.empty() ? 1 : trace.per_iteration.back().k;
  CrnStream root(emc.seed);
  CrnStream fresh(eval_seed);
  return {root.at(k_last, problem.horizon, 0), fresh.at(0, problem.horizon, 0)};
}

struct EvalSample {
  TrajectoryBatch batch;
  std::vector<double> totals;
};

inline EvalSample evaluate_policy(const ControlProblem& problem, const PolicyFn& policy, int n,
                                  const CrnStream& stream) {
  EvalSample s{simulate_policy(problem, policy, n, stream), {}};
  s.totals = s.batch.path_utilities;
  return s;
}

inline std::vector<double> period_values(const ControlProblem& problem,
                                         const TrajectoryBatch& batch, int t) {
  std::vector<double> vals(batch.n_paths, 0.0);
  for (int l = 0; l < batch.n_paths; ++l) vals[l] = period_utility_of(problem, batch, l, t);
  return vals;
}

inline models::GrowthParams growth_params(const io::Config& raw) {
  models::GrowthParams p;
  p.a = raw.get_double("model", "a", p.a);
  p.b = raw.get_double("model", "b", p.b);
  p.T = static_cast<int>(raw.get_int("model", "horizon", p.T));
  p.s0 = raw.get_double("model", "s0", p.s0);
  return p;
}

inline models::SinglePricingParams single_params(const io::Config& raw, int capacity) {
  models::SinglePricingParams p;
  p.a = raw.get_double("model", "a", p.a);
  p.alpha = raw.get_double("model", "alpha", p.alpha);
  p.T = raw.get_double("model", "T", p.T);
  p.n_T = static_cast<int>(raw.get_int("model", "periods", p.n_T));
  p.n_c = capacity;
  return p;
}

inline models::NetworkSpec network_spec(const io::Config& raw) {
  models::NetworkSpec spec = models::three_node_network();
  if (raw.has("model", "incidence")) {
    std::vector<std::vector<int>> inc;
    std::istringstream rows(raw.get_string("model", "incidence"));
    std::string row;
    while (std::getline(rows, row, ';')) {
      std::istringstream cells(row);
      std::vector<int> r;
      int v;
      while (cells >> v) r.push_back(v);
      if (!r.empty()) inc.push_back(std::move(r));
    }
    spec.incidence = std::move(inc);
  }
  auto int_list = [&raw](const char* key, std::vector<int>& dst) {
    if (!raw.has("model", key)) return;
    dst.clear();
    for (double v : raw.get_double_list("model", key)) dst.push_back(static_cast<int>(v));
  };
  int_list("capacities", spec.capacities);
  if (raw.has("model", "p0")) spec.p0 = raw.get_double_list("model", "p0");
  if (raw.has("model", "eps0")) spec.eps0 = raw.get_double_list("model", "eps0");
  if (raw.has("model", "lambda0")) spec.lambda0 = raw.get_double_list("model", "lambda0");
  spec.T = raw.get_double("model", "T", spec.T);
  spec.n_T = static_cast<int>(raw.get_int("model", "periods", spec.n_T));
  return spec;
}

inline models::RbcParams rbc_params(const io::Config& raw) {
  models::RbcParams p;
  p.beta = raw.get_double("model", "beta", p.beta);
  p.gamma = raw.get_double("model", "gamma", p.gamma);
  p.tau = raw.get_double("model", "tau", p.tau);
  p.delta = raw.get_double("model", "delta", p.delta);
  p.rho = raw.get_double("model", "rho", p.rho);
  p.sigma_e = raw.get_double("model", "sigma_e", p.sigma_e);
  p.T = static_cast<int>(raw.get_int("model", "horizon", p.T));
  return p;
}

template <typename Fn>
auto config_guard(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw io::ConfigError(e.what());
  }
}

inline bool wants_baseline(const ExperimentConfig& cfg, const std::string& name) {
  for (const auto& b : cfg.baselines)
    if (b == name) return true;
  return false;
}

// --- growth ---------------------------------------------------------------

inline void run_growth(const ExperimentConfig& cfg, OutputSet& out) {
  auto params = growth_params(cfg.raw);
  std::string basis = cfg.raw.get_string("model", "basis", "both");
  std::vector<std::pair<std::string, models::GrowthBasis>> variants;
  if (basis == "both" || basis == "linear")
    variants.emplace_back("basis-linear", models::GrowthBasis::linear);
  if (basis == "both" || basis == "affine")
    variants.emplace_back("basis-affine", models::GrowthBasis::affine);
  if (variants.empty())
    throw io::ConfigError("model.basis must be linear, affine, or both; got '" + basis + "'");

  std::optional<models::GrowthAnalytic> analytic;
  if (wants_baseline(cfg, "analytic"))
    analytic = config_guard([&] { return models::growth_analytic(params); });

  for (const auto& [variant, spec] : variants) {
    ControlProblem problem = config_guard([&] { return models::build_growth(params, spec); });
    IterationTrace trace = solve(problem, zero_parameters(problem), cfg.emc);
    write_trace_rows(out, variant, trace);
    write_policy_rows(out, variant, trace.final_params);
    write_objective_series(out, variant, trace);

    auto streams = eval_streams(problem, cfg.emc, cfg.eval_seed, trace);
    PolicyFn emc_policy = make_policy(problem, trace.final_params);
    auto in = evaluate_policy(problem, emc_policy, cfg.emc.n_paths, streams.in);
    auto fresh = evaluate_policy(problem, emc_policy, cfg.eval_paths, streams.out);
    write_stats_row(out, variant, "emc", "in", "total", in.totals);
    write_stats_row(out, variant, "emc", "out", "total", fresh.totals);
    out.report.final_values.emplace_back(variant, sample_stats(fresh.totals));

    if (analytic) {
      auto controls = analytic->optimal_controls;
      PolicyFn fixed = [controls](int t, std::span<const double>, std::span<double> c) {
        c[0] = controls[static_cast<std::size_t>(t)];
      };
      auto a_in = evaluate_policy(problem, fixed, cfg.emc.n_paths, streams.in);
      auto a_out = evaluate_policy(problem, fixed, cfg.eval_paths, streams.out);
      write_stats_row(out, variant, "analytic", "in", "total", a_in.totals);
      write_stats_row(out, variant, "analytic", "out", "total", a_out.totals);
    }
  }
}

// --- single-product pricing ------------------------------------------------

inline void run_pricing_single(const ExperimentConfig& cfg, OutputSet& out) {
  std::vector<int> capacities{20, 10, 5};
  if (cfg.raw.has("model", "capacities")) {
    capacities.clear();
    for (double v : cfg.raw.get_double_list("model", "capacities"))
      capacities.push_back(static_cast<int>(v));
  }
  if (capacities.empty()) throw io::ConfigError("model.capacities must not be empty");

  for (int n_c : capacities) {
    std::string variant = "cap" + std::to_string(n_c);
    auto params = single_params(cfg.raw, n_c);
    ControlProblem problem = config_guard([&] { return models::build_single_pricing(params); });
    IterationTrace trace = solve(problem, zero_parameters(problem), cfg.emc);
    write_trace_rows(out, variant, trace);
    write_policy_rows(out, variant, trace.final_params);
    write_objective_series(out, variant, trace);

    auto streams = eval_streams(problem, cfg.emc, cfg.eval_seed, trace);
    PolicyFn emc_policy = make_policy(problem, trace.final_params);
    auto in = evaluate_policy(problem, emc_policy, cfg.emc.n_paths, streams.in);
    auto fresh = evaluate_policy(problem, emc_policy, cfg.eval_paths, streams.out);
    write_stats_row(out, variant, "emc", "in", "total", in.totals);
    write_stats_row(out, variant, "emc", "out", "total", fresh.totals);
    out.report.final_values.emplace_back(variant, sample_stats(fresh.totals));

    std::optional<PolicyFn> plugin;
    if (wants_baseline(cfg, "plugin"))
      plugin = config_guard([&] { return models::plugin_policy(params); });
    if (plugin) {
      auto p_in = evaluate_policy(problem, *plugin, cfg.emc.n_paths, streams.in);
      auto p_out = evaluate_policy(problem, *plugin, cfg.eval_paths, streams.out);
      write_stats_row(out, variant, "plugin", "in", "total", p_in.totals);
      write_stats_row(out, variant, "plugin", "out", "total", p_out.totals);
    }

    int period = cfg.grid_period >= 0 ? cfg.grid_period : params.n_T - 1;
    const double alpha = params.alpha;
    GridDerived price{"price", [alpha](int, std::span<const double>, std::span<const double> c) {
                        return softplus(c[0]) / alpha;
                      }};
    std::vector<GridPolicy> grid_policies;
    grid_policies.push_back({"emc", emc_policy, {price}});
    if (plugin) grid_policies.push_back({"plugin", *plugin, {price}});
    fs::path grid_path = out.dir / "plotdata" / ("policy_grid_" + variant + ".csv");
    emit_policy_grid(problem, period, {{"capacity", 0.0, 1.0, n_c + 1}}, {}, grid_policies,
                     grid_path);
    out.report.files.push_back(grid_path.string());
  }
}

// --- multi-product pricing ---------------------------------------------------

inline void run_pricing_multi(const ExperimentConfig& cfg, OutputSet& out) {
  models::NetworkSpec spec = network_spec(cfg.raw);
  config_guard([&] { spec.validate(); return 0; });
  double init_level = cfg.raw.get_double("model", "init_level", 100.0);
  const std::string variant = "emc";

  ControlProblem problem = config_guard([&] { return models::build_network_pricing(spec); });
  PolicyParameters init =
      config_guard([&] { return models::network_initial_params(spec, init_level); });
  IterationTrace trace = solve(problem, init, cfg.emc);
  write_trace_rows(out, variant, trace);
  write_policy_rows(out, variant, trace.final_params);
  write_objective_series(out, variant, trace);

  auto streams = eval_streams(problem, cfg.emc, cfg.eval_seed, trace);
  PolicyFn emc_policy = make_policy(problem, trace.final_params);
  auto in = evaluate_policy(problem, emc_policy, cfg.emc.n_paths, streams.in);
  auto fresh = evaluate_policy(problem, emc_policy, cfg.eval_paths, streams.out);
  write_stats_row(out, variant, "emc", "in", "total", in.totals);
  write_stats_row(out, variant, "emc", "out", "total", fresh.totals);
  out.report.final_values.emplace_back(variant, sample_stats(fresh.totals));

  // per-period revenue at the 3rd and 6th periods (1-indexed), as available
  std::vector<int> report_periods;
  if (spec.n_T >= 3) report_periods.push_back(2);
  if (spec.n_T >= 6) report_periods.push_back(5);
  for (int t : report_periods) {
    std::string metric = "period" + std::to_string(t + 1);
    write_stats_row(out, variant, "emc", "in", metric, period_values(problem, in.batch, t));
    write_stats_row(out, variant, "emc", "out", metric, period_values(problem, fresh.batch, t));
  }

  const bool want_mto = wants_baseline(cfg, "mto");
  const bool want_mts = wants_baseline(cfg, "mts");
  std::optional<models::DeterministicSolution> sol;
  if (want_mto || want_mts) sol = models::deterministic_relaxation(spec);

  auto heuristic_rows = [&](const std::string& name, const models::HeuristicRun& run_in,
                            const models::HeuristicRun& run_out) {
    write_stats_row(out, variant, name, "in", "total", run_in.totals);
    write_stats_row(out, variant, name, "out", "total", run_out.totals);
    for (int t : report_periods) {
      std::string metric = "period" + std::to_string(t + 1);
      std::vector<double> vals(run_in.n_paths);
      for (int l = 0; l < run_in.n_paths; ++l)
        vals[l] = run_in.period_revenue[static_cast<std::size_t>(l) * run_in.n_periods + t];
      write_stats_row(out, variant, name, "in", metric, vals);
      vals.resize(run_out.n_paths);
      for (int l = 0; l < run_out.n_paths; ++l)
        vals[l] = run_out.period_revenue[static_cast<std::size_t>(l) * run_out.n_periods + t];
      write_stats_row(out, variant, name, "out", metric, vals);
    }
  };
  if (want_mto)
    heuristic_rows("mto", models::simulate_mto(spec, *sol, cfg.emc.n_paths, streams.in),
                   models::simulate_mto(spec, *sol, cfg.eval_paths, streams.out));
  if (want_mts)
    heuristic_rows("mts", models::simulate_mts(spec, *sol, cfg.emc.n_paths, streams.in),
                   models::simulate_mts(spec, *sol, cfg.eval_paths, streams.out));

  // price surfaces over the leg residuals (third itinerary count pinned to 0)
  const int n_l = spec.n_legs(), n_i = spec.n_itineraries();
  if (n_l == 2 && n_i == 3) {
    std::vector<int> grid_periods;
    if (cfg.grid_period >= 0)
      grid_periods.push_back(cfg.grid_period);
    else {
      if (spec.n_T >= 3) grid_periods.push_back(2);
      if (spec.n_T >= 6) grid_periods.push_back(5);
      if (grid_periods.empty()) grid_periods.push_back(spec.n_T - 1);
    }
    std::vector<GridStateColumn> residuals;
    for (int k = 0; k < n_l; ++k)
      residuals.push_back({"r_leg" + std::to_string(k + 1), [&spec, k](std::span<const double> s) {
                             double r = spec.capacities[k];
                             for (int j = 0; j < spec.n_itineraries(); ++j)
                               r -= spec.incidence[k][j] * s[j];
                             return r;
                           }});
    std::vector<GridDerived> prices;
    for (int j = 0; j < n_i; ++j)
      prices.push_back({"price_" + std::to_string(j + 1),
                        [&spec, j](int, std::span<const double>, std::span<const double> c) {
                          return models::itinerary_price(
                              spec, j, models::clamped_intensity(spec, j, c[j]));
                        }});
    std::vector<GridPolicy> grid_policies;
    grid_policies.push_back({"emc", emc_policy, prices});
    if (sol) {
      auto lambda_hat = sol->lambda_hat;
      PolicyFn fixed = [lambda_hat](int, std::span<const double>, std::span<double> c) {
        for (std::size_t j = 0; j < lambda_hat.size(); ++j) c[j] = lambda_hat[j];
      };
      grid_policies.push_back({"heuristic", fixed, prices});
    }
    double step1 = spec.capacities[0] / double(cfg.grid_points - 1);
    double step2 = spec.capacities[1] / double(cfg.grid_points - 1);
    for (int t : grid_periods) {
      fs::path grid_path =
          out.dir / "plotdata" / ("policy_grid_p" + std::to_string(t + 1) + ".csv");
      emit_policy_grid(problem, t,
                       {{"sold_1", 0.0, step1, cfg.grid_points},
                        {"sold_2", 0.0, step2, cfg.grid_points},
                        {"sold_3", 0.0, 0.0, 1}},
                       residuals, grid_policies, grid_path);
      out.report.files.push_back(grid_path.string());
    }
  }
}

// --- real business cycle ----------------------------------------------------

inline void run_rbc(const ExperimentConfig& cfg, OutputSet& out) {
  auto params = rbc_params(cfg.raw);
  const std::string variant = "emc";
  ControlProblem problem = config_guard([&] { return models::build_rbc(params); });
  models::RbcSteadyState steady = config_guard([&] { return models::rbc_steady_state(params); });
  IterationTrace trace = solve(problem, zero_parameters(problem), cfg.emc);
  write_trace_rows(out, variant, trace);
  write_policy_rows(out, variant, trace.final_params);
  write_objective_series(out, variant, trace);

  auto streams = eval_streams(problem, cfg.emc, cfg.eval_seed, trace);
  PolicyFn emc_policy = make_policy(problem, trace.final_params);
  auto in = evaluate_policy(problem, emc_policy, cfg.emc.n_paths, streams.in);
  auto fresh = evaluate_policy(problem, emc_policy, cfg.eval_paths, streams.out);
  write_stats_row(out, variant, "emc", "in", "total", in.totals);
  write_stats_row(out, variant, "emc", "out", "total", fresh.totals);
  out.report.final_values.emplace_back(variant, sample_stats(fresh.totals));

  std::optional<PolicyFn> lq;
  if (wants_baseline(cfg, "lq")) lq = models::lq_policy(params, steady);
  if (lq) {
    auto l_in = evaluate_policy(problem, *lq, cfg.emc.n_paths, streams.in);
    auto l_out = evaluate_policy(problem, *lq, cfg.eval_paths, streams.out);
    write_stats_row(out, variant, "lq", "in", "total", l_in.totals);
    write_stats_row(out, variant, "lq", "out", "total", l_out.totals);
  }

  int period = cfg.grid_period >= 0 ? cfg.grid_period : params.T - 1;
  const double gamma = params.gamma, delta = params.delta;
  GridDerived consumption{
      "consumption", [gamma, delta](int, std::span<const double> s, std::span<const double> c) {
        double y = std::exp(s[1]) * std::pow(s[0], gamma) + (1.0 - delta) * s[0];
        return y * logistic_reciprocal(c[0]);
      }};
  std::vector<GridPolicy> grid_policies;
  grid_policies.push_back({"emc", emc_policy, {consumption}});
  if (lq) grid_policies.push_back({"lq", *lq, {consumption}});
  double k_lo = 0.5 * steady.k_star;
  double k_step = steady.k_star / double(cfg.grid_points - 1);
  fs::path grid_path = out.dir / "plotdata" / "policy_grid_emc.csv";
  emit_policy_grid(problem, period,
                   {{"k", k_lo, k_step, cfg.grid_points}, {"x", -0.2, 0.2, 3}}, {}, grid_policies,
                   grid_path);
  out.report.files.push_back(grid_path.string());
}

}  // namespace bench_detail

/**
 * Runs the configured experiment end to end: EM-C training, baseline
 * evaluation, and all output files (trace.csv, policy.csv, stats.csv, and
 * the plotdata series/grids) under the configured output directory.
 */
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  bench_detail::OutputSet out(cfg.output_dir);
  if (cfg.experiment == "growth")
    bench_detail::run_growth(cfg, out);
  else if (cfg.experiment == "pricing-single")
    bench_detail::run_pricing_single(cfg, out);
  else if (cfg.experiment == "pricing-multi")
    bench_detail::run_pricing_multi(cfg, out);
  else if (cfg.experiment == "rbc")
    bench_detail::run_rbc(cfg, out);
  else
    throw io::ConfigError("unknown experiment '" + cfg.experiment + "'");
  out.commit();
  return std::move(out.report);
}

}  // namespace emc::bench
