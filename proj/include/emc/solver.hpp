#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "emc/crn.hpp"
#include "emc/problem.hpp"
#include "emc/sa.hpp"
#include "emc/simulate.hpp"

namespace emc {

/**
 * Outer-solver configuration. max_outer_iters is the number of full backward
 * sweeps K, n_paths the Monte-Carlo batch size N per sweep. rel_tol > 0 stops
 * early once the relative change of consecutive sweep means falls below it;
 * 0 disables early stopping.
 */
struct EmcConfig {
  int max_outer_iters = 1;
  int n_paths = 2;
  SAConfig sa_config;
  std::uint64_t seed = 0;
  double rel_tol = 0.0;

  void validate() const {
    if (max_outer_iters < 1) throw std::invalid_argument("EmcConfig: max_outer_iters must be >= 1");
    if (n_paths < 2) throw std::invalid_argument("EmcConfig: n_paths must be >= 2");
    if (!(rel_tol >= 0.0)) throw std::invalid_argument("EmcConfig: rel_tol must be >= 0");
    sa_config.validate();
  }
};

/**
 * Returns candidate iff it strictly improves the guarded objective
 * (new_value > old_value); ties and non-finite candidates keep the incumbent.
 */
template <class T>
inline const T& improvement_guard(double old_value, double new_value, const T& incumbent,
                                  const T& candidate) {
  return new_value > old_value ? candidate : incumbent;
}

/** One guarded coordinate sub-step of a sweep (period T-1 .. 1, then 0 for c0). */
struct SubStepRecord {
  int period = 0;
  bool accepted = false;
  double incumbent_value = 0.0;
  double incumbent_std_error = 0.0;
  double candidate_value = 0.0;
  double candidate_std_error = 0.0;
};

/**
 * Record of one backward sweep. start_* is the full objective at the
 * incoming parameters under the sweep's evaluation stream; end_* the
 * re-simulated objective at the outgoing parameters under the same stream.
 * chained_end_mean accumulates start_mean plus the accepted guard
 * improvements, so it is non-decreasing across the sweep by construction and
 * matches end_mean up to floating-point accumulation order.
 */
struct SweepRecord {
  int k = 0;
  double start_mean = 0.0;
  double start_std_error = 0.0;
  double end_mean = 0.0;
  double end_std_error = 0.0;
  double chained_end_mean = 0.0;
  std::vector<SubStepRecord> substeps;
  double wall_seconds = 0.0;

  int accepted_count() const {
    int n = 0;
    for (const auto& s : substeps) n += s.accepted ? 1 : 0;
    return n;
  }
};

struct SweepResult {
  PolicyParameters params;
  SweepRecord record;
};

struct IterationTrace {
  std::vector<SweepRecord> per_iteration;
  std::vector<PolicyParameters> iterates;
  PolicyParameters final_params;
};

namespace detail {

/** Subproblem stream tag for guarded evaluations; SA subproblems use 0..T-1. */
inline std::uint64_t guard_tag(const ControlProblem& problem) {
  return static_cast<std::uint64_t>(problem.horizon);
}

struct SweepWorkspace {
  std::vector<double> prefix;  // (T+1) running utility sums per path, separable only
  std::vector<double> full;    // per-path full-objective values for guard stats
};

/**
 * Root-mean-square magnitude of each basis feature over the frozen states at
 * one period, accumulated in path order so the result does not depend on the
 * thread count. A coordinate whose feature vanishes everywhere gets a floor
 * instead of zero.
 */
inline std::vector<double> basis_scales(const ControlProblem& problem, const TrajectoryBatch& base,
                                        int period) {
  std::vector<double> scales(problem.param_dim, 0.0);
  std::vector<double> phi(problem.control_dim);
  for (int i = 0; i < problem.param_dim; ++i) {
    double ss = 0.0;
    for (int l = 0; l < base.n_paths; ++l) {
      problem.basis(period, i, base.state(l, period), phi);
      for (double v : phi) ss += v * v;
    }
    scales[i] = std::max(std::sqrt(ss / base.n_paths), 1e-6);
  }
  return scales;
}

/**
 * Default SA gains for a theta subproblem. A probe of b0_i on coordinate i
 * moves the control by about b0_i * |phi_i|, so unscaled gains put probes of
 * wildly different effective sizes on features of different magnitude (a
 * constant next to R^2, say) and the finite differences turn into garbage.
 * Scaling b0_i by 1/rms(phi_i) and a0_i by 1/rms(phi_i)^2 makes every
 * coordinate probe and step in the same control-space units.
 */
inline SAConfig scaled_sa_config(const SAConfig& cfg, const std::vector<double>& scales) {
  SAConfig out = cfg;
  if (out.a0.empty()) {
    out.a0.resize(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) out.a0[i] = 1.0 / (scales[i] * scales[i]);
  }
  if (out.b0.empty()) {
    out.b0.resize(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) out.b0[i] = 1.0 / scales[i];
  }
  return out;
}

/**
 * Full-objective guard statistics at one subproblem: tail (or full, at
 * period 0) per-path values from the evaluator plus the frozen prefix sums.
 */
inline SurrogateValue guard_stats(const SubproblemEvaluator& eval, std::span<const double> y,
                                  const CrnStream& stream, const ControlProblem& problem,
                                  int period, int n_paths, SweepWorkspace& ws) {
  std::span<const double> tail = eval.path_values(y, stream);
  if (!problem.separable() || period == 0) return sample_stats(tail);
  int stride = problem.horizon + 1;
  ws.full.resize(n_paths);
  for (int l = 0; l < n_paths; ++l)
    ws.full[l] = ws.prefix[static_cast<std::size_t>(l) * stride + period] + tail[l];
  return sample_stats(ws.full);
}

}  // namespace detail

/**
 * One backward sweep of iteration k from x_prev.
 *
 * Simulates N paths at x_prev, then for t = T-1..1 maximizes the frozen-state
 * tail objective over theta_t by stochastic approximation, and finally the
 * full objective over c0. Each sub-step's SA candidate is accepted only if it
 * strictly improves the objective under the sweep's evaluation stream, which
 * is also the stream the start paths were drawn from; rejected candidates
 * leave the incumbent in place, so the guarded objective never decreases
 * within the sweep.
 */
inline SweepResult emc_sweep(const ControlProblem& problem, const PolicyParameters& x_prev,
                             const EmcConfig& config, int k) {
  config.validate();
  problem.validate();
  check_parameters(problem, x_prev);
  if (k < 1) throw std::invalid_argument("emc_sweep: sweep index must be >= 1");
  auto t_start = std::chrono::steady_clock::now();

  const int T = problem.horizon;
  const int N = config.n_paths;
  CrnStream root(config.seed);
  CrnStream guard_stream = root.at(static_cast<std::uint64_t>(k), detail::guard_tag(problem), 0);

  TrajectoryBatch base = simulate_paths(problem, x_prev, N, guard_stream);
  SurrogateValue start = sample_stats(base.path_utilities);

  SweepResult out;
  out.params = x_prev;
  out.record.k = k;
  out.record.start_mean = start.mean;
  out.record.start_std_error = start.std_error;

  detail::SweepWorkspace ws;
  if (problem.separable() && T > 1) {
    // prefix[l * (T+1) + t] = realized utility of path l over periods < t,
    // accumulated in simulation order
    ws.prefix.assign(static_cast<std::size_t>(N) * (T + 1), 0.0);
    for (int l = 0; l < N; ++l) {
      double run = 0.0;
      std::size_t row = static_cast<std::size_t>(l) * (T + 1);
      for (int t = 0; t < T; ++t) {
        ws.prefix[row + t] = run;
        run += period_utility_of(problem, base, l, t);
      }
      ws.prefix[row + T] = run;
    }
  }

  double chained = start.mean;
  auto run_substep = [&](int period) {
    std::vector<std::vector<double>> fixed;
    if (period == 0) {
      fixed.assign(out.params.thetas.begin(), out.params.thetas.end());
    } else {
      fixed.assign(out.params.thetas.begin() + period, out.params.thetas.end());
    }
    SubproblemEvaluator eval(problem, base, period, std::move(fixed));

    std::vector<double>& incumbent =
        period == 0 ? out.params.c0 : out.params.thetas[static_cast<std::size_t>(period) - 1];
    StochasticOracle oracle = [&](std::span<const double> y, std::uint64_t q) {
      return eval.evaluate_mean(
          y, root.at(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(period), q));
    };
    SaResult sa = sa_maximize(incumbent, config.sa_config, oracle);

    SurrogateValue g_inc = detail::guard_stats(eval, incumbent, guard_stream, problem, period, N, ws);
    SurrogateValue g_cand = detail::guard_stats(eval, sa.y, guard_stream, problem, period, N, ws);
    bool accepted = g_cand.mean > g_inc.mean;
    incumbent = improvement_guard(g_inc.mean, g_cand.mean, incumbent, sa.y);
    if (accepted) chained += g_cand.mean - g_inc.mean;

    SubStepRecord rec;
    rec.period = period;
    rec.accepted = accepted;
    rec.incumbent_value = g_inc.mean;
    rec.incumbent_std_error = g_inc.std_error;
    rec.candidate_value = g_cand.mean;
    rec.candidate_std_error = g_cand.std_error;
    out.record.substeps.push_back(std::move(rec));
  };

  for (int t = T - 1; t >= 1; --t) run_substep(t);
  run_substep(0);

  out.record.chained_end_mean = chained;
  if (out.record.accepted_count() == 0) {
    out.record.end_mean = start.mean;
    out.record.end_std_error = start.std_error;
  } else {
    SurrogateValue end = surrogate_full(problem, out.params, N, guard_stream);
    out.record.end_mean = end.mean;
    out.record.end_std_error = end.std_error;
  }
  out.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

namespace detail {

inline IterationTrace solve_impl(const ControlProblem& problem, const PolicyParameters& x0,
                                 const EmcConfig& config) {
  config.validate();
  problem.validate();
  check_parameters(problem, x0);
  IterationTrace trace;
  trace.iterates.push_back(x0);
  PolicyParameters x = x0;
  for (int k = 1; k <= config.max_outer_iters; ++k) {
    SweepResult sweep = emc_sweep(problem, x, config, k);
    x = std::move(sweep.params);
    trace.per_iteration.push_back(std::move(sweep.record));
    trace.iterates.push_back(x);
    if (config.rel_tol > 0.0 && k >= 2) {
      double cur = trace.per_iteration[k - 1].end_mean;
      double prev = trace.per_iteration[k - 2].end_mean;
      if (std::abs(cur - prev) <= config.rel_tol * std::max(1.0, std::abs(cur))) break;
    }
  }
  trace.final_params = x;
  return trace;
}

}  // namespace detail

/** Full solver for additively separable problems: K guarded sweeps from x0. */
inline IterationTrace solve(const ControlProblem& problem, const PolicyParameters& x0,
                            const EmcConfig& config) {
  if (!problem.separable())
    throw std::invalid_argument("solve: problem has a general utility, use solve_general");
  return detail::solve_impl(problem, x0, config);
}

/**
 * Solver accepting general path utilities: subproblem evaluations splice the
 * frozen path prefix with the re-simulated tail (matched by path index) and
 * score the whole path. Also accepts separable problems, where it reduces to
 * solve().
 */
inline IterationTrace solve_general(const ControlProblem& problem, const PolicyParameters& x0,
                                    const EmcConfig& config) {
  return detail::solve_impl(problem, x0, config);
}

/**
 * Post-hoc convergence diagnostics over a trace: per-sweep objective means,
 * their consecutive deltas and non-decreasing flags, parameter movement norms
 * ||x^k - x^{k-1}||_2, and the first iteration after which every remaining
 * delta is within rel_tol * max(1, |mean|) (the last iteration if none).
 */
struct ConvergenceReport {
  std::vector<double> means;
  std::vector<double> std_errors;
  std::vector<double> deltas;
  std::vector<bool> non_decreasing;
  std::vector<double> movement_norms;
  int plateau_iteration = 0;
};

inline ConvergenceReport convergence_report(const IterationTrace& trace, double rel_tol = 0.0) {
  if (trace.per_iteration.empty()) throw std::invalid_argument("convergence_report: empty trace");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("convergence_report: rel_tol must be >= 0");
  ConvergenceReport report;
  for (const auto& rec : trace.per_iteration) {
    report.means.push_back(rec.end_mean);
    report.std_errors.push_back(rec.end_std_error);
  }
  std::size_t n = report.means.size();
  for (std::size_t i = 1; i < n; ++i) {
    double d = report.means[i] - report.means[i - 1];
    report.deltas.push_back(d);
    report.non_decreasing.push_back(d >= 0.0);
  }
  for (std::size_t i = 1; i < trace.iterates.size(); ++i) {
    const PolicyParameters& a = trace.iterates[i - 1];
    const PolicyParameters& b = trace.iterates[i];
    double ss = 0.0;
    for (std::size_t j = 0; j < a.c0.size(); ++j) {
      double d = b.c0[j] - a.c0[j];
      ss += d * d;
    }
    for (std::size_t t = 0; t < a.thetas.size(); ++t)
      for (std::size_t j = 0; j < a.thetas[t].size(); ++j) {
        double d = b.thetas[t][j] - a.thetas[t][j];
        ss += d * d;
      }
    report.movement_norms.push_back(std::sqrt(ss));
  }
  int plateau = static_cast<int>(n);
  for (int k = 1; k <= static_cast<int>(n); ++k) {
    bool settled = true;
    for (std::size_t j = k; j < n; ++j) {
      double tol = rel_tol * std::max(1.0, std::abs(report.means[j]));
      if (std::abs(report.means[j] - report.means[j - 1]) > tol) {
        settled = false;
        break;
      }
    }
    if (settled) {
      plateau = k;
      break;
    }
  }
  report.plateau_iteration = plateau;
  return report;
}

}  // namespace emc
