#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "emc/crn.hpp"
#include "emc/problem.hpp"
#include "emc/threading.hpp"

namespace emc {

/** Monte-Carlo estimate of an expected utility: sample mean and its standard error. */
struct SurrogateValue {
  double mean = 0.0;
  double std_error = 0.0;
};

/** Sample mean and (unbiased sample standard deviation) / sqrt(N). */
inline SurrogateValue sample_stats(std::span<const double> values) {
  std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("sample_stats: need at least 2 samples");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) {
    double d = v - mean;
    ss += d * d;
  }
  double var = ss / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

/**
 * Batch of simulated trajectories over periods start_period..horizon.
 * states holds s_{t0}..s_T per path, controls c_{t0}..c_{T-1}, shocks
 * z_{t0+1}..z_T; path_utilities the realized objective of each path
 * (tail sum when t0 > 0).
 */
struct TrajectoryBatch {
  int start_period = 0;
  int horizon = 0;
  int n_paths = 0;
  int state_dim = 0;
  int control_dim = 0;
  int shock_dim = 0;
  std::vector<double> states;
  std::vector<double> controls;
  std::vector<double> shocks;
  std::vector<double> path_utilities;

  int periods() const { return horizon - start_period; }

  std::span<const double> state(int l, int t) const {
    std::size_t idx = (static_cast<std::size_t>(l) * (periods() + 1) + (t - start_period)) * state_dim;
    return {states.data() + idx, static_cast<std::size_t>(state_dim)};
  }
  std::span<const double> control(int l, int t) const {
    std::size_t idx = (static_cast<std::size_t>(l) * periods() + (t - start_period)) * control_dim;
    return {controls.data() + idx, static_cast<std::size_t>(control_dim)};
  }
  std::span<const double> shock(int l, int j) const {
    std::size_t idx = (static_cast<std::size_t>(l) * periods() + (j - 1 - start_period)) * shock_dim;
    return {shocks.data() + idx, static_cast<std::size_t>(shock_dim)};
  }
  /** Full-path view; only meaningful when start_period == 0. */
  PathView path(int l) const {
    PathView v;
    v.horizon = horizon;
    v.state_dim = state_dim;
    v.control_dim = control_dim;
    v.states = {states.data() + static_cast<std::size_t>(l) * (periods() + 1) * state_dim,
                static_cast<std::size_t>(periods() + 1) * state_dim};
    v.controls = {controls.data() + static_cast<std::size_t>(l) * periods() * control_dim,
                  static_cast<std::size_t>(periods()) * control_dim};
    return v;
  }
};

namespace detail {

/** Draws z_{t+1} into shock using the cell addressed (path l, step t+1). */
inline void draw_shock(const ControlProblem& problem, const CrnStream& stream, int t,
                       std::uint64_t l, std::span<double> shock) {
  CrnCell cell = stream.cell(l, static_cast<std::uint64_t>(t) + 1);
  problem.shock_sampler(t, cell, shock);
}

template <class ControlFn>
TrajectoryBatch simulate_impl(const ControlProblem& problem, const ControlFn& control_fn,
                              int n_paths, const CrnStream& stream, int start_period,
                              std::span<const double> start_states) {
  problem.validate();
  if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
  if (start_period < 0 || start_period >= problem.horizon)
    throw std::invalid_argument("simulate: start_period out of range");
  if (start_period > 0) {
    if (static_cast<int>(start_states.size()) != n_paths * problem.state_dim)
      throw std::invalid_argument("simulate: start_states must hold n_paths states");
    if (!problem.separable())
      throw std::invalid_argument("simulate: tail simulation of a general-utility problem requires surrogate_tail");
  }

  TrajectoryBatch batch;
  batch.start_period = start_period;
  batch.horizon = problem.horizon;
  batch.n_paths = n_paths;
  batch.state_dim = problem.state_dim;
  batch.control_dim = problem.control_dim;
  batch.shock_dim = problem.shock_dim;
  int periods = batch.periods();
  batch.states.resize(static_cast<std::size_t>(n_paths) * (periods + 1) * problem.state_dim);
  batch.controls.resize(static_cast<std::size_t>(n_paths) * periods * problem.control_dim);
  batch.shocks.resize(static_cast<std::size_t>(n_paths) * periods * problem.shock_dim);
  batch.path_utilities.assign(n_paths, 0.0);

  const int n_s = problem.state_dim, n_c = problem.control_dim, n_z = problem.shock_dim;
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t lo, std::size_t hi) {
    std::vector<double> scratch(n_c);
    for (std::size_t l = lo; l < hi; ++l) {
      double* st = batch.states.data() + l * (periods + 1) * n_s;
      double* ct = batch.controls.data() + l * static_cast<std::size_t>(periods) * n_c;
      double* zt = batch.shocks.data() + l * static_cast<std::size_t>(periods) * n_z;
      if (start_period == 0) {
        for (int i = 0; i < n_s; ++i) st[i] = problem.initial_state[i];
      } else {
        const double* s0 = start_states.data() + l * n_s;
        for (int i = 0; i < n_s; ++i) st[i] = s0[i];
      }
      double utility = 0.0;
      for (int t = start_period; t < problem.horizon; ++t) {
        int rel = t - start_period;
        std::span<const double> s{st + static_cast<std::size_t>(rel) * n_s, static_cast<std::size_t>(n_s)};
        std::span<double> c{ct + static_cast<std::size_t>(rel) * n_c, static_cast<std::size_t>(n_c)};
        std::span<double> z{zt + static_cast<std::size_t>(rel) * n_z, static_cast<std::size_t>(n_z)};
        std::span<double> s_next{st + static_cast<std::size_t>(rel + 1) * n_s, static_cast<std::size_t>(n_s)};
        control_fn(t, s, c, std::span<double>{scratch});
        draw_shock(problem, stream, t, l, z);
        problem.evolve(t, s, c, z, s_next);
        if (problem.separable()) utility += problem.period_utility(t, s_next, s, c);
      }
      if (!problem.separable()) utility = problem.general_utility(batch.path(static_cast<int>(l)));
      batch.path_utilities[l] = utility;
    }
  });
  return batch;
}

}  // namespace detail

/** Simulates n_paths trajectories under a fixed policy function. */
inline TrajectoryBatch simulate_policy(const ControlProblem& problem, const PolicyFn& policy,
                                       int n_paths, const CrnStream& stream, int start_period = 0,
                                       std::span<const double> start_states = {}) {
  if (!policy) throw std::invalid_argument("simulate_policy: empty policy");
  return detail::simulate_impl(
      problem,
      [&](int t, std::span<const double> s, std::span<double> c, std::span<double>) {
        policy(t, s, c);
      },
      n_paths, stream, start_period, start_states);
}

/**
 * Simulates n_paths trajectories under the parameterized policy: c_0 =
 * params.c0 (when starting at period 0), later controls from the basis
 * expansion. Shocks come from the stream's cells (path l, step j), so equal
 * addresses reproduce equal paths bit for bit.
 */
inline TrajectoryBatch simulate_paths(const ControlProblem& problem, const PolicyParameters& params,
                                      int n_paths, const CrnStream& stream, int start_period = 0,
                                      std::span<const double> start_states = {}) {
  check_parameters(problem, params);
  return detail::simulate_impl(
      problem,
      [&](int t, std::span<const double> s, std::span<double> c, std::span<double> scratch) {
        if (t == 0) {
          for (int i = 0; i < problem.control_dim; ++i) c[i] = params.c0[i];
        } else {
          detail::apply_policy(problem, t, s, params.thetas[t - 1], c, scratch);
        }
      },
      n_paths, stream, start_period, start_states);
}

/** Full-horizon Monte-Carlo surrogate of the expected utility under params. */
inline SurrogateValue surrogate_full(const ControlProblem& problem, const PolicyParameters& params,
                                     int n_paths, const CrnStream& stream) {
  if (n_paths < 2) throw std::invalid_argument("surrogate_full: n_paths must be >= 2");
  TrajectoryBatch batch = simulate_paths(problem, params, n_paths, stream);
  return sample_stats(batch.path_utilities);
}

/**
 * Evaluator of one EM-C subproblem objective with reusable workspaces.
 *
 * period t >= 1: tail objective E[sum_{j=t}^{T-1} u_{j+1}] as a function of
 * theta_t, re-simulated from the frozen period-t states of `base` with the
 * remaining tail parameters held fixed; for general-utility problems the
 * frozen prefix path is spliced (same path index) with the re-simulated tail
 * and the full-path utility is used.
 *
 * period t == 0: full objective as a function of c0 with all thetas fixed.
 *
 * Shock addresses use absolute within-path steps, so evaluating under the
 * stream that generated `base` at the incumbent parameters reproduces the
 * base paths exactly.
 */
class SubproblemEvaluator {
 public:
  SubproblemEvaluator(const ControlProblem& problem, const TrajectoryBatch& base, int period,
                      std::vector<std::vector<double>> fixed_thetas)
      : problem_(&problem),
        base_(&base),
        period_(period),
        fixed_thetas_(std::move(fixed_thetas)) {
    problem.validate();
    if (base.start_period != 0) throw std::invalid_argument("SubproblemEvaluator: base batch must start at period 0");
    if (period < 0 || period >= problem.horizon)
      throw std::invalid_argument("SubproblemEvaluator: period out of range");
    int expected = period == 0 ? problem.horizon - 1 : problem.horizon - 1 - period;
    if (static_cast<int>(fixed_thetas_.size()) != expected)
      throw std::invalid_argument("SubproblemEvaluator: wrong fixed parameter count");
    for (const auto& th : fixed_thetas_)
      if (static_cast<int>(th.size()) != problem.param_dim)
        throw std::invalid_argument("SubproblemEvaluator: theta length != param_dim");
    utilities_.resize(base.n_paths);
  }

  int variable_dim() const { return period_ == 0 ? problem_->control_dim : problem_->param_dim; }

  /** Sample mean of the subproblem objective at variable value y. */
  double evaluate_mean(std::span<const double> y, const CrnStream& stream) const {
    run(y, stream);
    double total = 0.0;
    for (double u : utilities_) total += u;
    return total / static_cast<double>(utilities_.size());
  }

  SurrogateValue evaluate_stats(std::span<const double> y, const CrnStream& stream) const {
    run(y, stream);
    return sample_stats(utilities_);
  }

  /** Per-path objective values at y; the span aliases an internal buffer. */
  std::span<const double> path_values(std::span<const double> y, const CrnStream& stream) const {
    run(y, stream);
    return utilities_;
  }

 private:
  void run(std::span<const double> y, const CrnStream& stream) const {
    if (static_cast<int>(y.size()) != variable_dim())
      throw std::invalid_argument("SubproblemEvaluator: variable has wrong dimension");
    const ControlProblem& p = *problem_;
    const TrajectoryBatch& base = *base_;
    const int T = p.horizon, n_s = p.state_dim, n_c = p.control_dim, n_z = p.shock_dim;
    const int t0 = period_;
    const bool separable = p.separable();
    parallel_for(static_cast<std::size_t>(base.n_paths), [&](std::size_t lo, std::size_t hi) {
      std::vector<double> states(static_cast<std::size_t>(T + 1) * n_s);
      std::vector<double> controls(static_cast<std::size_t>(T) * n_c);
      std::vector<double> shock(n_z), scratch(n_c);
      for (std::size_t l = lo; l < hi; ++l) {
        if (!separable && t0 > 0) {
          // splice: prefix states and controls come from the frozen base path
          for (int t = 0; t < t0; ++t) {
            auto bs = base.state(static_cast<int>(l), t);
            auto bc = base.control(static_cast<int>(l), t);
            for (int i = 0; i < n_s; ++i) states[static_cast<std::size_t>(t) * n_s + i] = bs[i];
            for (int i = 0; i < n_c; ++i) controls[static_cast<std::size_t>(t) * n_c + i] = bc[i];
          }
        }
        {
          auto bs = base.state(static_cast<int>(l), t0);
          for (int i = 0; i < n_s; ++i) states[static_cast<std::size_t>(t0) * n_s + i] = bs[i];
        }
        double utility = 0.0;
        for (int t = t0; t < T; ++t) {
          std::span<const double> s{states.data() + static_cast<std::size_t>(t) * n_s,
                                    static_cast<std::size_t>(n_s)};
          std::span<double> c{controls.data() + static_cast<std::size_t>(t) * n_c,
                              static_cast<std::size_t>(n_c)};
          std::span<double> s_next{states.data() + static_cast<std::size_t>(t + 1) * n_s,
                                   static_cast<std::size_t>(n_s)};
          if (t == 0) {
            for (int i = 0; i < n_c; ++i) c[i] = y[i];
          } else {
            std::span<const double> theta =
                (t == t0 && t0 >= 1) ? y : std::span<const double>{fixed_theta(t)};
            detail::apply_policy(p, t, s, theta, c, scratch);
          }
          detail::draw_shock(p, stream, t, l, shock);
          p.evolve(t, s, c, shock, s_next);
          if (separable) utility += p.period_utility(t, s_next, s, c);
        }
        if (!separable) {
          PathView view;
          view.horizon = T;
          view.state_dim = n_s;
          view.control_dim = n_c;
          view.states = states;
          view.controls = controls;
          utility = p.general_utility(view);
        }
        utilities_[l] = utility;
      }
    });
  }

  const std::vector<double>& fixed_theta(int t) const {
    int offset = period_ == 0 ? 1 : period_ + 1;
    return fixed_thetas_[static_cast<std::size_t>(t - offset)];
  }

  const ControlProblem* problem_;
  const TrajectoryBatch* base_;
  int period_;
  std::vector<std::vector<double>> fixed_thetas_;
  mutable std::vector<double> utilities_;
};

/**
 * Tail surrogate: mean and standard error of the tail objective at
 * parameters (theta_t, ..., theta_{T-1}) = thetas_from_t, re-simulated from
 * the frozen period-t states of `base`.
 */
inline SurrogateValue surrogate_tail(const ControlProblem& problem, int t,
                                     std::span<const std::vector<double>> thetas_from_t,
                                     const TrajectoryBatch& base, const CrnStream& stream) {
  if (t < 1 || t > problem.horizon - 1) throw std::invalid_argument("surrogate_tail: t must lie in 1..T-1");
  if (static_cast<int>(thetas_from_t.size()) != problem.horizon - t)
    throw std::invalid_argument("surrogate_tail: expected T-t parameter vectors");
  if (base.n_paths < 2) throw std::invalid_argument("surrogate_tail: need at least 2 paths");
  std::vector<std::vector<double>> fixed(thetas_from_t.begin() + 1, thetas_from_t.end());
  SubproblemEvaluator eval(problem, base, t, std::move(fixed));
  return eval.evaluate_stats(thetas_from_t.front(), stream);
}

/** Recomputes u_{t+1} for one stored path of a batch (separable problems). */
inline double period_utility_of(const ControlProblem& problem, const TrajectoryBatch& batch, int l,
                                int t) {
  if (!problem.separable()) throw std::invalid_argument("period_utility_of: problem is not separable");
  if (t < batch.start_period || t >= batch.horizon)
    throw std::invalid_argument("period_utility_of: period out of range");
  return problem.period_utility(t, batch.state(l, t + 1), batch.state(l, t), batch.control(l, t));
}

}  // namespace emc
