#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emc/crn.hpp"

namespace emc {

/**
 * Policy parameter vector x = (c0, theta_1, ..., theta_{T-1}): a
 * deterministic period-0 control plus per-period basis weights.
 */
struct PolicyParameters {
  std::vector<double> c0;                   // length n_c
  std::vector<std::vector<double>> thetas;  // T-1 entries, each length d
};

/** Read-only view of one full trajectory (states s_0..s_T, controls c_0..c_{T-1}). */
struct PathView {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  std::span<const double> states;    // (horizon+1) * state_dim
  std::span<const double> controls;  // horizon * control_dim

  std::span<const double> state(int t) const {
    return states.subspan(static_cast<std::size_t>(t) * state_dim, state_dim);
  }
  std::span<const double> control(int t) const {
    return controls.subspan(static_cast<std::size_t>(t) * control_dim, control_dim);
  }
};

/**
 * Finite-horizon stochastic control problem with T decision periods:
 * s_{t+1} = evolve(t, s_t, c_t, z_{t+1}), controls c_t = policy(t, s_t, theta_t)
 * for t >= 1 and c_0 a free vector, objective the expected sum of period
 * utilities u_{t+1}(s_{t+1}, s_t, c_t) or one utility of the whole path.
 */
struct ControlProblem {
  int horizon = 0;  // T
  int state_dim = 0;
  int control_dim = 0;
  int shock_dim = 0;
  std::vector<double> initial_state;

  std::function<void(int t, std::span<const double> state, std::span<const double> control,
                     std::span<const double> shock, std::span<double> next_state)>
      evolve;
  std::function<void(int t, const CrnCell& rng, std::span<double> shock)> shock_sampler;
  std::function<double(int t, std::span<const double> next_state, std::span<const double> state,
                       std::span<const double> control)>
      period_utility;
  std::function<double(const PathView&)> general_utility;

  /** Optional direct control map; when absent the basis expansion is used. */
  std::function<void(int t, std::span<const double> state, std::span<const double> theta,
                     std::span<double> control)>
      policy_map;
  /** Basis functions phi_{t,i}: writes the control_dim values of phi_{t,i}(state). */
  std::function<void(int t, int i, std::span<const double> state, std::span<double> value)> basis;
  int param_dim = 0;  // d

  bool separable() const { return static_cast<bool>(period_utility); }

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("ControlProblem: horizon must be >= 1");
    if (state_dim < 1 || control_dim < 1 || shock_dim < 1)
      throw std::invalid_argument("ControlProblem: dimensions must be >= 1");
    if (static_cast<int>(initial_state.size()) != state_dim)
      throw std::invalid_argument("ControlProblem: initial_state size != state_dim");
    if (!evolve || !shock_sampler) throw std::invalid_argument("ControlProblem: evolve and shock_sampler are required");
    if (static_cast<bool>(period_utility) == static_cast<bool>(general_utility))
      throw std::invalid_argument("ControlProblem: exactly one of period_utility / general_utility must be set");
    if (horizon > 1 && param_dim < 1)
      throw std::invalid_argument("ControlProblem: param_dim must be >= 1 when horizon > 1");
    if (horizon > 1 && !policy_map && !basis)
      throw std::invalid_argument("ControlProblem: policy_map or basis required when horizon > 1");
  }
};

/** All-zero parameters shaped for the problem. */
inline PolicyParameters zero_parameters(const ControlProblem& problem) {
  PolicyParameters x;
  x.c0.assign(problem.control_dim, 0.0);
  x.thetas.assign(problem.horizon > 0 ? problem.horizon - 1 : 0,
                  std::vector<double>(problem.param_dim, 0.0));
  return x;
}

inline void check_parameters(const ControlProblem& problem, const PolicyParameters& x) {
  if (static_cast<int>(x.c0.size()) != problem.control_dim)
    throw std::invalid_argument("PolicyParameters: c0 length != control_dim");
  if (static_cast<int>(x.thetas.size()) != problem.horizon - 1)
    throw std::invalid_argument("PolicyParameters: expected horizon-1 theta vectors");
  for (const auto& th : x.thetas)
    if (static_cast<int>(th.size()) != problem.param_dim)
      throw std::invalid_argument("PolicyParameters: theta length != param_dim");
}

namespace detail {

/** Writes c(t, state, theta) into control; scratch must hold control_dim values. */
inline void apply_policy(const ControlProblem& problem, int t, std::span<const double> state,
                         std::span<const double> theta, std::span<double> control,
                         std::span<double> scratch) {
  if (problem.policy_map) {
    problem.policy_map(t, state, theta, control);
    return;
  }
  for (int c = 0; c < problem.control_dim; ++c) control[c] = 0.0;
  for (int i = 0; i < problem.param_dim; ++i) {
    problem.basis(t, i, state, scratch);
    for (int c = 0; c < problem.control_dim; ++c) control[c] += theta[i] * scratch[c];
  }
}

}  // namespace detail

/**
 * Control prescribed by the parameterized policy: params.c0 at t = 0, the
 * basis expansion sum_i theta_{t,i} phi_{t,i}(state) (or the problem's own
 * policy_map) for t >= 1.
 */
inline std::vector<double> policy_control(const ControlProblem& problem, int t,
                                          std::span<const double> state,
                                          const PolicyParameters& params) {
  if (t < 0 || t >= problem.horizon) throw std::invalid_argument("policy_control: period out of range");
  if (static_cast<int>(state.size()) != problem.state_dim)
    throw std::invalid_argument("policy_control: state length != state_dim");
  check_parameters(problem, params);
  std::vector<double> control(problem.control_dim, 0.0);
  if (t == 0) {
    control = params.c0;
    return control;
  }
  std::vector<double> scratch(problem.control_dim, 0.0);
  detail::apply_policy(problem, t, state, params.thetas[t - 1], control, scratch);
  return control;
}

/** Fixed (non-parametric) policy used for baseline evaluation. */
using PolicyFn = std::function<void(int t, std::span<const double> state, std::span<double> control)>;

/** Wraps parameterized controls as a PolicyFn. */
inline PolicyFn make_policy(const ControlProblem& problem, PolicyParameters params) {
  check_parameters(problem, params);
  auto shared = std::make_shared<PolicyParameters>(std::move(params));
  const ControlProblem* p = &problem;
  return [p, shared](int t, std::span<const double> state, std::span<double> control) {
    if (t == 0) {
      for (int c = 0; c < p->control_dim; ++c) control[c] = shared->c0[c];
      return;
    }
    std::vector<double> scratch(p->control_dim, 0.0);
    detail::apply_policy(*p, t, state, shared->thetas[t - 1], control, scratch);
  };
}

}  // namespace emc
