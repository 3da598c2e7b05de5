#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "emc/math.hpp"
#include "emc/problem.hpp"

namespace emc::models {

/**
 * Business-cycle consumption problem: state (k_{t-1}, x_t) with AR(1)
 * technology x, production y = exp(x)k^gamma + (1-delta)k, consumption
 * g = y/(1+exp(c)) for t < T and g_T = y (everything consumed at the
 * horizon), discounted CRRA utility sum_t beta^t g_t^{1-tau}/(1-tau).
 */
struct RbcParams {
  double beta = 0.98;
  double gamma = 0.33;
  double tau = 0.5;
  double delta = 0.025;
  double rho = 0.95;
  double sigma_e = 0.1;
  int T = 6;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("RbcParams: beta must lie in (0,1)");
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("RbcParams: gamma must lie in (0,1)");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("RbcParams: tau must lie in (0,1)");
    if (!(delta >= 0.0 && delta <= 1.0))
      throw std::invalid_argument("RbcParams: delta must lie in [0,1]");
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("RbcParams: rho must lie in (-1,1)");
    if (!(sigma_e >= 0.0)) throw std::invalid_argument("RbcParams: sigma_e must be >= 0");
    if (T < 1) throw std::invalid_argument("RbcParams: T must be >= 1");
  }
};

struct RbcSteadyState {
  double k_star = 0.0;
  double x_star = 0.0;
  double phi = 0.0;
  double c_over_k = 0.0;
  double q = 0.0;
  double lambda = 0.0;
};

/**
 * Non-stochastic steady state and the log-linear decision-rule coefficients:
 * k* from the Euler condition, phi/c_over_k/q as displayed in the model's
 * closed-form treatment, lambda the root of lambda^2 - phi lambda + 1/beta
 * with |lambda| <= 1.
 */
inline RbcSteadyState rbc_steady_state(const RbcParams& p) {
  p.validate();
  RbcSteadyState s;
  s.x_star = 0.0;
  s.k_star = std::pow(p.beta * p.gamma * std::exp(s.x_star) / (1.0 - (1.0 - p.delta) * p.beta),
                      1.0 / (1.0 - p.gamma));
  s.c_over_k = (1.0 / p.beta - 1.0 + p.delta * (1.0 - p.gamma)) / p.gamma;
  s.phi = 1.0 + 1.0 / p.beta +
          ((1.0 - p.gamma) * (1.0 - (1.0 - p.delta) * p.beta) / p.tau) * s.c_over_k;
  double disc = s.phi * s.phi - 4.0 / p.beta;
  if (disc < 0.0)
    throw std::runtime_error("rbc_steady_state: no real decision-rule root for these parameters");
  double root = (s.phi - std::sqrt(disc)) / 2.0;
  if (std::abs(root) > 1.0)
    throw std::runtime_error("rbc_steady_state: no stable root with |lambda| <= 1");
  s.lambda = root;
  s.q = p.beta *
        ((1.0 - p.rho) * (s.c_over_k + p.delta) +
         (p.rho * p.beta / p.tau) * (1.0 / p.beta - 1.0 + p.delta) * s.c_over_k) *
        s.k_star;
  return s;
}

namespace rbc_detail {

inline double output(double k, double x, double gamma, double delta) {
  return std::exp(x) * std::pow(k, gamma) + (1.0 - delta) * k;
}

inline double crra(double g, double tau) {
  if (tau == 0.5) return 2.0 * std::sqrt(g);
  return std::pow(g, 1.0 - tau) / (1.0 - tau);
}

}  // namespace rbc_detail

inline ControlProblem build_rbc(const RbcParams& params) {
  params.validate();
  RbcSteadyState steady = rbc_steady_state(params);
  ControlProblem p;
  p.horizon = params.T;
  p.state_dim = 2;
  p.control_dim = 1;
  p.shock_dim = 1;
  p.initial_state = {steady.k_star, 0.0};
  const double gamma = params.gamma, delta = params.delta, rho = params.rho,
               sigma = params.sigma_e, tau = params.tau;
  const int T = params.T;
  auto discounts = std::make_shared<std::vector<double>>(T + 1);
  for (int t = 0; t <= T; ++t) (*discounts)[t] = std::pow(params.beta, t);

  p.evolve = [gamma, delta, rho](int, std::span<const double> s, std::span<const double> c,
                                 std::span<const double> z, std::span<double> s_next) {
    double y = rbc_detail::output(s[0], s[1], gamma, delta);
    double g = y * logistic_reciprocal(c[0]);
    s_next[0] = y - g;
    s_next[1] = rho * s[1] + z[0];
  };
  p.shock_sampler = [sigma](int, const CrnCell& cell, std::span<double> z) {
    z[0] = sigma * cell.component(0).next_normal();
  };
  p.period_utility = [discounts, gamma, delta, tau, T](int t, std::span<const double> s_next,
                                                       std::span<const double> s,
                                                       std::span<const double> c) {
    double y = rbc_detail::output(s[0], s[1], gamma, delta);
    double g = y * logistic_reciprocal(c[0]);
    double u = (*discounts)[t] * rbc_detail::crra(g, tau);
    if (t == T - 1) {
      double g_final = rbc_detail::output(s_next[0], s_next[1], gamma, delta);
      u += (*discounts)[T] * rbc_detail::crra(g_final, tau);
    }
    return u;
  };
  p.param_dim = 4;
  p.basis = [gamma](int, int i, std::span<const double> s, std::span<double> out) {
    switch (i) {
      case 0: out[0] = 1.0; break;
      case 1: out[0] = s[0]; break;
      case 2: out[0] = std::exp(s[1]); break;
      default: out[0] = std::pow(s[0], gamma); break;
    }
  };
  return p;
}

/**
 * Log-linear decision rule of the infinite-horizon approximation,
 * k_t = (k*)^{1-lambda} exp[(q/k*) lambda/(1 - beta rho lambda) x] k_{t-1}^lambda,
 * expressed as a control: c = log(y/g - 1) with g = y - k_t, floored at 1e-8
 * when the rule overshoots available output.
 */
inline PolicyFn lq_policy(const RbcParams& params, const RbcSteadyState& steady) {
  params.validate();
  const double gamma = params.gamma, delta = params.delta;
  const double lam = steady.lambda;
  const double k_star = steady.k_star;
  const double x_coef = (steady.q / k_star) * lam / (1.0 - params.beta * params.rho * lam);
  const double k_base = std::pow(k_star, 1.0 - lam);
  return [gamma, delta, lam, x_coef, k_base](int, std::span<const double> s,
                                             std::span<double> control) {
    double k_prev = s[0], x = s[1];
    double y = rbc_detail::output(k_prev, x, gamma, delta);
    double k_next = k_base * std::exp(x_coef * x) * std::pow(k_prev, lam);
    double g = std::max(y - k_next, 1e-8);
    control[0] = std::log(std::max(y / g - 1.0, 1e-300));
  };
}

}  // namespace emc::models
