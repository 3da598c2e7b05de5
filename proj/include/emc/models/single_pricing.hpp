#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "emc/math.hpp"
#include "emc/problem.hpp"

namespace emc::models {

/**
 * Finite-horizon ticket pricing with one product: residual capacity R_t,
 * demand intensity lambda = a/(1+exp(c)) so the price is p = softplus(c)/alpha,
 * Poisson arrivals per period with mean lambda*T/n_T, and sales capped at the
 * residual capacity. Utility is the per-period revenue p * sales.
 */
struct SinglePricingParams {
  double a = 20.0;
  double alpha = 1.0;
  double T = 1.0;
  int n_T = 4;
  int n_c = 20;

  void validate() const {
    if (!(a > 0.0)) throw std::invalid_argument("SinglePricingParams: a must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("SinglePricingParams: alpha must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("SinglePricingParams: T must be positive");
    if (n_T < 1) throw std::invalid_argument("SinglePricingParams: n_T must be >= 1");
    if (n_c < 0) throw std::invalid_argument("SinglePricingParams: n_c must be >= 0");
  }
};

inline ControlProblem build_single_pricing(const SinglePricingParams& params) {
  params.validate();
  ControlProblem p;
  p.horizon = params.n_T;
  p.state_dim = 1;
  p.control_dim = 1;
  p.shock_dim = 1;
  p.initial_state = {static_cast<double>(params.n_c)};
  const double a = params.a, alpha = params.alpha, dt = params.T / params.n_T;
  p.evolve = [a, dt](int, std::span<const double> s, std::span<const double> c,
                     std::span<const double> z, std::span<double> s_next) {
    double lambda = a * logistic_reciprocal(c[0]);
    double residual = s[0];
    double arrivals = static_cast<double>(poisson_inverse(z[0], lambda * dt));
    s_next[0] = residual - std::min(residual, arrivals);
  };
  p.shock_sampler = [](int, const CrnCell& cell, std::span<double> z) {
    z[0] = cell.component(0).next_uniform();
  };
  p.period_utility = [alpha](int, std::span<const double> s_next, std::span<const double> s,
                             std::span<const double> c) {
    double price = softplus(c[0]) / alpha;
    return price * (s[0] - s_next[0]);
  };
  p.param_dim = 3;
  p.basis = [](int, int i, std::span<const double> s, std::span<double> out) {
    out[0] = i == 0 ? 1.0 : (i == 1 ? s[0] : s[0] * s[0]);
  };
  return p;
}

/**
 * Closed-form expected revenue of the continuous-time problem with unit
 * elasticity: V(n, tau) = log(sum_{k=0}^{n} (a*tau/e)^k / k!), evaluated in
 * log space. V(n, 0) = V(0, tau) = 0.
 */
inline double gvr_value(int n, double tau, double a) {
  if (n < 0) throw std::invalid_argument("gvr_value: capacity must be >= 0");
  if (!(tau >= 0.0)) throw std::invalid_argument("gvr_value: time-to-go must be >= 0");
  if (!(a > 0.0)) throw std::invalid_argument("gvr_value: demand scale must be positive");
  if (n == 0 || tau == 0.0) return 0.0;
  double log_x = std::log(a * tau) - 1.0;
  double acc = 0.0;  // log of the k=0 term
  for (int k = 1; k <= n; ++k)
    acc = logaddexp(acc, k * log_x - std::lgamma(static_cast<double>(k) + 1.0));
  return acc;
}

/**
 * Marginal-value price V(R, tau) - V(R-1, tau) + 1 of the continuous-time
 * solution, used as a fixed policy on the discrete problem. R = 0 returns
 * +infinity (sales closed).
 */
inline double plugin_price(int R, double tau, double a) {
  if (R < 0) throw std::invalid_argument("plugin_price: residual capacity must be >= 0");
  if (R == 0) return std::numeric_limits<double>::infinity();
  return gvr_value(R, tau, a) - gvr_value(R - 1, tau, a) + 1.0;
}

/**
 * The plug-in rule as a control policy: at period t with residual R, the
 * control c reproducing the plug-in price through lambda = a/(1+e^c). Requires
 * unit elasticity. Prices for every (R, t) pair are precomputed.
 */
inline PolicyFn plugin_policy(const SinglePricingParams& params) {
  params.validate();
  if (params.alpha != 1.0)
    throw std::invalid_argument("plugin_policy: closed form requires alpha = 1");
  // control for a closed state: lambda underflows to exactly 0
  constexpr double kClosedControl = 750.0;
  auto table = std::make_shared<std::vector<double>>();
  table->resize(static_cast<std::size_t>(params.n_T) * (params.n_c + 1), kClosedControl);
  for (int t = 0; t < params.n_T; ++t) {
    double tau = params.T * static_cast<double>(params.n_T - t) / params.n_T;
    for (int r = 1; r <= params.n_c; ++r) {
      double price = plugin_price(r, tau, params.a);
      // lambda = a e^{-p} => c = log(a/lambda - 1) = p + log1p(-e^{-p})
      (*table)[static_cast<std::size_t>(t) * (params.n_c + 1) + r] =
          price + std::log1p(-std::exp(-price));
    }
  }
  int n_c = params.n_c, n_T = params.n_T;
  return [table, n_c, n_T](int t, std::span<const double> state, std::span<double> control) {
    int r = static_cast<int>(std::llround(state[0]));
    if (r < 0 || r > n_c || t < 0 || t >= n_T)
      throw std::out_of_range("plugin_policy: state or period outside the table");
    control[0] = (*table)[static_cast<std::size_t>(t) * (n_c + 1) + r];
  };
}

}  // namespace emc::models
