#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "emc/math.hpp"
#include "emc/problem.hpp"

namespace emc::models {

/**
 * Multiplicative-shock consumption/savings problem: capital s_t, a logistic
 * fraction 1/(1+exp(c_t)) of it is consumed each period, the remainder grows
 * by exp(a + b z) with standard normal z, and whatever is left at the horizon
 * is consumed. Utility is log of each consumed amount plus log s_T.
 */
struct GrowthParams {
  double a = -0.1;
  double b = 0.2;
  int T = 3;
  double s0 = 1.0;

  void validate() const {
    if (!(b >= 0.0)) throw std::invalid_argument("GrowthParams: b must be >= 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("GrowthParams: s0 must be positive");
    if (T < 1) throw std::invalid_argument("GrowthParams: T must be >= 1");
  }
};

/** Policy features: linear uses {s}; affine uses {1, s} and can represent the optimum. */
enum class GrowthBasis { linear, affine };

inline ControlProblem build_growth(const GrowthParams& params,
                                   GrowthBasis basis = GrowthBasis::affine) {
  params.validate();
  ControlProblem p;
  p.horizon = params.T;
  p.state_dim = 1;
  p.control_dim = 1;
  p.shock_dim = 1;
  p.initial_state = {params.s0};
  const double a = params.a, b = params.b;
  const int T = params.T;
  p.evolve = [a, b](int, std::span<const double> s, std::span<const double> c,
                    std::span<const double> z, std::span<double> s_next) {
    // retained fraction 1 - 1/(1+e^c) = 1/(1+e^{-c})
    s_next[0] = s[0] * logistic_reciprocal(-c[0]) * std::exp(a + b * z[0]);
  };
  p.shock_sampler = [](int, const CrnCell& cell, std::span<double> z) {
    z[0] = cell.component(0).next_normal();
  };
  p.period_utility = [T](int t, std::span<const double> s_next, std::span<const double> s,
                         std::span<const double> c) {
    // log(consumed) = log(s/(1+e^c)) = log s - softplus(c)
    double u = std::log(s[0]) - softplus(c[0]);
    if (t == T - 1) u += std::log(s_next[0]);
    return u;
  };
  if (basis == GrowthBasis::linear) {
    p.param_dim = 1;
    p.basis = [](int, int, std::span<const double> s, std::span<double> out) { out[0] = s[0]; };
  } else {
    p.param_dim = 2;
    p.basis = [](int, int i, std::span<const double> s, std::span<double> out) {
      out[0] = i == 0 ? 1.0 : s[0];
    };
  }
  return p;
}

struct GrowthAnalytic {
  std::vector<double> optimal_controls;
  double value = 0.0;
};

/**
 * Closed-form optimum for the three-period instance: c_t* = log(3 - t) and
 * V_0 = 6a - 4 log 4 + 4 log s0. Other horizons are rejected.
 */
inline GrowthAnalytic growth_analytic(const GrowthParams& params) {
  params.validate();
  if (params.T != 3)
    throw std::invalid_argument("growth_analytic: closed form is specific to T = 3");
  GrowthAnalytic out;
  out.optimal_controls = {std::log(3.0), std::log(2.0), 0.0};
  out.value = 6.0 * params.a - 4.0 * std::log(4.0) + 4.0 * std::log(params.s0);
  return out;
}

}  // namespace emc::models
