#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace emc {

/**
 * Kiefer-Wolfowitz finite-difference SA configuration.
 *
 * Gains at iteration k >= 1 are a_k = a0 * k^-step_exponent_a and
 * b_k = b0 * k^-step_exponent_b, componentwise. a0/b0 may be empty (filled
 * with max(|y0_i|, 1) at the start point), a single value (broadcast), or one
 * value per coordinate.
 */
struct SAConfig {
  std::vector<double> a0;
  std::vector<double> b0;
  int max_iters = 100;
  double step_exponent_a = 1.0;
  double step_exponent_b = 0.25;
  int trace_stride = 0;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("SAConfig: max_iters must be >= 1");
    for (double v : a0)
      if (!(v > 0.0)) throw std::invalid_argument("SAConfig: a0 entries must be positive");
    for (double v : b0)
      if (!(v > 0.0)) throw std::invalid_argument("SAConfig: b0 entries must be positive");
    if (!(step_exponent_a > 0.0) || !(step_exponent_b > 0.0))
      throw std::invalid_argument("SAConfig: step exponents must be positive");
  }
};

/**
 * Noisy objective evaluation. sa_iter is the common-random-number address of
 * the call: two evaluations with equal sa_iter must consume identical
 * randomness, so the plus and minus probes of one finite difference share
 * their noise. Implementations usually close over a CrnStream and draw from
 * stream.at(sweep, subproblem, sa_iter).
 */
using StochasticOracle = std::function<double(std::span<const double> y, std::uint64_t sa_iter)>;

namespace detail {

inline std::vector<double> resolve_gain(const std::vector<double>& g0, std::size_t dim,
                                        std::span<const double> y, const char* name) {
  std::vector<double> out(dim);
  if (g0.empty()) {
    for (std::size_t i = 0; i < dim; ++i) out[i] = std::max(std::abs(y[i]), 1.0);
  } else if (g0.size() == 1) {
    for (std::size_t i = 0; i < dim; ++i) out[i] = g0[0];
  } else if (g0.size() == dim) {
    out = g0;
  } else {
    throw std::invalid_argument(std::string("SAConfig: ") + name +
                                " must be empty, scalar, or match the variable dimension");
  }
  return out;
}

[[noreturn]] inline void report_non_finite(std::span<const double> y, std::uint64_t k,
                                           std::size_t coord, double value, const char* what) {
  std::ostringstream msg;
  msg << "sa_update: non-finite " << what << " (" << value << ") at iteration k=" << k
      << ", coordinate " << coord << ", y=[";
  for (std::size_t i = 0; i < y.size(); ++i) msg << (i ? ", " : "") << y[i];
  msg << "]";
  throw std::runtime_error(msg.str());
}

}  // namespace detail

/** Gains (a_k, b_k) for iteration k >= 1; requires explicit a0/b0. */
inline std::pair<std::vector<double>, std::vector<double>> step_sizes(const SAConfig& config,
                                                                      std::uint64_t k) {
  config.validate();
  if (k < 1) throw std::invalid_argument("step_sizes: iteration index must be >= 1");
  if (config.a0.empty() || config.b0.empty())
    throw std::invalid_argument("step_sizes: a0 and b0 must be non-empty");
  double kd = static_cast<double>(k);
  double fa = std::pow(kd, -config.step_exponent_a);
  double fb = std::pow(kd, -config.step_exponent_b);
  std::vector<double> a(config.a0.size()), b(config.b0.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = config.a0[i] * fa;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = config.b0[i] * fb;
  return {std::move(a), std::move(b)};
}

/**
 * One Kiefer-Wolfowitz ascent step from y at iteration k:
 *
 *   y_i <- y_i + a_ik * (f(y + b_ik e_i) - f(y - b_ik e_i)) / b_ik
 *
 * All probes perturb the same base point y, and the plus and minus probes of
 * each coordinate call the oracle with the same sa_iter address k so they see
 * common random numbers. Non-finite oracle values or updates abort with a
 * diagnostic. 2 * dim oracle calls per invocation.
 */
inline std::vector<double> sa_update(std::span<const double> y, std::uint64_t k,
                                     const SAConfig& config, const StochasticOracle& oracle) {
  config.validate();
  if (k < 1) throw std::invalid_argument("sa_update: iteration index must be >= 1");
  if (y.empty()) throw std::invalid_argument("sa_update: empty variable");
  if (!oracle) throw std::invalid_argument("sa_update: empty oracle");
  std::size_t dim = y.size();
  std::vector<double> a0 = detail::resolve_gain(config.a0, dim, y, "a0");
  std::vector<double> b0 = detail::resolve_gain(config.b0, dim, y, "b0");
  double kd = static_cast<double>(k);
  double fa = std::pow(kd, -config.step_exponent_a);
  double fb = std::pow(kd, -config.step_exponent_b);

  std::vector<double> next(y.begin(), y.end());
  std::vector<double> probe(y.begin(), y.end());
  for (std::size_t i = 0; i < dim; ++i) {
    double ak = a0[i] * fa;
    double bk = b0[i] * fb;
    probe[i] = y[i] + bk;
    double f_plus = oracle(probe, k);
    if (!std::isfinite(f_plus)) detail::report_non_finite(y, k, i, f_plus, "oracle value (plus probe)");
    probe[i] = y[i] - bk;
    double f_minus = oracle(probe, k);
    if (!std::isfinite(f_minus)) detail::report_non_finite(y, k, i, f_minus, "oracle value (minus probe)");
    probe[i] = y[i];
    next[i] = y[i] + ak * (f_plus - f_minus) / bk;
    if (!std::isfinite(next[i])) detail::report_non_finite(y, k, i, next[i], "updated coordinate");
  }
  return next;
}

struct SaTracePoint {
  std::uint64_t iter = 0;
  std::vector<double> y;
};

struct SaResult {
  std::vector<double> y;
  std::uint64_t iterations = 0;
  std::vector<SaTracePoint> trace;
};

/**
 * Runs max_iters Kiefer-Wolfowitz steps from y0 and returns the final
 * iterate. With trace_stride > 0 every stride-th iterate (plus the last) is
 * recorded. No projection or averaging is applied.
 */
inline SaResult sa_maximize(std::span<const double> y0, const SAConfig& config,
                            const StochasticOracle& oracle) {
  config.validate();
  if (y0.empty()) throw std::invalid_argument("sa_maximize: empty start point");
  SAConfig resolved = config;
  resolved.a0 = detail::resolve_gain(config.a0, y0.size(), y0, "a0");
  resolved.b0 = detail::resolve_gain(config.b0, y0.size(), y0, "b0");

  SaResult result;
  result.y.assign(y0.begin(), y0.end());
  for (std::uint64_t k = 1; k <= static_cast<std::uint64_t>(config.max_iters); ++k) {
    result.y = sa_update(result.y, k, resolved, oracle);
    result.iterations = k;
    if (config.trace_stride > 0 &&
        (k % static_cast<std::uint64_t>(config.trace_stride) == 0 ||
         k == static_cast<std::uint64_t>(config.max_iters)))
      result.trace.push_back({k, result.y});
  }
  return result;
}

}  // namespace emc
