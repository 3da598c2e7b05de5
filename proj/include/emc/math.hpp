#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace emc {

/** log(1 + exp(x)) without overflow for large |x|. */
inline double softplus(double x) {
  if (x > 36.0) return x + std::exp(-x);
  if (x < -36.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

/** 1 / (1 + exp(x)), stable for large |x|. */
inline double logistic_reciprocal(double x) {
  if (x > 0) {
    double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/** log(exp(a) + exp(b)) without overflow. */
inline double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

/**
 * Poisson quantile by CDF inversion: smallest k with P(X <= k) >= u.
 * One uniform per draw keeps paired simulations synchronized and makes the
 * sample monotone in the mean for a fixed u.
 */
inline int poisson_inverse(double u, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson_inverse: mean must be finite and >= 0");
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("poisson_inverse: u must lie in (0,1)");
  if (mean == 0.0) return 0;
  int cap = static_cast<int>(mean + 12.0 * std::sqrt(mean + 1.0) + 30.0);
  if (mean < 700.0) {
    double pmf = std::exp(-mean);
    double cdf = pmf;
    int k = 0;
    while (u > cdf && k < cap) {
      ++k;
      pmf *= mean / k;
      cdf += pmf;
    }
    return k;
  }
  // large means would underflow exp(-mean); accumulate the CDF in log space
  double log_pmf = -mean;
  double log_cdf = log_pmf;
  double log_u = std::log(u);
  double log_mean = std::log(mean);
  int k = 0;
  while (log_u > log_cdf && k < cap) {
    ++k;
    log_pmf += log_mean - std::log(static_cast<double>(k));
    log_cdf = logaddexp(log_cdf, log_pmf);
  }
  return k;
}

}  // namespace emc
