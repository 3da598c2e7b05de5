#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace emc {

/**
 * Summary statistics of a sample of realized utilities (or any scalar
 * sample): moments plus nearest-rank quantiles. kurtosis is the raw fourth
 * standardized moment (3 for a normal), not excess. degenerate marks a
 * constant sample, in which case skewness and kurtosis are left at 0.
 */
struct StatsSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double std_dev = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q01 = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  double q99 = 0.0;
  bool degenerate = false;
};

namespace detail {

/** Nearest-rank quantile: the ceil(p*n)-th smallest value of a sorted sample. */
inline double nearest_rank(const std::vector<double>& sorted, double p) {
  std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

}  // namespace detail

inline StatsSummary summarize(std::span<const double> values) {
  std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("summarize: need at least 2 samples");
  StatsSummary s;
  s.n = n;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    double d = v - mean;
    double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  double nd = static_cast<double>(n);
  double var_unbiased = m2 / (nd - 1.0);
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  s.mean = mean;
  s.std_dev = std::sqrt(var_unbiased);
  s.std_error = s.std_dev / std::sqrt(nd);
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2);
  } else {
    s.degenerate = true;
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q01 = detail::nearest_rank(sorted, 0.01);
  s.q05 = detail::nearest_rank(sorted, 0.05);
  s.q95 = detail::nearest_rank(sorted, 0.95);
  s.q99 = detail::nearest_rank(sorted, 0.99);
  return s;
}

}  // namespace emc
