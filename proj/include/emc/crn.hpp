#pragma once

#include <cmath>
#include <cstdint>

namespace emc {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

/** SplitMix64 finalizer; bijective 64-bit mix. */
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kGolden + v);
}

}  // namespace detail

/** Sequential uniform/normal generator seeded from one counter-based key. */
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /** Uniform draw strictly inside (0, 1) with 53-bit resolution. */
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /** Standard normal via inverse CDF (keeps one uniform per draw). */
  double next_normal() { return inverse_normal_cdf(next_uniform()); }

  /**
   * Inverse standard normal CDF: rational approximation refined by one
   * Halley step against erfc, accurate to ~1e-15 over (0,1).
   */
  static double inverse_normal_cdf(double p) {
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
      double q = std::sqrt(-2.0 * std::log(p));
      x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
          ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
      double q = p - 0.5;
      double r = q * q;
      x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
          (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
      double q = std::sqrt(-2.0 * std::log1p(-p));
      x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
          ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    constexpr double sqrt2 = 1.4142135623730951;
    constexpr double sqrt2pi = 2.5066282746310002;
    double e = 0.5 * std::erfc(-x / sqrt2) - p;
    double u = e * sqrt2pi * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
  }

 private:
  std::uint64_t state_;
};

/**
 * Randomness cell of one (path, within-path period) address. Each shock
 * component gets its own independent substream, so consuming a variable
 * number of uniforms for one component never desynchronizes another.
 */
class CrnCell {
 public:
  UniformSource component(std::uint32_t i) const {
    return UniformSource(detail::combine(key_, 0x243f6a8885a308d3ull + i));
  }

 private:
  friend class CrnStream;
  explicit CrnCell(std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
};

/**
 * Counter-based common-random-number stream. The full address of a draw is
 * (seed; sweep, subproblem, sa_iteration; path, step; component): identical
 * addresses give identical variates regardless of evaluation order or thread
 * count, distinct addresses give statistically independent variates.
 */
class CrnStream {
 public:
  explicit CrnStream(std::uint64_t seed)
      : seed_(seed), base_(detail::mix64(seed ^ 0x5851f42d4c957f2dull)) {}

  /** Substream for one (sweep, subproblem period, SA iteration) context. */
  CrnStream at(std::uint64_t sweep, std::uint64_t subproblem, std::uint64_t sa_iter) const {
    std::uint64_t h = base_;
    h = detail::combine(h, sweep);
    h = detail::combine(h, subproblem);
    h = detail::combine(h, sa_iter);
    return CrnStream(seed_, h);
  }

  /** Randomness cell for (path l, within-path period j) under this context. */
  CrnCell cell(std::uint64_t path, std::uint64_t step) const {
    std::uint64_t h = base_;
    h = detail::combine(h, path);
    h = detail::combine(h, step);
    return CrnCell(h);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  CrnStream(std::uint64_t seed, std::uint64_t base) : seed_(seed), base_(base) {}
  std::uint64_t seed_;
  std::uint64_t base_;
};

}  // namespace emc
