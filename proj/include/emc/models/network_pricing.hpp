#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "emc/crn.hpp"
#include "emc/math.hpp"
#include "emc/problem.hpp"
#include "emc/threading.hpp"

namespace emc::models {

/**
 * Itinerary pricing over a leg network. incidence[k][j] = 1 iff leg k is part
 * of itinerary j. Demand for itinerary j arrives Poisson with intensity
 * lambda_j over [0, T] split into n_T periods; the price is
 * p_j = (log(lambda0_j/lambda_j)/eps0_j + 1) * p0_j.
 */
struct NetworkSpec {
  std::vector<std::vector<int>> incidence;
  std::vector<int> capacities;
  std::vector<double> p0;
  std::vector<double> eps0;
  std::vector<double> lambda0;
  double T = 1.0;
  int n_T = 1;

  int n_legs() const { return static_cast<int>(incidence.size()); }
  int n_itineraries() const { return incidence.empty() ? 0 : static_cast<int>(incidence[0].size()); }

  void validate() const {
    int n_l = n_legs(), n_i = n_itineraries();
    if (n_l < 1 || n_i < 1) throw std::invalid_argument("NetworkSpec: need >= 1 leg and itinerary");
    for (const auto& row : incidence) {
      if (static_cast<int>(row.size()) != n_i)
        throw std::invalid_argument("NetworkSpec: ragged incidence matrix");
      for (int v : row)
        if (v != 0 && v != 1) throw std::invalid_argument("NetworkSpec: incidence entries must be 0/1");
    }
    for (int j = 0; j < n_i; ++j) {
      int legs = 0;
      for (int k = 0; k < n_l; ++k) legs += incidence[k][j];
      if (legs == 0) throw std::invalid_argument("NetworkSpec: itinerary uses no leg");
    }
    if (static_cast<int>(capacities.size()) != n_l)
      throw std::invalid_argument("NetworkSpec: capacities size mismatch");
    for (int c : capacities)
      if (c < 0) throw std::invalid_argument("NetworkSpec: capacities must be >= 0");
    if (static_cast<int>(p0.size()) != n_i || static_cast<int>(eps0.size()) != n_i ||
        static_cast<int>(lambda0.size()) != n_i)
      throw std::invalid_argument("NetworkSpec: p0/eps0/lambda0 size mismatch");
    for (int j = 0; j < n_i; ++j)
      if (!(p0[j] > 0.0) || !(eps0[j] > 0.0) || !(lambda0[j] > 0.0))
        throw std::invalid_argument("NetworkSpec: p0/eps0/lambda0 must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("NetworkSpec: T must be positive");
    if (n_T < 1) throw std::invalid_argument("NetworkSpec: n_T must be >= 1");
  }
};

/** Two legs 1->2, 2->3; itineraries 1->2, 2->3, 1->2->3; the benchmark instance. */
inline NetworkSpec three_node_network() {
  NetworkSpec spec;
  spec.incidence = {{1, 0, 1}, {0, 1, 1}};
  spec.capacities = {300, 200};
  spec.p0 = {220.0, 250.0, 400.0};
  spec.eps0 = {1.0, 1.2, 1.1};
  spec.lambda0 = {300.0, 300.0, 300.0};
  spec.T = 1.0;
  spec.n_T = 6;
  return spec;
}

namespace net_detail {
constexpr double kIntensityMargin = 1e-5;
}

/**
 * Intensity from the raw control, clamped into the open interval
 * (0, lambda0 e^{eps0}) with relative margin 1e-5 at both ends.
 */
inline double clamped_intensity(const NetworkSpec& spec, int j, double c) {
  double hi = spec.lambda0[j] * std::exp(spec.eps0[j]);
  return std::min((1.0 - net_detail::kIntensityMargin) * hi,
                  std::max(c, net_detail::kIntensityMargin * hi));
}

/** Price of itinerary j at intensity lambda_j. */
inline double itinerary_price(const NetworkSpec& spec, int j, double lambda_j) {
  return (std::log(spec.lambda0[j] / lambda_j) / spec.eps0[j] + 1.0) * spec.p0[j];
}

namespace net_detail {

inline std::vector<int> leg_loads(const NetworkSpec& spec, const std::vector<int>& counts) {
  std::vector<int> loads(spec.n_legs(), 0);
  for (int k = 0; k < spec.n_legs(); ++k)
    for (int j = 0; j < spec.n_itineraries(); ++j) loads[k] += spec.incidence[k][j] * counts[j];
  return loads;
}

}  // namespace net_detail

/**
 * Within-period capping: the integer sales vector maximizing prices'X subject
 * to A X <= residual capacity, 0 <= X <= arrivals. Exact: single-leg
 * itineraries are filled greedily by descending price per leg (optimal for
 * unit weights), and the counts of itineraries spanning several legs are
 * enumerated depth-first with a price upper bound for pruning.
 */
inline std::vector<int> cap_allocation(const NetworkSpec& spec, const std::vector<int>& n_c_current,
                                       const std::vector<int>& arrivals,
                                       const std::vector<double>& prices) {
  spec.validate();
  const int n_l = spec.n_legs(), n_i = spec.n_itineraries();
  if (static_cast<int>(n_c_current.size()) != n_i || static_cast<int>(arrivals.size()) != n_i ||
      static_cast<int>(prices.size()) != n_i)
    throw std::invalid_argument("cap_allocation: vector size mismatch");
  for (int j = 0; j < n_i; ++j)
    if (arrivals[j] < 0) throw std::invalid_argument("cap_allocation: negative arrivals");

  std::vector<int> residual(n_l);
  {
    std::vector<int> loads = net_detail::leg_loads(spec, n_c_current);
    for (int k = 0; k < n_l; ++k) {
      residual[k] = spec.capacities[k] - loads[k];
      if (residual[k] < 0)
        throw std::logic_error("cap_allocation: current sales already exceed a leg capacity");
    }
  }

  // fast path: everything fits
  {
    bool fits = true;
    std::vector<int> loads = net_detail::leg_loads(spec, arrivals);
    for (int k = 0; k < n_l && fits; ++k) fits = loads[k] <= residual[k];
    if (fits) return arrivals;
  }

  std::vector<int> single_leg;  // itineraries using exactly one leg
  std::vector<int> multi_leg;
  std::vector<int> own_leg(n_i, -1);
  for (int j = 0; j < n_i; ++j) {
    int legs = 0, last = -1;
    for (int k = 0; k < n_l; ++k)
      if (spec.incidence[k][j]) {
        ++legs;
        last = k;
      }
    if (legs == 1) {
      single_leg.push_back(j);
      own_leg[j] = last;
    } else {
      multi_leg.push_back(j);
    }
  }
  auto by_price_desc = [&](int a, int b) {
    if (prices[a] != prices[b]) return prices[a] > prices[b];
    return a < b;
  };
  std::sort(single_leg.begin(), single_leg.end(), by_price_desc);
  std::sort(multi_leg.begin(), multi_leg.end(), by_price_desc);

  // given fixed multi-leg counts (already subtracted from res), fill each
  // leg's single-leg itineraries by descending price
  auto fill_single = [&](std::vector<int>& res, std::vector<int>& out) {
    double revenue = 0.0;
    for (int j : single_leg) {
      if (prices[j] <= 0.0) continue;
      int take = std::min(arrivals[j], res[own_leg[j]]);
      if (take <= 0) continue;
      out[j] = take;
      res[own_leg[j]] -= take;
      revenue += prices[j] * take;
    }
    return revenue;
  };
  // optimistic revenue bound ignoring leg sharing
  auto optimistic = [&](const std::vector<int>& res, std::size_t next_multi) {
    double bound = 0.0;
    for (std::size_t m = next_multi; m < multi_leg.size(); ++m) {
      int j = multi_leg[m];
      if (prices[j] <= 0.0) continue;
      int cap = arrivals[j];
      for (int k = 0; k < n_l; ++k)
        if (spec.incidence[k][j]) cap = std::min(cap, res[k]);
      bound += prices[j] * std::max(cap, 0);
    }
    for (int j : single_leg)
      if (prices[j] > 0.0) bound += prices[j] * std::min(arrivals[j], res[own_leg[j]]);
    return bound;
  };

  std::vector<int> best(n_i, 0);
  double best_revenue = -1.0;
  std::vector<int> chosen(n_i, 0);
  std::vector<int> res = residual;

  auto dfs = [&](auto&& self, std::size_t m, double revenue) -> void {
    if (revenue + optimistic(res, m) <= best_revenue) return;
    if (m == multi_leg.size()) {
      std::vector<int> out(n_i, 0);
      std::vector<int> res_copy = res;
      double total = revenue + fill_single(res_copy, out);
      if (total > best_revenue) {
        for (int j : multi_leg) out[j] = chosen[j];
        best = out;
        best_revenue = total;
      }
      return;
    }
    int j = multi_leg[m];
    int cap = arrivals[j];
    for (int k = 0; k < n_l; ++k)
      if (spec.incidence[k][j]) cap = std::min(cap, res[k]);
    for (int take = cap; take >= 0; --take) {
      chosen[j] = take;
      for (int k = 0; k < n_l; ++k)
        if (spec.incidence[k][j]) res[k] -= take;
      self(self, m + 1, revenue + prices[j] * take);
      for (int k = 0; k < n_l; ++k)
        if (spec.incidence[k][j]) res[k] += take;
    }
    chosen[j] = 0;
  };
  dfs(dfs, 0, 0.0);
  return best;
}

/** Time-invariant intensities, prices, and value of the deterministic problem. */
struct DeterministicSolution {
  std::vector<double> lambda_hat;
  std::vector<double> p_hat;
  double value = 0.0;
  int newton_iterations = 0;
};

namespace net_detail {

/** Solves H x = g for small dense symmetric H by Gaussian elimination. */
inline std::vector<double> solve_dense(std::vector<std::vector<double>> H, std::vector<double> g) {
  const int n = static_cast<int>(g.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(H[r][col]) > std::abs(H[pivot][col])) pivot = r;
    if (std::abs(H[pivot][col]) < 1e-300) throw std::runtime_error("solve_dense: singular system");
    std::swap(H[col], H[pivot]);
    std::swap(g[col], g[pivot]);
    for (int r = col + 1; r < n; ++r) {
      double f = H[r][col] / H[col][col];
      for (int c2 = col; c2 < n; ++c2) H[r][c2] -= f * H[col][c2];
      g[r] -= f * g[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double acc = g[r];
    for (int c2 = r + 1; c2 < n; ++c2) acc -= H[r][c2] * x[c2];
    x[r] = acc / H[r][r];
  }
  return x;
}

}  // namespace net_detail

/**
 * Maximizes the deterministic revenue T * sum_j lambda_j p_j(lambda_j)
 * subject to A lambda T <= capacities and 0 < lambda_j < lambda0_j e^{eps0_j},
 * by a logarithmic-barrier Newton method with analytic derivatives. Legs with
 * zero capacity close their itineraries (lambda_hat = 0). Throws on
 * non-convergence with iterate diagnostics.
 */
inline DeterministicSolution deterministic_relaxation(const NetworkSpec& spec) {
  spec.validate();
  const int n_l = spec.n_legs(), n_i = spec.n_itineraries();
  const double T = spec.T;

  std::vector<bool> open(n_i, true);
  for (int j = 0; j < n_i; ++j)
    for (int k = 0; k < n_l; ++k)
      if (spec.incidence[k][j] && spec.capacities[k] == 0) open[j] = false;

  std::vector<int> act;  // active itinerary indices
  for (int j = 0; j < n_i; ++j)
    if (open[j]) act.push_back(j);

  DeterministicSolution sol;
  sol.lambda_hat.assign(n_i, 0.0);
  sol.p_hat.assign(n_i, 0.0);
  for (int j = 0; j < n_i; ++j)
    if (!open[j]) sol.p_hat[j] = itinerary_price(spec, j, clamped_intensity(spec, j, 0.0));
  if (act.empty()) return sol;

  const int n = static_cast<int>(act.size());
  std::vector<int> act_legs;  // legs with positive capacity; zero-capacity legs carry no load
  for (int k = 0; k < n_l; ++k)
    if (spec.capacities[k] > 0) act_legs.push_back(k);
  const int n_al = static_cast<int>(act_legs.size());
  std::vector<double> hi(n);
  for (int v = 0; v < n; ++v) hi[v] = spec.lambda0[act[v]] * std::exp(spec.eps0[act[v]]);

  // interior start: unconstrained optimum shrunk inside every leg constraint
  std::vector<double> lam(n);
  for (int v = 0; v < n; ++v) {
    int j = act[v];
    double start = spec.lambda0[j] * std::exp(spec.eps0[j] - 1.0);
    for (int k = 0; k < n_l; ++k) {
      if (!spec.incidence[k][j]) continue;
      int users = 0;
      for (int j2 : act) users += spec.incidence[k][j2];
      start = std::min(start, 0.9 * spec.capacities[k] / (T * users));
    }
    lam[v] = std::max(start, 1e-12);
  }

  auto revenue = [&](const std::vector<double>& x) {
    double r = 0.0;
    for (int v = 0; v < n; ++v) r += T * x[v] * itinerary_price(spec, act[v], x[v]);
    return r;
  };
  auto slacks = [&](const std::vector<double>& x, std::vector<double>& s) {
    for (int ak = 0; ak < n_al; ++ak) {
      int k = act_legs[ak];
      double load = 0.0;
      for (int v = 0; v < n; ++v) load += spec.incidence[k][act[v]] * x[v] * T;
      s[ak] = spec.capacities[k] - load;
    }
  };
  auto interior = [&](const std::vector<double>& x) {
    std::vector<double> s(n_al);
    slacks(x, s);
    for (int ak = 0; ak < n_al; ++ak)
      if (s[ak] <= 0.0) return false;
    for (int v = 0; v < n; ++v)
      if (x[v] <= 0.0 || x[v] >= hi[v]) return false;
    return true;
  };
  if (!interior(lam))
    throw std::runtime_error("deterministic_relaxation: failed to construct an interior start");

  // Log-barrier path following. Constraints may bind at the optimum, so the
  // barrier gradient (not the plain revenue gradient) is the convergence
  // signal, and mu stops at 1e-4: below that the mu/s terms drown in the
  // rounding noise of the slack computation while the duality gap, about
  // mu per constraint, is already negligible against a five-digit revenue.
  int total_newton = 0;
  double grad_norm = 0.0;
  std::vector<double> s(n_al), grad(n), step(n);
  std::vector<std::vector<double>> H(n, std::vector<double>(n));
  for (double mu = 1e4; mu >= 0.99e-4; mu *= 0.1) {
    for (int it = 0; it < 200; ++it) {
      ++total_newton;
      slacks(lam, s);
      for (int v = 0; v < n; ++v) {
        int j = act[v];
        double d_rev = T * spec.p0[j] *
                       (std::log(spec.lambda0[j] / lam[v]) / spec.eps0[j] + 1.0 - 1.0 / spec.eps0[j]);
        double g = d_rev + mu * (1.0 / lam[v] - 1.0 / (hi[v] - lam[v]));
        for (int ak = 0; ak < n_al; ++ak)
          if (spec.incidence[act_legs[ak]][j]) g -= mu * T / s[ak];
        grad[v] = g;
      }
      grad_norm = 0.0;
      for (double g : grad) grad_norm = std::max(grad_norm, std::abs(g));
      if (grad_norm <= std::max(1e-4, 1e-4 * mu)) break;

      for (int v = 0; v < n; ++v)
        for (int w = 0; w < n; ++w) {
          double h = 0.0;
          if (v == w)
            h = -T * spec.p0[act[v]] / (spec.eps0[act[v]] * lam[v]) -
                mu * (1.0 / (lam[v] * lam[v]) + 1.0 / ((hi[v] - lam[v]) * (hi[v] - lam[v])));
          for (int ak = 0; ak < n_al; ++ak)
            if (spec.incidence[act_legs[ak]][act[v]] && spec.incidence[act_legs[ak]][act[w]])
              h -= mu * T * T / (s[ak] * s[ak]);
          H[v][w] = h;
        }
      // ascent direction: solve (-H) step = grad for the concave barrier
      std::vector<std::vector<double>> negH(n, std::vector<double>(n));
      for (int v = 0; v < n; ++v)
        for (int w = 0; w < n; ++w) negH[v][w] = -H[v][w];
      step = net_detail::solve_dense(std::move(negH), grad);

      // fraction-to-boundary damping keeps the iterate strictly interior
      // without value comparisons, which lose to rounding near the boundary
      double alpha = 1.0;
      for (int v = 0; v < n; ++v) {
        if (step[v] < 0.0) alpha = std::min(alpha, 0.995 * lam[v] / -step[v]);
        if (step[v] > 0.0) alpha = std::min(alpha, 0.995 * (hi[v] - lam[v]) / step[v]);
      }
      for (int ak = 0; ak < n_al; ++ak) {
        double ds = 0.0;
        for (int v = 0; v < n; ++v) ds -= spec.incidence[act_legs[ak]][act[v]] * step[v] * T;
        if (ds < 0.0) alpha = std::min(alpha, 0.995 * s[ak] / -ds);
      }
      double step_norm = 0.0, lam_norm = 0.0;
      for (int v = 0; v < n; ++v) {
        step_norm = std::max(step_norm, std::abs(alpha * step[v]));
        lam_norm = std::max(lam_norm, std::abs(lam[v]));
      }
      if (step_norm <= 1e-14 * (1.0 + lam_norm)) break;
      for (int v = 0; v < n; ++v) lam[v] += alpha * step[v];
    }
  }
  if (grad_norm > 1e-3) {
    std::ostringstream msg;
    msg << "deterministic_relaxation: no convergence after " << total_newton
        << " Newton steps, gradient norm " << grad_norm << ", iterate = [";
    for (int v = 0; v < n; ++v) msg << (v ? ", " : "") << lam[v];
    msg << "]";
    throw std::runtime_error(msg.str());
  }

  for (int v = 0; v < n; ++v) {
    sol.lambda_hat[act[v]] = lam[v];
    sol.p_hat[act[v]] = itinerary_price(spec, act[v], lam[v]);
  }
  sol.value = revenue(lam);
  sol.newton_iterations = total_newton;
  return sol;
}

/**
 * Make-to-stock seat pre-allocation: each leg's capacity is split across the
 * itineraries using it in proportion to deterministic demand lambda_hat * T,
 * and an itinerary gets the floor of its smallest per-leg share. Fractional
 * remainders are left unallocated.
 */
inline std::vector<int> mts_allocations(const NetworkSpec& spec,
                                        const std::vector<double>& lambda_hat) {
  spec.validate();
  const int n_l = spec.n_legs(), n_i = spec.n_itineraries();
  if (static_cast<int>(lambda_hat.size()) != n_i)
    throw std::invalid_argument("mts_allocations: lambda_hat size mismatch");

  std::vector<double> load(n_l, 0.0);
  for (int k = 0; k < n_l; ++k)
    for (int j = 0; j < n_i; ++j) load[k] += spec.incidence[k][j] * lambda_hat[j] * spec.T;

  std::vector<int> alloc(n_i, 0);
  for (int j = 0; j < n_i; ++j) {
    double share = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_l; ++k) {
      if (!spec.incidence[k][j]) continue;
      if (load[k] <= 0.0) {
        share = 0.0;
        break;
      }
      share = std::min(share, spec.capacities[k] * lambda_hat[j] * spec.T / load[k]);
    }
    alloc[j] = static_cast<int>(std::floor(share));
  }
  return alloc;
}

/**
 * The stochastic control problem: state = cumulative itinerary sales N^c
 * (residual leg capacity is n^c - A N^c), per-itinerary Poisson arrivals from
 * one uniform each, within-period capping by cap_allocation, revenue utility.
 * Basis functions: per itinerary, {1, residual capacities of each leg}.
 */
inline ControlProblem build_network_pricing(const NetworkSpec& spec) {
  spec.validate();
  const int n_l = spec.n_legs(), n_i = spec.n_itineraries();
  ControlProblem p;
  p.horizon = spec.n_T;
  p.state_dim = n_i;
  p.control_dim = n_i;
  p.shock_dim = n_i;
  p.initial_state.assign(n_i, 0.0);
  const double dt = spec.T / spec.n_T;
  auto shared_spec = std::make_shared<NetworkSpec>(spec);

  p.evolve = [shared_spec, dt, n_l, n_i](int, std::span<const double> s, std::span<const double> c,
                                         std::span<const double> z, std::span<double> s_next) {
    const NetworkSpec& sp = *shared_spec;
    std::vector<int> sales(n_i);
    std::vector<int> arrivals(n_i);
    std::vector<double> prices(n_i);
    for (int j = 0; j < n_i; ++j) {
      sales[j] = static_cast<int>(std::llround(s[j]));
      double lambda = clamped_intensity(sp, j, c[j]);
      arrivals[j] = static_cast<int>(poisson_inverse(z[j], lambda * dt));
      prices[j] = itinerary_price(sp, j, lambda);
    }
    bool fits = true;
    for (int k = 0; k < n_l && fits; ++k) {
      int load = 0;
      for (int j = 0; j < n_i; ++j) load += sp.incidence[k][j] * (sales[j] + arrivals[j]);
      fits = load <= sp.capacities[k];
    }
    std::vector<int> accepted =
        fits ? arrivals : cap_allocation(sp, sales, arrivals, prices);
    for (int j = 0; j < n_i; ++j) s_next[j] = static_cast<double>(sales[j] + accepted[j]);
  };
  p.shock_sampler = [n_i](int, const CrnCell& cell, std::span<double> z) {
    for (int j = 0; j < n_i; ++j) z[j] = cell.component(j).next_uniform();
  };
  p.period_utility = [shared_spec, n_i](int, std::span<const double> s_next,
                                        std::span<const double> s, std::span<const double> c) {
    const NetworkSpec& sp = *shared_spec;
    double revenue = 0.0;
    for (int j = 0; j < n_i; ++j) {
      double lambda = clamped_intensity(sp, j, c[j]);
      revenue += itinerary_price(sp, j, lambda) * (s_next[j] - s[j]);
    }
    return revenue;
  };
  p.param_dim = n_i * (1 + n_l);
  p.basis = [shared_spec, n_l, n_i](int, int i, std::span<const double> s, std::span<double> out) {
    const NetworkSpec& sp = *shared_spec;
    int block = i / n_i;  // 0: constant, 1..n_l: residual of leg block-1
    int target = i % n_i;
    for (int j = 0; j < n_i; ++j) out[j] = 0.0;
    if (block == 0) {
      out[target] = 1.0;
    } else {
      int k = block - 1;
      double residual = sp.capacities[k];
      for (int j = 0; j < n_i; ++j) residual -= sp.incidence[k][j] * s[j];
      out[target] = residual;
    }
  };
  return p;
}

/** Benchmark starting point: every c0 and constant-basis weight at `level`. */
inline PolicyParameters network_initial_params(const NetworkSpec& spec, double level = 100.0) {
  const int n_i = spec.n_itineraries();
  PolicyParameters params;
  params.c0.assign(n_i, level);
  std::vector<double> theta(static_cast<std::size_t>(spec.n_itineraries() * (1 + spec.n_legs())),
                            0.0);
  for (int j = 0; j < n_i; ++j) theta[j] = level;
  params.thetas.assign(spec.n_T >= 1 ? spec.n_T - 1 : 0, theta);
  return params;
}

/** Per-path revenues of a fixed-price heuristic simulation. */
struct HeuristicRun {
  int n_paths = 0;
  int n_periods = 0;
  std::vector<double> totals;          // per path
  std::vector<double> period_revenue;  // [path * n_periods + t]
};

namespace net_detail {

template <class SellFn>
HeuristicRun simulate_heuristic(const NetworkSpec& spec, const DeterministicSolution& sol,
                                int n_paths, const CrnStream& stream, const SellFn& sell_period) {
  spec.validate();
  if (n_paths < 1) throw std::invalid_argument("simulate_heuristic: n_paths must be >= 1");
  const int n_i = spec.n_itineraries(), n_T = spec.n_T;
  const double dt = spec.T / spec.n_T;
  HeuristicRun run;
  run.n_paths = n_paths;
  run.n_periods = n_T;
  run.totals.assign(n_paths, 0.0);
  run.period_revenue.assign(static_cast<std::size_t>(n_paths) * n_T, 0.0);

  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t lo, std::size_t hi) {
    std::vector<int> arrivals(n_i);
    std::vector<int> inventory;  // cumulative sales (MTO) or remaining allocation (MTS)
    for (std::size_t l = lo; l < hi; ++l) {
      bool first = true;
      double total = 0.0;
      for (int t = 0; t < n_T; ++t) {
        CrnCell cell = stream.cell(l, static_cast<std::uint64_t>(t) + 1);
        for (int j = 0; j < n_i; ++j) {
          double mean = sol.lambda_hat[j] * dt;
          arrivals[j] =
              mean > 0.0 ? static_cast<int>(poisson_inverse(cell.component(j).next_uniform(), mean))
                         : 0;
        }
        double rev = sell_period(arrivals, inventory, first, cell);
        first = false;
        run.period_revenue[l * n_T + t] = rev;
        total += rev;
      }
      run.totals[l] = total;
    }
  });
  return run;
}

}  // namespace net_detail

/**
 * Make-to-order: fixed deterministic prices, every itinerary sells against
 * the shared leg inventory. A period whose arrivals exceed the residual
 * capacity is rationed by cap_allocation, and itinerary j stops selling once
 * a leg it uses is empty.
 */
inline HeuristicRun simulate_mto(const NetworkSpec& spec, const DeterministicSolution& sol,
                                 int n_paths, const CrnStream& stream) {
  const int n_l = spec.n_legs(), n_i = spec.n_itineraries();
  return net_detail::simulate_heuristic(
      spec, sol, n_paths, stream,
      [&spec, &sol, n_l, n_i](std::vector<int>& arrivals, std::vector<int>& sales, bool first,
                              const CrnCell&) {
        if (first) sales.assign(static_cast<std::size_t>(n_i), 0);
        bool fits = true;
        for (int k = 0; k < n_l && fits; ++k) {
          int load = 0;
          for (int j = 0; j < n_i; ++j) load += spec.incidence[k][j] * (sales[j] + arrivals[j]);
          fits = load <= spec.capacities[k];
        }
        std::vector<int> accepted =
            fits ? arrivals : cap_allocation(spec, sales, arrivals, sol.p_hat);
        double revenue = 0.0;
        for (int j = 0; j < n_i; ++j) {
          revenue += sol.p_hat[j] * accepted[j];
          sales[j] += accepted[j];
        }
        return revenue;
      });
}

/**
 * Make-to-stock: fixed deterministic prices, seats pre-allocated per
 * itinerary by mts_allocations, itinerary j sells until its own allocation is
 * exhausted.
 */
inline HeuristicRun simulate_mts(const NetworkSpec& spec, const DeterministicSolution& sol,
                                 int n_paths, const CrnStream& stream) {
  const int n_i = spec.n_itineraries();
  std::vector<int> alloc = mts_allocations(spec, sol.lambda_hat);
  return net_detail::simulate_heuristic(
      spec, sol, n_paths, stream,
      [&sol, alloc, n_i](std::vector<int>& arrivals, std::vector<int>& stock, bool first,
                         const CrnCell&) {
        if (first) stock = alloc;
        double revenue = 0.0;
        for (int j = 0; j < n_i; ++j) {
          int sold = std::min(arrivals[j], stock[j]);
          stock[j] -= sold;
          revenue += sol.p_hat[j] * sold;
        }
        return revenue;
      });
}

}  // namespace emc::models
