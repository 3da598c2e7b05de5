#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "emc/math.hpp"
#include "emc/models/growth.hpp"
#include "emc/problem.hpp"
#include "emc/simulate.hpp"
#include "emc/solver.hpp"

namespace {

using namespace emc;

/** Growth dynamics whose utility is paid entirely by the terminal state. */
ControlProblem terminal_growth(bool general) {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp, models::GrowthBasis::affine);
  const int T = p.horizon;
  if (general) {
    p.period_utility = nullptr;
    p.general_utility = [T](const PathView& path) { return std::log(path.state(T)[0]); };
  } else {
    p.period_utility = [T](int t, std::span<const double> s_next, std::span<const double>,
                           std::span<const double>) {
      return t == T - 1 ? std::log(s_next[0]) : 0.0;
    };
  }
  return p;
}

ControlProblem constant_utility_problem() {
  ControlProblem p;
  p.horizon = 3;
  p.state_dim = 1;
  p.control_dim = 1;
  p.shock_dim = 1;
  p.param_dim = 2;
  p.initial_state = {1.0};
  p.evolve = [](int, std::span<const double> s, std::span<const double>, std::span<const double> z,
                std::span<double> s_next) { s_next[0] = s[0] + 0.1 * z[0]; };
  p.shock_sampler = [](int, const CrnCell& cell, std::span<double> z) {
    z[0] = cell.component(0).next_normal();
  };
  p.period_utility = [](int, std::span<const double>, std::span<const double>,
                        std::span<const double>) { return 2.5; };
  p.basis = [](int, int i, std::span<const double> s, std::span<double> out) {
    out[0] = i == 0 ? 1.0 : s[0];
  };
  return p;
}

EmcConfig small_config(int iters, int paths, int sa_iters, std::uint64_t seed) {
  EmcConfig cfg;
  cfg.max_outer_iters = iters;
  cfg.n_paths = paths;
  cfg.sa_config.max_iters = sa_iters;
  cfg.seed = seed;
  return cfg;
}

bool same_params(const PolicyParameters& a, const PolicyParameters& b) {
  return a.c0 == b.c0 && a.thetas == b.thetas;
}

void check_guard_records(const IterationTrace& trace) {
  for (const auto& rec : trace.per_iteration) {
    double chained = rec.start_mean;
    double running = rec.start_mean;
    REQUIRE_FALSE(rec.substeps.empty());
    REQUIRE(rec.substeps.front().incumbent_value == rec.start_mean);
    for (const auto& sub : rec.substeps) {
      REQUIRE(sub.accepted == (sub.candidate_value > sub.incumbent_value));
      if (sub.accepted) {
        chained += sub.candidate_value - sub.incumbent_value;
        REQUIRE(chained >= running);
        running = chained;
      }
    }
    REQUIRE(rec.chained_end_mean == chained);
    REQUIRE(rec.chained_end_mean >= rec.start_mean);
    if (rec.accepted_count() == 0) {
      REQUIRE(rec.end_mean == rec.start_mean);
    } else {
      REQUIRE(rec.end_mean ==
              Catch::Approx(rec.chained_end_mean).epsilon(1e-9));
    }
  }
}

}  // namespace

TEST_CASE("improvement guard keeps the incumbent unless strictly better") {
  std::vector<double> inc{1.0}, cand{2.0};
  REQUIRE(&improvement_guard(1.0, 1.5, inc, cand) == &cand);
  REQUIRE(&improvement_guard(1.0, 1.0, inc, cand) == &inc);
  REQUIRE(&improvement_guard(1.0, 0.9, inc, cand) == &inc);
  double nan = std::numeric_limits<double>::quiet_NaN();
  REQUIRE(&improvement_guard(1.0, nan, inc, cand) == &inc);
}

TEST_CASE("constant utility rejects every candidate") {
  ControlProblem p = constant_utility_problem();
  PolicyParameters x0 = zero_parameters(p);
  x0.c0 = {0.3};
  x0.thetas[0] = {0.1, -0.2};
  x0.thetas[1] = {0.0, 0.5};

  EmcConfig cfg = small_config(1, 64, 20, 7);
  SweepResult sweep = emc_sweep(p, x0, cfg, 1);

  REQUIRE(sweep.record.accepted_count() == 0);
  REQUIRE(same_params(sweep.params, x0));
  REQUIRE(sweep.record.end_mean == sweep.record.start_mean);
  REQUIRE(sweep.record.chained_end_mean == sweep.record.start_mean);
  REQUIRE(sweep.record.start_mean == 7.5);  // three periods of 2.5
  REQUIRE(sweep.record.start_std_error == 0.0);
}

TEST_CASE("sweep and config arguments are validated") {
  ControlProblem p = constant_utility_problem();
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(1, 16, 5, 1);
  REQUIRE_THROWS_AS(emc_sweep(p, x0, cfg, 0), std::invalid_argument);

  EmcConfig bad_iters = cfg;
  bad_iters.max_outer_iters = 0;
  REQUIRE_THROWS_AS(solve(p, x0, bad_iters), std::invalid_argument);

  EmcConfig bad_paths = cfg;
  bad_paths.n_paths = 1;
  REQUIRE_THROWS_AS(solve(p, x0, bad_paths), std::invalid_argument);

  EmcConfig bad_sa = cfg;
  bad_sa.sa_config.max_iters = 0;
  REQUIRE_THROWS_AS(solve(p, x0, bad_sa), std::invalid_argument);

  PolicyParameters bad_shape = x0;
  bad_shape.thetas.pop_back();
  REQUIRE_THROWS_AS(solve(p, bad_shape, cfg), std::invalid_argument);
}

TEST_CASE("one outer iteration equals one sweep") {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(1, 200, 30, 11);

  IterationTrace trace = solve(p, x0, cfg);
  SweepResult sweep = emc_sweep(p, x0, cfg, 1);

  REQUIRE(trace.per_iteration.size() == 1);
  REQUIRE(same_params(trace.final_params, sweep.params));
  REQUIRE(trace.per_iteration[0].end_mean == sweep.record.end_mean);
  REQUIRE(trace.per_iteration[0].start_mean == sweep.record.start_mean);
}

TEST_CASE("repeated runs are bit identical") {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(2, 300, 40, 123);

  IterationTrace a = solve(p, x0, cfg);
  IterationTrace b = solve(p, x0, cfg);
  REQUIRE(same_params(a.final_params, b.final_params));
  for (std::size_t i = 0; i < a.per_iteration.size(); ++i) {
    REQUIRE(a.per_iteration[i].start_mean == b.per_iteration[i].start_mean);
    REQUIRE(a.per_iteration[i].end_mean == b.per_iteration[i].end_mean);
  }
}

TEST_CASE("thread count does not change the solve") {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(1, 256, 25, 9);

  set_max_threads(1);
  IterationTrace one = solve(p, x0, cfg);
  set_max_threads(4);
  IterationTrace four = solve(p, x0, cfg);
  set_max_threads(0);

  REQUIRE(same_params(one.final_params, four.final_params));
  REQUIRE(one.per_iteration[0].end_mean == four.per_iteration[0].end_mean);
}

TEST_CASE("growth solve improves and approaches the closed-form value") {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(3, 2000, 500, 20240816);

  IterationTrace trace = solve(p, x0, cfg);
  check_guard_records(trace);

  const SweepRecord& first = trace.per_iteration.front();
  REQUIRE(first.accepted_count() >= 1);
  REQUIRE(first.end_mean > first.start_mean);

  double v0 = models::growth_analytic(gp).value;
  const SweepRecord& last = trace.per_iteration.back();
  REQUIRE(std::abs(last.end_mean - v0) < 0.06);
  // out-of-sample check at the returned parameters
  SurrogateValue eval = surrogate_full(p, trace.final_params, 20000, CrnStream(777));
  REQUIRE(std::abs(eval.mean - v0) < 0.02);
}

TEST_CASE("movement norms shrink across sweeps") {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(5, 1000, 300, 5150);

  IterationTrace trace = solve(p, x0, cfg);
  ConvergenceReport report = convergence_report(trace);
  REQUIRE(report.movement_norms.size() == 5);
  REQUIRE(report.movement_norms.front() > 0.5);
  REQUIRE(report.movement_norms.back() < 0.1 * report.movement_norms.front());
}

TEST_CASE("solver dispatch matches the utility form") {
  ControlProblem general = terminal_growth(true);
  PolicyParameters x0 = zero_parameters(general);
  EmcConfig cfg = small_config(1, 50, 10, 3);
  REQUIRE_THROWS_AS(solve(general, x0, cfg), std::invalid_argument);
  REQUIRE_NOTHROW(solve_general(general, x0, cfg));
}

TEST_CASE("general solver reduces to the separable one") {
  // Identical dynamics; utility is the terminal log-state, written once as a
  // period utility and once as a path utility. All prefix utilities are
  // exactly zero, so the two solvers must agree bit for bit.
  ControlProblem separable = terminal_growth(false);
  ControlProblem general = terminal_growth(true);
  PolicyParameters x0 = zero_parameters(separable);
  EmcConfig cfg = small_config(2, 400, 60, 42);

  IterationTrace a = solve(separable, x0, cfg);
  IterationTrace b = solve_general(general, x0, cfg);

  REQUIRE(same_params(a.final_params, b.final_params));
  for (std::size_t i = 0; i < a.per_iteration.size(); ++i) {
    REQUIRE(a.per_iteration[i].start_mean == b.per_iteration[i].start_mean);
    REQUIRE(a.per_iteration[i].end_mean == b.per_iteration[i].end_mean);
    REQUIRE(a.per_iteration[i].chained_end_mean == b.per_iteration[i].chained_end_mean);
    for (std::size_t j = 0; j < a.per_iteration[i].substeps.size(); ++j) {
      REQUIRE(a.per_iteration[i].substeps[j].incumbent_value ==
              b.per_iteration[i].substeps[j].incumbent_value);
      REQUIRE(a.per_iteration[i].substeps[j].candidate_value ==
              b.per_iteration[i].substeps[j].candidate_value);
      REQUIRE(a.per_iteration[i].substeps[j].accepted == b.per_iteration[i].substeps[j].accepted);
    }
  }

  IterationTrace c = solve_general(separable, x0, cfg);
  REQUIRE(same_params(a.final_params, c.final_params));
}

TEST_CASE("guarded sweeps stay monotone for a path-minimum utility") {
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  p.period_utility = nullptr;
  p.general_utility = [](const PathView& path) {
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < path.horizon; ++t) {
      double consumed = path.state(t)[0] * logistic_reciprocal(path.control(t)[0]);
      worst = std::min(worst, std::log(consumed));
    }
    return std::min(worst, std::log(path.state(path.horizon)[0]));
  };

  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(3, 500, 80, 99);
  IterationTrace trace = solve_general(p, x0, cfg);
  check_guard_records(trace);
  REQUIRE(trace.per_iteration.back().end_mean >= trace.per_iteration.front().start_mean);
}

TEST_CASE("general solve agrees with an independent evaluation of its result") {
  // Product of square roots of per-period consumption, a strictly positive
  // non-separable utility. The returned policy is scored on fresh paths and
  // against a simulation written with the standard library generator.
  models::GrowthParams gp;
  ControlProblem p = models::build_growth(gp);
  p.period_utility = nullptr;
  p.general_utility = [](const PathView& path) {
    double prod = 1.0;
    for (int t = 0; t < path.horizon; ++t) {
      double consumed = path.state(t)[0] * logistic_reciprocal(path.control(t)[0]);
      prod *= std::sqrt(consumed);
    }
    return prod;
  };

  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(2, 1500, 200, 314);
  IterationTrace trace = solve_general(p, x0, cfg);
  check_guard_records(trace);

  // library evaluation on a fresh stream
  TrajectoryBatch fresh = simulate_paths(p, trace.final_params, 20000, CrnStream(2718));
  SurrogateValue lib = sample_stats(fresh.path_utilities);

  // independent simulation of the same policy
  std::mt19937_64 rng(987654321);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = gp.s0;
    double prod = 1.0;
    for (int t = 0; t < gp.T; ++t) {
      double c = t == 0 ? trace.final_params.c0[0]
                        : trace.final_params.thetas[static_cast<std::size_t>(t) - 1][0] +
                              trace.final_params.thetas[static_cast<std::size_t>(t) - 1][1] * s;
      prod *= std::sqrt(s * logistic_reciprocal(c));
      s = s * logistic_reciprocal(-c) * std::exp(gp.a + gp.b * normal(rng));
    }
    sum += prod;
    sumsq += prod * prod;
  }
  double mc_mean = sum / n;
  double mc_se = std::sqrt((sumsq / n - mc_mean * mc_mean) / (n - 1));
  double gap = std::abs(lib.mean - mc_mean);
  REQUIRE(gap < 3.0 * std::sqrt(lib.std_error * lib.std_error + mc_se * mc_se));
}

TEST_CASE("evaluation effort scales with the triangular sweep cost") {
  std::atomic<long> evolve_calls{0};
  ControlProblem p;
  p.horizon = 3;
  p.state_dim = 1;
  p.control_dim = 1;
  p.shock_dim = 1;
  p.param_dim = 2;
  p.initial_state = {1.0};
  p.evolve = [&evolve_calls](int, std::span<const double> s, std::span<const double> c,
                             std::span<const double> z, std::span<double> s_next) {
    evolve_calls.fetch_add(1, std::memory_order_relaxed);
    s_next[0] = 0.9 * s[0] + 0.05 * std::tanh(c[0]) + 0.1 * z[0];
  };
  p.shock_sampler = [](int, const CrnCell& cell, std::span<double> z) {
    z[0] = cell.component(0).next_normal();
  };
  p.period_utility = [](int, std::span<const double> s_next, std::span<const double>,
                        std::span<const double> c) { return s_next[0] - 0.01 * c[0] * c[0]; };
  p.basis = [](int, int i, std::span<const double> s, std::span<double> out) {
    out[0] = i == 0 ? 1.0 : s[0];
  };

  const int N = 50, m = 10, T = 3, d = 2;
  PolicyParameters x0 = zero_parameters(p);
  EmcConfig cfg = small_config(1, N, m, 17);
  emc_sweep(p, x0, cfg, 1);

  long count = evolve_calls.load();
  long bound = 2L * m * T * (T + 1) / 2 * N * 2 * d;
  REQUIRE(count <= bound);
  REQUIRE(count >= bound / 8);
}

TEST_CASE("convergence report on a synthetic trace") {
  IterationTrace trace;
  for (int i = 0; i < 4; ++i) {
    SweepRecord rec;
    rec.k = i + 1;
    rec.end_mean = (i == 0) ? 1.0 : 2.0;
    trace.per_iteration.push_back(rec);
  }
  ConvergenceReport report = convergence_report(trace);
  REQUIRE(report.means == std::vector<double>{1.0, 2.0, 2.0, 2.0});
  REQUIRE(report.deltas == std::vector<double>{1.0, 0.0, 0.0});
  REQUIRE(report.non_decreasing == std::vector<bool>{true, true, true});
  REQUIRE(report.plateau_iteration == 2);
}

TEST_CASE("convergence report edge cases") {
  IterationTrace trace;
  SweepRecord rec;
  rec.k = 1;
  rec.end_mean = 5.0;
  trace.per_iteration.push_back(rec);
  ConvergenceReport report = convergence_report(trace);
  REQUIRE(report.means.size() == 1);
  REQUIRE(report.deltas.empty());
  REQUIRE(report.plateau_iteration == 1);

  IterationTrace empty;
  REQUIRE_THROWS_AS(convergence_report(empty), std::invalid_argument);
  REQUIRE_THROWS_AS(convergence_report(trace, -0.1), std::invalid_argument);
}
