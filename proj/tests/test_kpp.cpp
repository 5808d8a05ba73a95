#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "bbmlab/errors.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/kpp.hpp"
#include "bbmlab/stats_util.hpp"

using namespace bbm;
using namespace bbm::kpp;

namespace {

SolverConfig quick_config(double dx = 0.05, double dt = 0.02) {
  SolverConfig cfg;
  cfg.dx = dx;
  cfg.dt = dt;
  cfg.x_min = -20.0;
  cfg.x_max = 25.0;
  return cfg;
}

}  // namespace

TEST_CASE("solver config validation") {
  SolverConfig cfg = quick_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0.2;  // above the explicit-reaction bound
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.dx = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config();
  cfg.x_min = 5.0;
  cfg.x_max = 5.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = quick_config(0.001);
  cfg.x_min = -3000.0;
  cfg.x_max = 3000.0;  // exceeds max_cells
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("constant initial data stay constant away from the forced boundaries") {
  // The scheme pins u = 1 on the left edge and u = 0 on the right edge, so a
  // constant profile is only invariant in the bulk: each edge seeds a front
  // that needs time to travel.  At t = 4 the contamination from an edge 20
  // units away is bounded by e^t P(|N(0,t)| > 20) ~ 1e-21.
  auto zero = init_from_profile(quick_config(), [](double) { return 0.0; });
  zero.step(200);
  CHECK(zero.t() == doctest::Approx(4.0));
  for (std::size_t i = 0; i < zero.u().size(); ++i) {
    if (zero.x_of(i) >= -5.0) CHECK(zero.u()[i] < 1e-8);
  }
  auto one = init_from_profile(quick_config(), [](double) { return 1.0; });
  one.step(200);
  for (std::size_t i = 0; i < one.u().size(); ++i) {
    if (one.x_of(i) <= 5.0) CHECK(one.u()[i] > 1.0 - 1e-8);
  }
}

TEST_CASE("heaviside initial data and interpolation") {
  auto sol = init_heaviside(quick_config(), 0.0);
  CHECK(sol.t() == 0.0);
  CHECK(sol.value_at(-5.0) == 1.0);
  CHECK(sol.value_at(5.0) == 0.0);
  CHECK_THROWS_AS(sol.value_at(-100.0), GridError);
  CHECK_THROWS_AS(sol.value_at(100.0), GridError);
}

TEST_CASE("step_to walks whole steps only") {
  auto sol = init_heaviside(quick_config(0.05, 0.02));
  sol.step_to(0.5);
  CHECK(sol.t() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(sol.step_to(0.513), ConfigError);
  CHECK_THROWS_AS(sol.step_to(0.2), UsageError);  // into the past
}

TEST_CASE("solution stays inside [0, 1] with tiny pre-clamp excursions") {
  auto sol = init_heaviside(quick_config(0.05, 0.02));
  sol.step_to(2.0);
  for (double u : sol.u()) {
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
  }
  CHECK(sol.max_preclamp_excursion() < 1e-8);
}

TEST_CASE("comparison principle: ordered data stay ordered") {
  auto hi = init_heaviside(quick_config(), 1.0);
  auto lo = init_heaviside(quick_config(), -1.0);
  hi.step_to(2.0);
  lo.step_to(2.0);
  REQUIRE(hi.u().size() == lo.u().size());
  for (std::size_t i = 0; i < hi.u().size(); ++i) {
    CHECK(hi.u()[i] >= lo.u()[i] - 1e-10);
  }
}

TEST_CASE("pde front tracks the probability that the maximum exceeds x") {
  // u(t, x) = P(max at t > x) for Heaviside data at 0
  auto sol = init_heaviside(quick_config(0.02, 0.01));
  sol.step_to(1.0);

  const int n = 4000;
  const double xs[3] = {-1.0, 0.0, 1.5};
  int count[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    SimConfig cfg;
    cfg.seed = 4242;
    cfg.replica = static_cast<std::uint64_t>(i);
    cfg.horizon = 1.0;
    cfg.checkpoints = SimConfig::uniform_checkpoints(1.0, 0.5);
    const double mx = simulate(cfg).alive_positions(1.0).max();
    for (int j = 0; j < 3; ++j) {
      if (mx > xs[j]) ++count[j];
    }
  }
  for (int j = 0; j < 3; ++j) {
    const double phat = static_cast<double>(count[j]) / n;
    const double se = std::sqrt(phat * (1.0 - phat) / n);
    const double tol = std::max(4.0 * se, 0.02);
    CHECK(std::fabs(sol.value_at(xs[j]) - phat) < tol);
  }
}

TEST_CASE("front position error shrinks under grid refinement") {
  double fronts[3];
  const double scales[3] = {1.0, 0.5, 0.25};
  for (int i = 0; i < 3; ++i) {
    auto sol = init_heaviside(quick_config(0.08 * scales[i], 0.04 * scales[i]));
    sol.step_to(2.0);
    fronts[i] = sol.front_position(0.5);
  }
  const double d1 = std::fabs(fronts[0] - fronts[1]);
  const double d2 = std::fabs(fronts[1] - fronts[2]);
  CHECK(d2 < d1);  // second-order scheme: successive differences shrink fast
  CHECK(d2 < 0.6 * d1);
}

TEST_CASE("front advances monotonically after the transient") {
  SolverConfig cfg = quick_config(0.05, 0.025);
  cfg.moving_window = true;
  cfg.front_margin = 25.0;  // the 45-unit quick window cannot hold the default
  auto sol = init_heaviside(cfg);
  const FrontTrace trace = trace_front(sol, 12.0, 0.5);
  REQUIRE(trace.size() >= 20);
  double prev = -1e300;
  for (const auto& s : trace) {
    if (s.t < 1.0) continue;
    CHECK(s.x_half > prev);
    prev = s.x_half;
  }
}

TEST_CASE("moving window slides with the front and keeps its margin") {
  SolverConfig cfg = quick_config(0.05, 0.025);
  cfg.moving_window = true;
  cfg.front_margin = 25.0;
  auto sol = init_heaviside(cfg);
  sol.step_to(20.0);
  CHECK(sol.window_shift() > 0.0);
  const double front = sol.front_position(0.5);
  CHECK(sol.x_right() - front > 20.0);  // did not run out of room
  CHECK(front - sol.x_left() > 15.0);   // and kept the settled side too
}

TEST_CASE("bramson fit recovers synthetic coefficients exactly") {
  FrontTrace trace;
  for (int i = 0; i < 60; ++i) {
    const double t = 5.0 + 2.0 * i;
    trace.push_back({t, kSqrt2 * t - kLogCoef * std::log(t) + 7.3});
  }
  const BramsonFit fit = bramson_fit(trace, 5.0, 123.0);
  CHECK(std::fabs(fit.speed - kSqrt2) < 1e-9);
  CHECK(std::fabs(fit.log_coef - (-kLogCoef)) < 1e-9);
  CHECK(std::fabs(fit.constant - 7.3) < 1e-9);
  CHECK(fit.max_residual < 1e-9);
  CHECK(fit.n_points == 60);
}

TEST_CASE("bramson fit input guards") {
  FrontTrace trace;
  for (int i = 0; i < 5; ++i) trace.push_back({1.0 + i, 1.4 * (1.0 + i)});
  CHECK_THROWS_AS(bramson_fit(trace, 1.0, 5.0), GridError);  // < 10 samples
  trace.clear();
  for (int i = 0; i < 30; ++i) trace.push_back({10.0 + 0.1 * i, 14.0 + 0.14 * i});
  CHECK_THROWS_AS(bramson_fit(trace, 10.0, 13.0), GridError);  // span under factor 2
}

TEST_CASE("front speed approaches sqrt 2 with a negative log correction") {
  SolverConfig cfg = quick_config(0.05, 0.025);
  cfg.moving_window = true;
  cfg.front_margin = 25.0;
  auto sol = init_heaviside(cfg);
  const FrontTrace trace = trace_front(sol, 60.0, 1.0);
  const BramsonFit fit = bramson_fit(trace, 15.0, 60.0);
  CHECK(std::fabs(fit.speed - kSqrt2) < 0.03);
  CHECK(fit.log_coef < 0.0);  // the slow log correction is already visible
}

TEST_CASE("profile shape settles: successive sup distances shrink") {
  SolverConfig cfg = quick_config(0.05, 0.025);
  cfg.moving_window = true;
  cfg.front_margin = 25.0;
  auto sol = init_heaviside(cfg);
  const auto dists = wave_profile_convergence(sol, {4.0, 8.0, 16.0, 32.0}, -6.0, 6.0);
  REQUIRE(dists.size() == 3);
  CHECK(dists[0].sup_distance > dists[1].sup_distance);
  CHECK(dists[1].sup_distance > dists[2].sup_distance);
  CHECK(dists[2].sup_distance < 0.02);
}

TEST_CASE("tail functional vanishes for the zero solution") {
  auto sol = init_from_profile(quick_config(), [](double) { return 0.0; });
  sol.step_to(4.0);
  // y_max = 18 keeps sqrt2 * r + y_max inside the [-20, 25] window; the only
  // nonzero values come from the forced left boundary, far below the band
  const CrResult c = compute_C_r(sol, 18.0);
  CHECK(c.value < 1e-8);
  CHECK(c.tail_integrand < 1e-10);
}

TEST_CASE("tail functional stabilises along r") {
  SolverConfig cfg;
  cfg.dx = 0.02;
  cfg.dt = 0.01;
  cfg.x_min = -30.0;
  cfg.x_max = 48.0;
  auto sol = init_heaviside(cfg);
  const auto curve = c_r_curve(sol, {4.0, 6.0, 8.0, 10.0, 12.0}, 28.0);
  REQUIRE(curve.size() == 5);
  for (const auto& c : curve) {
    CHECK(c.value > 0.0);
    CHECK(c.tail_integrand < 1e-10);
  }
  std::vector<double> diffs;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    diffs.push_back(std::fabs(curve[i].value - curve[i - 1].value));
  }
  for (std::size_t i = 1; i < diffs.size(); ++i) CHECK(diffs[i] < diffs[i - 1]);
  // convergence in r is slow (a log r / sqrt r tail), so only a few percent
  CHECK(diffs.back() / curve.back().value < 0.05);
}

TEST_CASE("tail functional guards its quadrature window") {
  SolverConfig cfg = quick_config();  // right edge 25 is too short for y_max 28
  auto sol = init_heaviside(cfg);
  sol.step_to(4.0);
  CHECK_THROWS_AS(compute_C_r(sol, 28.0), GridError);
}

TEST_CASE("initial condition validation accepts front-like data") {
  // validation is a t = 0 gate on the data handed to the solver; the step at
  // x = 0 must sit right of the grid midpoint or the left-mass scan sees the
  // dead zone between them
  SolverConfig front_cfg = quick_config(0.02, 0.01);
  front_cfg.x_min = -25.0;
  front_cfg.x_max = 20.0;
  auto sol = init_heaviside(front_cfg);
  const InitialConditionReport rep = validate_initial_condition(sol);
  CHECK(rep.right_tail_ok);
  CHECK(std::isinf(rep.right_rate));  // compact support
  CHECK(rep.right_rate < 0.0);
  CHECK(rep.left_mass_ok);
  CHECK(rep.m_centering_ok);
  CHECK(rep.conclusive);

  // a resolvable tail at exactly the critical rate also passes
  auto crit = init_from_profile(quick_config(0.02, 0.01), [](double x) {
    return std::min(1.0, std::exp(-kSqrt2 * (x - 2.0)));
  });
  const InitialConditionReport rep2 = validate_initial_condition(crit);
  CHECK(rep2.right_tail_ok);
  CHECK(rep2.right_rate == doctest::Approx(-kSqrt2).epsilon(1e-3));
  CHECK(rep2.conclusive);
}

TEST_CASE("initial condition validation rejects a fat right tail") {
  // exp(-x/2) decays slower than exp(-sqrt2 x): the standard centering
  // would be wrong for such data
  SolverConfig cfg = quick_config(0.02, 0.01);
  cfg.x_min = -10.0;
  cfg.x_max = 60.0;
  auto sol = init_from_profile(
      cfg, [](double x) { return std::min(1.0, std::exp(-0.5 * x)); });
  const InitialConditionReport rep = validate_initial_condition(sol);
  CHECK(rep.conclusive);
  CHECK(!rep.right_tail_ok);
  CHECK(rep.right_rate > -kSqrt2 + 1e-6);
  CHECK(rep.right_rate == doctest::Approx(-0.5).epsilon(1e-3));

  // calling after stepping is refused outright
  sol.step_to(0.5);
  CHECK_THROWS_AS(validate_initial_condition(sol), UsageError);
}

TEST_CASE("test function initial data encode the laplace kernel") {
  SolverConfig cfg = quick_config(0.02, 0.01);
  const TestFunction b1 = TestFunction::library("bump1");
  auto sol = init_from_test_function(cfg, b1);
  // u(0, x) = 1 - exp(-f(-x)) below the cutoff, and 1 once -x > delta
  CHECK(sol.value_at(0.5) == doctest::Approx(1.0 - std::exp(-b1(-0.5))).epsilon(1e-9));
  CHECK(sol.value_at(1.5) == doctest::Approx(1.0 - std::exp(-b1(-1.5))).epsilon(1e-9));
  CHECK(sol.value_at(-2.0) == doctest::Approx(1.0));  // -x = 2 > delta = 1
  CHECK(sol.value_at(5.0) == doctest::Approx(0.0));   // outside the support
}

TEST_CASE("tail sandwich brackets the pde tail by a bounded factor") {
  SolverConfig cfg;
  cfg.dx = 0.05;
  cfg.dt = 0.025;
  cfg.moving_window = true;
  // the regime gate needs X <= t^0.4 = 4.37 at t = 40
  const std::vector<double> xs{1.0, 2.5, 4.0};
  const auto reports = run_tail_sandwich(cfg, {1.0, 2.0}, 40.0, xs, 24.0);
  REQUIRE(reports.size() == 2);
  for (const auto& rep : reports) {
    CHECK(rep.c_r > 0.0);
    REQUIRE(rep.rows.size() == xs.size());
    for (const auto& row : rep.rows) {
      CHECK(row.u_val > 0.0);
      CHECK(row.predicted > 0.0);
      CHECK(row.ratio > 0.0);
    }
    CHECK(rep.gamma_hat >= 1.0);
    CHECK(rep.gamma_hat < 10.0);  // same order of magnitude throughout
  }
}

TEST_CASE("tail sandwich enforces its preconditions by name") {
  SolverConfig cfg = quick_config(0.05, 0.025);
  cfg.moving_window = true;
  cfg.front_margin = 35.0;  // must fit the 45-unit quick window
  // t < 8 r
  CHECK_THROWS_AS(run_tail_sandwich(cfg, {2.0}, 10.0, {1.0}, 20.0), DomainError);
  // X beyond t^0.4
  CHECK_THROWS_AS(run_tail_sandwich(cfg, {1.0}, 16.0, {10.0}, 20.0), DomainError);
  CHECK_THROWS_AS(run_tail_sandwich(cfg, {1.0}, 16.0, {0.0}, 20.0), DomainError);
}
