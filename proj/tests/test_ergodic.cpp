#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "bbmlab/ergodic.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/extremal.hpp"

using namespace bbm;

namespace {

const CEstimate& c_bump1() {
  static const CEstimate c = compute_C_kpp(TestFunction::library("bump1"));
  return c;
}

}  // namespace

TEST_CASE("ergodic config validation names each offence") {
  ErgodicConfig c;
  c.T = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ErgodicConfig{};
  c.epsilon = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ErgodicConfig{};
  c.dt_avg = 0.3;  // does not divide T = 40
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ErgodicConfig{};
  c.dt_avg = 0.32;  // divides 40 but not the z readout time 12
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ErgodicConfig{};
  c.z_time_cap = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ErgodicConfig{};
  c.prune_gap = 4.0;  // thin bands bias the front
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ErgodicConfig{};
  c.kpp_r = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  ErgodicConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("constant estimate: trivial and pure-cutoff routes") {
  // f == 0 with no cutoff: the functional is identically 1, C must be 0
  const CEstimate zero = compute_C_kpp(TestFunction::library("zero"));
  CHECK(zero.value == 0.0);
  CHECK(zero.route == "kpp");

  CHECK_THROWS_AS(compute_C_kpp(TestFunction::library("bump1"), 3.0), DomainError);
  CHECK_THROWS_AS(compute_C_max(3.9), DomainError);

  // a delta = 0 window is Heaviside data up to one grid cell at the jump
  const CEstimate h = compute_C_kpp(TestFunction({{-1.0, 0.0}, {1.0, 0.0}}, 0.0, "h0"));
  const CEstimate cmax = compute_C_max();
  CHECK(cmax.value > 0.0);
  CHECK(std::fabs(h.value - cmax.value) < 0.01 * cmax.value);
}

TEST_CASE("constant estimate is monotone in the test function") {
  // comparison principle: larger initial data keep a larger front functional
  const double c1 = c_bump1().value;
  const double c1p = compute_C_kpp(TestFunction::library("bump1_plus")).value;
  const double cw = compute_C_kpp(TestFunction({{-1.0, 0.0}, {1.0, 0.0}}, 1.0, "w1")).value;
  CHECK(c1 > cw);   // bump1 adds mass on top of the pure delta = 1 cutoff
  CHECK(c1p > c1);  // bump1_plus dominates bump1
  // pushing the cutoff out from 0 to 1 shrinks the data, roughly by the
  // exponential tilt exp(-sqrt2): only cutoffs are comparable to Heaviside
  // (bumps put mass right of 0, so their constants may exceed C_max)
  const double cm = compute_C_max().value;
  CHECK(cw < cm);
  CHECK(cw < 0.30 * cm);
}

TEST_CASE("time average run is deterministic and self-consistent") {
  ErgodicConfig cfg;
  cfg.T = 8.0;
  cfg.seed = 11;
  const TestFunction f = TestFunction::library("bump1");
  const ErgodicReport a = run_time_average(cfg, f, &c_bump1());
  const ErgodicReport b = run_time_average(cfg, f, &c_bump1());
  CHECK(a.avg.value == b.avg.value);
  CHECK(a.Z_estimate == b.Z_estimate);
  CHECK(a.total_nodes == b.total_nodes);

  CHECK(a.z_time == 8.0);  // T below the cap reads Z at T itself
  CHECK(a.avg.value > 0.0);
  CHECK(a.avg.value <= 1.0);
  CHECK(a.analytic_value == doctest::Approx(std::exp(-a.C.value * a.Z_estimate)));
  CHECK(a.abs_gap == doctest::Approx(std::fabs(a.avg.value - a.analytic_value)));
  CHECK(a.pruned_nodes == 0);  // no pruning when T <= z readout time
  // the split average reassembles exactly
  CHECK(a.avg.early_contrib + a.avg.late_contrib == doctest::Approx(a.avg.value).epsilon(1e-14));
}

TEST_CASE("zero test function makes the comparison exact") {
  ErgodicConfig cfg;
  cfg.T = 6.0;
  cfg.seed = 3;
  const ErgodicReport rep = run_time_average(cfg, TestFunction::library("zero"));
  CHECK(rep.avg.value == 1.0);  // the functional is identically 1 on the path
  CHECK(rep.C.value == 0.0);
  CHECK(rep.analytic_value == 1.0);
  CHECK(rep.abs_gap == 0.0);
}

TEST_CASE("pruning beyond the z readout leaves the martingales untouched") {
  ErgodicConfig base;
  base.T = 13.0;
  base.seed = 29;
  base.prune_gap = 0.0;
  const TestFunction f = TestFunction::library("bump1");
  const ErgodicReport full = run_time_average(base, f, &c_bump1());

  ErgodicConfig pruned = base;
  pruned.prune_gap = 8.0;
  const ErgodicReport pr = run_time_average(pruned, f, &c_bump1());

  CHECK(pr.pruned_nodes > 0);
  CHECK(pr.total_nodes < full.total_nodes);
  // the band only cuts after T' = 12, so the readout state is bit-identical
  CHECK(pr.z_time == 12.0);
  CHECK(pr.Y_estimate == full.Y_estimate);
  CHECK(pr.Z_estimate == full.Z_estimate);
}

TEST_CASE("space average structure and thread determinism") {
  ErgodicConfig base;
  base.seed = 7;
  const TestFunction f = TestFunction::library("bump1");
  const SpaceAverageReport a = run_space_average(base, f, 40, 4.0, &c_bump1(), 1);
  const SpaceAverageReport b = run_space_average(base, f, 40, 4.0, &c_bump1(), 2);
  CHECK(a.n_replicas == 40);
  CHECK(a.laplace.value == b.laplace.value);  // slot-per-replica scheduling
  CHECK(a.analytic.value == b.analytic.value);
  CHECK(a.laplace.value > 0.0);
  CHECK(a.laplace.value <= 1.0);
  CHECK(a.gap == doctest::Approx(std::fabs(a.laplace.value - a.analytic.value)));
  CHECK(a.combined_se > 0.0);
  CHECK(a.combined_se >= a.laplace.se);

  CHECK_THROWS_AS(run_space_average(base, f, 1, 4.0), UsageError);
  CHECK_THROWS_AS(run_space_average(base, f, 10, 0.0), DomainError);
}

TEST_CASE("gumbel fit inverts its own model exactly") {
  const double a = 0.7, lambda = 1.3;
  std::vector<double> x, g;
  for (double v = -2.0; v <= 3.01; v += 0.25) {
    x.push_back(v);
    g.push_back(std::exp(-a * std::exp(-lambda * v)));
  }
  const GumbelFit fit = fit_gumbel_cdf(x, g);
  CHECK(std::fabs(fit.lambda - lambda) < 1e-9);
  CHECK(std::fabs(fit.a - a) < 1e-9);
  CHECK(fit.r_squared > 1.0 - 1e-12);
  CHECK(fit.n_points >= 10);

  CHECK_THROWS_AS(fit_gumbel_cdf({0.0, 1.0}, {0.5}), UsageError);
  // grid entirely in the saturated region: nothing to fit
  std::vector<double> xs{10.0, 11.0, 12.0, 13.0};
  std::vector<double> gs;
  for (double v : xs) gs.push_back(std::exp(-a * std::exp(-lambda * v)));
  CHECK_THROWS_AS(fit_gumbel_cdf(xs, gs), GridError);
}

TEST_CASE("gumbel harness on a short horizon") {
  ErgodicConfig base;
  base.T = 8.0;
  base.seed = 101;
  std::vector<double> grid;
  for (double v = -2.5; v <= 3.51; v += 0.5) grid.push_back(v);
  const GumbelReport rep = run_gumbel(base, grid, {1, 2, 3});
  REQUIRE(rep.per_seed.size() == 3);
  CHECK(rep.T == 8.0);
  CHECK(rep.c_max.value > 0.0);
  for (const auto& s : rep.per_seed) {
    REQUIRE(s.g_values.size() == grid.size());
    for (std::size_t i = 0; i < s.g_values.size(); ++i) {
      CHECK(s.g_values[i] >= 0.0);
      CHECK(s.g_values[i] <= 1.0);
      if (i > 0) CHECK(s.g_values[i] >= s.g_values[i - 1]);  // a CDF in x
    }
    if (s.fit_valid) CHECK(s.fit.lambda > 0.0);
  }
  CHECK(rep.n_lambda_ok <= rep.per_seed.size());

  CHECK_THROWS_AS(run_gumbel(base, {0.0, 1.0, 2.0}, {1}), UsageError);
  CHECK_THROWS_AS(run_gumbel(base, {0.0, 1.0, 1.0, 2.0}, {1}), UsageError);
  CHECK_THROWS_AS(run_gumbel(base, grid, {}), UsageError);
}

TEST_CASE("branching time config guards") {
  BranchingTimeConfig c;
  c.t = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BranchingTimeConfig{};
  c.t2 = c.t;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BranchingTimeConfig{};
  c.window_lo = c.window_hi;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BranchingTimeConfig{};
  c.r_list = {1.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BranchingTimeConfig{};
  c.r_list = {5.0};  // t = 12 is not > 3 r
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = BranchingTimeConfig{};
  c.t2 = 12.5;  // not beyond t + max r
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = BranchingTimeConfig{};
  c.n_replicas = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = BranchingTimeConfig{};
  c.grid_dt = 0.7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("branching time frequencies are nonincreasing with coherent counts") {
  BranchingTimeConfig cfg;
  cfg.t = 6.0;
  cfg.t2 = 8.0;
  cfg.r_list = {0.5, 1.0, 1.5};
  cfg.n_replicas = 150;
  cfg.seed = 13;
  const BranchingTimeReport rep = run_branching_time(cfg);
  CHECK(rep.n_effective + rep.n_empty == cfg.n_replicas);
  CHECK(rep.n_effective > 0);
  REQUIRE(rep.rows.size() == 3);
  double prev = 2.0;
  for (const auto& row : rep.rows) {
    CHECK(row.freq <= prev);
    prev = row.freq;
    CHECK(row.freq == doctest::Approx(static_cast<double>(row.count) /
                                      static_cast<double>(rep.n_effective)));
    CHECK(row.ci.lo <= row.freq + 1e-12);
    CHECK(row.ci.hi >= row.freq - 1e-12);
    CHECK(row.ci.lo >= 0.0);
    CHECK(row.ci.hi <= 1.0);
  }
  const BranchingTimeReport again = run_branching_time(cfg);
  CHECK(again.rows[0].count == rep.rows[0].count);
}

TEST_CASE("decomposition config guards") {
  DecompositionConfig c;
  c.T = 3.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DecompositionConfig{};
  c.n_outer = 4;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = DecompositionConfig{};
  c.n_inner = 8;  // precision refusal below 16
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = DecompositionConfig{};
  c.grid_dt = 0.7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("decomposition residual is identically zero for the trivial functional") {
  DecompositionConfig cfg;
  cfg.T = 4.0;
  cfg.n_outer = 8;
  cfg.n_inner = 16;
  cfg.seed = 5;
  const CorrelationDiagnostic d =
      run_decomposition_diagnostics(cfg, TestFunction::library("zero"));
  CHECK(d.R_T == doctest::Approx(std::pow(4.0, 0.4)));
  CHECK(d.max_abs_y == 0.0);
  CHECK(d.far_product.mean == 0.0);
  CHECK(d.near_product.mean == 0.0);
  CHECK(d.far_product.n_pairs > 0);
  CHECK(d.near_product.n_pairs > 0);
}

TEST_CASE("decomposition diagnostics on a live functional") {
  DecompositionConfig cfg;
  cfg.T = 10.0;
  cfg.n_outer = 8;
  cfg.n_inner = 16;
  cfg.seed = 31;
  const CorrelationDiagnostic d =
      run_decomposition_diagnostics(cfg, TestFunction::library("bump1"));
  CHECK(d.s_grid.size() >= 4);
  for (double s : d.s_grid) {
    CHECK(s > d.R_T);
    CHECK(s <= 10.0 + 1e-12);
  }
  // the functional lives in [0, 1], so the residual is bounded by 1
  CHECK(d.max_abs_y > 0.0);
  CHECK(d.max_abs_y <= 1.0);
  CHECK(std::fabs(d.far_product.mean) <= 1.0);
  CHECK(std::fabs(d.near_product.mean) <= 1.0);
}
