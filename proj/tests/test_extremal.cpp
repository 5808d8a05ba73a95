#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "bbmlab/errors.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/stats_util.hpp"
#include "bbmlab/test_function.hpp"

using namespace bbm;

namespace {

SimConfig basic_config(double horizon, double dt, std::uint64_t seed,
                       std::uint64_t replica) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.replica = replica;
  cfg.horizon = horizon;
  cfg.checkpoints = SimConfig::uniform_checkpoints(horizon, dt);
  return cfg;
}

}  // namespace

TEST_CASE("recentering term against frozen references") {
  CHECK(std::fabs(recenter_m(10.0) - 11.69987532345823) < 1e-12);
  // at t = e the log term is exactly the coefficient itself
  CHECK(std::fabs(recenter_m(std::exp(1.0)) - 2.7835708563792956) < 1e-15);
  CHECK(std::fabs(recenter_m(5.0) - 5.3640011191941657) < 1e-12);
  CHECK(recenter_m(1.0) == doctest::Approx(kSqrt2));  // log 1 = 0
  CHECK_THROWS_AS(recenter_m(0.0), DomainError);
  CHECK_THROWS_AS(recenter_m(-2.0), DomainError);
  CHECK(kSqrt2 * kSqrt2 == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(kLogCoef == doctest::Approx(3.0 / (2.0 * kSqrt2)).epsilon(1e-15));
}

TEST_CASE("test function library") {
  const auto names = TestFunction::library_names();
  CHECK(std::find(names.begin(), names.end(), "bump1") != names.end());
  CHECK_THROWS_AS(TestFunction::library("nope"), LookupError);

  const TestFunction zero = TestFunction::library("zero");
  CHECK(zero.is_zero());
  CHECK(std::isinf(zero.delta()));
  CHECK(zero(0.0) == 0.0);

  const TestFunction w = TestFunction::library("window05");
  CHECK(w.is_zero());
  CHECK(w.delta() == 0.5);

  const TestFunction b1 = TestFunction::library("bump1");
  CHECK(!b1.is_zero());
  CHECK(b1.delta() == 1.0);
  CHECK(b1(-0.5) == doctest::Approx(0.8));
  CHECK(b1(-5.0) == 0.0);
  CHECK(b1(2.0) == 0.0);
  CHECK(b1.inf_support() == doctest::Approx(-2.0));
  CHECK(b1.sup_support() == doctest::Approx(1.0));
  // piecewise-linear interpolation between knots
  CHECK(b1(-1.25) == doctest::Approx(0.4));

  const TestFunction b1p = TestFunction::library("bump1_plus");
  for (double y = -3.0; y <= 2.0; y += 0.05) {
    CHECK(b1p(y) >= b1(y) - 1e-15);
  }
}

TEST_CASE("martingales at the start are exact") {
  const GenealogyForest f = simulate(basic_config(1.0, 0.25, 1, 0));
  const MartingalePair p = martingales(f, 0.0);
  CHECK(p.Y == 1.0);
  CHECK(p.Z == 0.0);
  CHECK(!p.pruned);
}

TEST_CASE("martingale means stay at their initial values") {
  const int n = 4000;
  RunningStats y, z;
  for (int i = 0; i < n; ++i) {
    const GenealogyForest f =
        simulate(basic_config(2.0, 0.5, 808, static_cast<std::uint64_t>(i)));
    const MartingalePair p = martingales(f, 2.0);
    y.add(p.Y);
    z.add(p.Z);
  }
  CHECK(std::fabs(y.mean() - 1.0) < 3.0 * y.se());
  CHECK(std::fabs(z.mean()) < 3.0 * z.se());
}

TEST_CASE("martingale pair flags pruning") {
  SimConfig cfg = basic_config(8.0, 0.25, 31, 2);
  cfg.prune_gap = 8.0;
  const GenealogyForest f = simulate(cfg);
  REQUIRE(f.pruned_count() > 0);
  CHECK(martingales(f, 8.0).pruned);
}

TEST_CASE("extremal process recentres the cloud") {
  const GenealogyForest f = simulate(basic_config(5.0, 0.25, 9, 0));
  const PointMeasure ext = extremal_process(f, 5.0);
  const PointMeasure raw = f.alive_positions(5.0);
  REQUIRE(ext.size() == raw.size());
  CHECK(ext.max() == doctest::Approx(raw.max() - recenter_m(5.0)).epsilon(1e-12));
  CHECK(ext.min() == doctest::Approx(raw.min() - recenter_m(5.0)).epsilon(1e-12));
}

TEST_CASE("recentred maximum is centred near zero at moderate times") {
  const int n = 400;
  std::vector<double> maxima;
  for (int i = 0; i < n; ++i) {
    const GenealogyForest f =
        simulate(basic_config(5.0, 0.25, 606, static_cast<std::uint64_t>(i)));
    maxima.push_back(extremal_process(f, 5.0).max());
  }
  std::sort(maxima.begin(), maxima.end());
  const double median = maxima[maxima.size() / 2];
  CHECK(median > -3.0);
  CHECK(median < 2.0);
}

TEST_CASE("sigma_I agrees with the recentred window count") {
  const GenealogyForest f = simulate(basic_config(4.0, 0.25, 15, 0));
  const PointMeasure ext = extremal_process(f, 4.0);
  for (const auto [lo, hi] : {std::pair{-3.0, 0.0}, std::pair{-1.0, 1.0}}) {
    const auto ids = sigma_I(f, 4.0, lo, hi);
    CHECK(ids.size() == ext.count_in(lo, hi));
    const int last = static_cast<int>(f.checkpoint_times().size()) - 1;
    for (std::uint32_t v : ids) {
      CHECK(f.alive(v, last));
      const double y = f.position(v, last) - recenter_m(4.0);
      CHECK(y >= lo - 1e-12);
      CHECK(y <= hi + 1e-12);
    }
  }
}

TEST_CASE("laplace functional fundamentals") {
  const TestFunction b1 = TestFunction::library("bump1");
  PointMeasure mu;
  CHECK(laplace_functional(mu, b1) == 1.0);

  mu.atoms = {-0.5, -1.5};
  const double expect = std::exp(-(b1(-0.5) + b1(-1.5)));
  CHECK(laplace_functional(mu, b1) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(laplace_functional(mu, b1) > 0.0);
  CHECK(laplace_functional(mu, b1) <= 1.0);

  // an atom above delta = 1 kills the functional outright
  mu.atoms = {-0.5, 1.5};
  CHECK(laplace_functional(mu, b1) == 0.0);

  // permutation invariance
  PointMeasure a, b;
  a.atoms = {-0.3, -1.0, -0.6};
  b.atoms = {-1.0, -0.6, -0.3};
  CHECK(laplace_functional(a, b1) == laplace_functional(b, b1));

  // pointwise larger test function gives a smaller functional
  const TestFunction b1p = TestFunction::library("bump1_plus");
  PointMeasure c;
  c.atoms = {-0.5, -0.9};
  CHECK(laplace_functional(c, b1p) <= laplace_functional(c, b1));

  // window05: pure cutoff at 0.5
  const TestFunction w = TestFunction::library("window05");
  PointMeasure d;
  d.atoms = {-2.0, 0.4};
  CHECK(laplace_functional(d, w) == 1.0);
  d.atoms = {-2.0, 0.6};
  CHECK(laplace_functional(d, w) == 0.0);
}

TEST_CASE("envelopes order and anchor correctly") {
  const double t = 9.0;
  // the boundaries are ordered where min(s, t-s) > 1; within distance 1 of
  // the endpoints s^gamma is decreasing in gamma and they cross
  for (double s : {1.5, 2.0, 4.4, 6.0, 7.5}) {
    CHECK(envelope_f(0.4, t, s) > 0.0);
    CHECK(envelope_F(0.4, t, s) > envelope_F(0.6, t, s));
  }
  CHECK(envelope_F(0.4, t, 0.0) == doctest::Approx(0.0));
  CHECK(envelope_F(0.4, t, t) == doctest::Approx(recenter_m(t)));
  // symmetric bump: f(s) = f(t - s)
  CHECK(envelope_f(0.4, t, 2.0) == doctest::Approx(envelope_f(0.4, t, 7.0)));
}

TEST_CASE("tube violations become rarer as the window widens") {
  const int n = 150;
  const double t = 9.0;
  int viol[3] = {0, 0, 0};
  const double rs[3] = {1.0, 2.0, 3.0};
  for (int i = 0; i < n; ++i) {
    const GenealogyForest f =
        simulate(basic_config(t, 0.25, 2222, static_cast<std::uint64_t>(i)));
    for (int j = 0; j < 3; ++j) {
      if (tube_violation(f, t, -3.0, 0.0, 0.4, 0.6, rs[j])) ++viol[j];
    }
  }
  // r = 3 excludes more of the path than r = 1, so it can only violate less
  CHECK(viol[0] >= viol[1]);
  CHECK(viol[1] >= viol[2]);
  CHECK_THROWS_AS(tube_violation(simulate(basic_config(2.0, 0.5, 1, 0)), 2.0, -3.0, 0.0,
                                 0.6, 0.4, 0.5),
                  DomainError);
}

TEST_CASE("time average of a linear ramp is exact") {
  std::vector<double> times, values;
  for (int i = 0; i <= 20; ++i) {
    times.push_back(i * 0.05);
    values.push_back(i * 0.05);
  }
  const TimeAverageResult r = time_average(times, values, 0.1);
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.t_split == doctest::Approx(0.1));
  CHECK(r.early_contrib + r.late_contrib == doctest::Approx(r.value).epsilon(1e-14));
  CHECK(r.early_avg == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(r.late_avg == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("time average handles a split interior to a cell") {
  // values 1 on [0, 0.5], 0 afterwards; grid coarse enough that the
  // epsilon split lands strictly inside a cell
  const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> values{1.0, 1.0, 1.0, 0.0, 0.0};
  const TimeAverageResult r = time_average(times, values, 0.3);
  // trapezoid integral: 0.25 + 0.25 + 0.125 + 0 = 0.625
  CHECK(r.value == doctest::Approx(0.625).epsilon(1e-14));
  CHECK(r.t_split == doctest::Approx(0.3));
  CHECK(r.early_contrib + r.late_contrib == doctest::Approx(r.value).epsilon(1e-14));
  // early window [0, 0.3] has constant value 1
  CHECK(r.early_avg == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("time average input validation") {
  CHECK_THROWS_AS(time_average({0.0}, {1.0}, 0.5), UsageError);
  CHECK_THROWS_AS(time_average({0.0, 0.0}, {1.0, 1.0}, 0.5), UsageError);
  CHECK_THROWS_AS(time_average({0.0, 1.0}, {1.0}, 0.5), UsageError);
  CHECK_THROWS_AS(time_average({0.0, 1.0}, {1.0, 1.0}, 0.0), DomainError);
  CHECK_THROWS_AS(time_average({0.0, 1.0}, {1.0, 1.0}, 1.0), DomainError);
}
