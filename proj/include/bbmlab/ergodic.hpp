#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bbmlab/branching_law.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/stats_util.hpp"
#include "bbmlab/test_function.hpp"

namespace bbm {

// The constant C(f, delta) with the route that produced it: "kpp" (front
// functional of the solved equation) or "cluster" (backbone intensity times
// the pool integral).  Always a finite-r surrogate, never an exact limit.
struct CEstimate {
  double value = 0.0;
  std::string route;
  double r_used = 0.0;
};

// C(f, delta) through the equation route: evolve the f-initialised front to
// time r and take the tail functional there.  r >= 4 required.
CEstimate compute_C_kpp(const TestFunction& tf, double r = 12.0, double y_max = 28.0,
                        const BranchingLaw& law = BranchingLaw::binary());

// The same functional for Heaviside data (f = 0, delta = 0): the overall
// normalisation constant of the recentred maximum.
CEstimate compute_C_max(double r = 12.0, double y_max = 28.0,
                        const BranchingLaw& law = BranchingLaw::binary());

struct ErgodicConfig {
  double T = 40.0;
  double epsilon = 0.1;
  double dt_avg = 0.25;
  std::uint64_t seed = 1;
  std::uint64_t replica = 0;
  BranchingLaw law = BranchingLaw::binary();
  // Derivative-martingale readout time T' = min(T, z_time_cap); pruning stays
  // off before T' so the readout sees the full population.
  double z_time_cap = 12.0;
  double prune_gap = 8.0;  // width once pruning starts; 0 disables
  std::uint64_t max_nodes = 10'000'000;
  double kpp_r = 12.0;  // horizon of the equation route for C

  void validate() const;
};

struct ErgodicReport {
  std::string tf_id;
  double T = 0.0;
  double epsilon = 0.0;
  double dt_avg = 0.0;
  TimeAverageResult avg;  // time average of the path functional
  double z_time = 0.0;    // T'
  double Y_estimate = 0.0;
  double Z_estimate = 0.0;
  bool z_degenerate = false;  // Z(T') <= 0: limit object not resolved
  CEstimate C;
  double analytic_value = 0.0;  // exp(-C Z(T'))
  double abs_gap = 0.0;         // |time average - analytic|
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::size_t total_nodes = 0;
  std::uint64_t pruned_nodes = 0;
};

// One-path ergodic comparison: time-average the Laplace path functional of
// the recentred cloud along a single run and compare with exp(-C Z), Z read
// off the same run at T'.  A non-null precomputed constant skips the solve.
ErgodicReport run_time_average(const ErgodicConfig& config, const TestFunction& tf,
                               const CEstimate* c_precomputed = nullptr);

struct SpaceAverageReport {
  std::string tf_id;
  double t = 0.0;
  std::size_t n_replicas = 0;
  MeanSE laplace;   // mean over replicas of the fixed-time functional
  MeanSE analytic;  // mean over replicas of exp(-C Z_replica)
  double gap = 0.0;
  double combined_se = 0.0;
  CEstimate C;
  std::size_t n_degenerate = 0;
};

// Replica-average counterpart at a fixed time: ensemble mean of the
// functional against the ensemble mean of exp(-C Z).
SpaceAverageReport run_space_average(const ErgodicConfig& base, const TestFunction& tf,
                                     std::size_t n_replicas, double t,
                                     const CEstimate* c_precomputed = nullptr,
                                     int threads = 1);

struct GumbelFit {
  double lambda = 0.0;  // decay rate of the fitted double exponential
  double a = 0.0;       // scale: G(x) = exp(-a exp(-lambda x))
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

// Fit G(x) = exp(-a exp(-lambda x)) through the linearisation
// log(-log G) = log a - lambda x, using only grid points with G in
// (0.05, 0.95).  Fewer than two such points: GridError (widen the x grid).
GumbelFit fit_gumbel_cdf(const std::vector<double>& x, const std::vector<double>& g);

struct GumbelSeedResult {
  std::uint64_t seed = 0;
  GumbelFit fit;
  bool fit_valid = false;  // false: too few mid-range grid points on this seed
  double z_estimate = 0.0;
  bool z_degenerate = false;
  std::vector<double> g_values;  // G_T(x) on the grid
};

struct GumbelReport {
  double T = 0.0;
  std::vector<double> x_grid;
  std::vector<GumbelSeedResult> per_seed;
  double lambda_tol = 0.1;      // relative window around sqrt2
  std::size_t n_lambda_ok = 0;  // seeds with lambda in sqrt2 (1 +- tol)
  CEstimate c_max;
  LineFit a_on_cz;  // fitted a against C_max Z, slope should sit near 1
  bool a_on_cz_valid = false;
  std::size_t n_degenerate = 0;
};

// Per-seed time-averaged exceedance profile of the recentred maximum and its
// double-exponential fit; the scale is regressed on C_max Z across seeds.
GumbelReport run_gumbel(const ErgodicConfig& base, const std::vector<double>& x_grid,
                        const std::vector<std::uint64_t>& seeds, int threads = 1);

struct BranchingTimeConfig {
  double t = 12.0;
  double t2 = 16.0;
  double window_lo = -3.0;  // recentred selection window for both times
  double window_hi = 0.0;
  std::vector<double> r_list = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
  std::size_t n_replicas = 2000;
  std::uint64_t seed = 1;
  BranchingLaw law = BranchingLaw::binary();
  double prune_gap = 8.0;
  double grid_dt = 0.5;
  std::uint64_t max_nodes = 10'000'000;

  void validate() const;
};

struct BranchingTimeRow {
  double r = 0.0;
  std::size_t count = 0;  // replicas with M >= r
  double freq = 0.0;
  Interval ci;  // Wilson 95%
};

struct BranchingTimeReport {
  double t = 0.0;
  double t2 = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t n_replicas = 0;
  std::size_t n_effective = 0;  // both windows nonempty
  std::size_t n_empty = 0;
  std::vector<BranchingTimeRow> rows;
  LineFit decay_k03;  // ln freq against r^0.3
  LineFit decay_k05;  // ln freq against r^0.5
  bool decay_valid = false;
};

// Per replica, the latest common branching time over all pairs drawn from the
// front windows at t and t2; rows give the exceedance frequency of that
// statistic.  Frequencies are nonincreasing in r by construction.
BranchingTimeReport run_branching_time(const BranchingTimeConfig& config,
                                       int threads = 1);

struct DecompositionConfig {
  double T = 40.0;
  std::size_t n_outer = 100;
  std::size_t n_inner = 16;
  double grid_dt = 0.5;
  std::uint64_t seed = 1;
  BranchingLaw law = BranchingLaw::binary();
  double prune_gap = 8.0;
  std::uint64_t max_nodes = 10'000'000;

  void validate() const;
};

struct PairStat {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n_pairs = 0;  // pairs entering each per-replica average
};

struct CorrelationDiagnostic {
  double T = 0.0;
  double R_T = 0.0;  // freeze time T^{0.4}
  std::size_t n_outer = 0;
  std::size_t n_inner = 0;
  std::vector<double> s_grid;
  PairStat far_product;   // mean over replicas of the far-pair product average
  PairStat near_product;  // same for pairs closer than R_T
  double max_abs_y = 0.0;
};

// Freeze each run at R_T = T^{0.4}, regrow n_inner continuations to estimate
// the conditional mean of the functional, and correlate the centered residual
// Y_s across time pairs.  Pairs |s - s'| >= R_T should decorrelate; nearer
// pairs keep visible correlation.  n_inner < 16 is refused: the conditional
// mean would be too noisy to interpret the products.
CorrelationDiagnostic run_decomposition_diagnostics(const DecompositionConfig& config,
                                                    const TestFunction& tf,
                                                    int threads = 1);

}  // namespace bbm
