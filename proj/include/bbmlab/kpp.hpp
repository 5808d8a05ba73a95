#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bbmlab/branching_law.hpp"
#include "bbmlab/test_function.hpp"

namespace bbm::kpp {

// One-dimensional reaction-diffusion front solver for
//
//     u_t = (1/2) u_xx + (1 - u) - sum_k p_k (1 - u)^k
//
// on a uniform grid, Crank-Nicolson in the diffusion and explicit in the
// reaction, with Dirichlet pinning u = 1 at the left edge and u = 0 at the
// right edge.  The first few steps after initialization use backward Euler
// (Rannacher startup) so discontinuous initial data does not ring.
//
// With moving_window enabled the grid slides right whenever the half-level
// front gets within front_margin of the right edge, keeping a fixed-size
// window around the front for arbitrarily long runs; window_shift() reports
// the total distance dropped on the left.
struct SolverConfig {
  double dx = 0.02;
  double dt = 0.01;
  double x_min = -30.0;
  double x_max = 40.0;
  bool moving_window = false;
  double front_margin = 60.0;  // resolved distance kept ahead of the front
  BranchingLaw law = BranchingLaw::binary();
  std::uint64_t max_cells = 4'000'000;

  void validate() const;  // throws ConfigError
};

class KppSolution {
 public:
  double t() const { return t0_ + static_cast<double>(steps_) * config_.dt; }
  double dx() const { return config_.dx; }
  double x_left() const { return x0_; }
  double x_right() const { return x0_ + config_.dx * static_cast<double>(u_.size() - 1); }
  const std::vector<double>& u() const { return u_; }
  double x_of(std::size_t i) const { return x0_ + config_.dx * static_cast<double>(i); }

  // Linear interpolation; GridError outside the current window.
  double value_at(double x) const;

  double window_shift() const { return shift_total_; }

  // Largest distance the raw update ever left [0,1] before clamping.
  double max_preclamp_excursion() const { return max_excursion_; }

  void step(std::size_t n_steps);
  // Advance to absolute time t (must be a whole number of steps ahead).
  void step_to(double t_target);

  // Rightmost crossing of the given level, linearly interpolated.
  double front_position(double level = 0.5) const;

  const SolverConfig& config() const { return config_; }

 private:
  friend KppSolution init_from_profile(const SolverConfig&,
                                       const std::function<double(double)>&);

  void shift_window_if_needed();
  void one_step(bool backward_euler);

  SolverConfig config_;
  std::vector<double> u_;
  std::vector<double> rhs_, scratch_;
  double x0_ = 0.0;
  double t0_ = 0.0;
  std::int64_t steps_ = 0;
  double shift_total_ = 0.0;
  double max_excursion_ = 0.0;
  int startup_left_ = 0;
};

// Heaviside data u = 1 below x0, 0 above: the max-distribution initial
// condition.  1 - u(t, x) is then the probability the rightmost particle at
// time t is at most x.
KppSolution init_heaviside(const SolverConfig& config, double x0 = 0.0);

// Initial data 1 - exp(-f_delta(-x)) for a test function: evolving it makes
// u(t, x) the complementary Laplace functional of the particle system seen
// from -x.  Jumps to 1 at x = -delta by the cutoff.
KppSolution init_from_test_function(const SolverConfig& config, const TestFunction& tf);

// Arbitrary profile in [0,1]; mostly for validation and synthetic tests.
KppSolution init_from_profile(const SolverConfig& config,
                              const std::function<double(double)>& u0);

struct FrontSample {
  double t = 0.0;
  double x_half = 0.0;
};
using FrontTrace = std::vector<FrontSample>;

// Evolve while sampling the half-level front every sample_dt.
FrontTrace trace_front(KppSolution& sol, double t_end, double sample_dt);

struct BramsonFit {
  double speed = 0.0;     // coefficient of t
  double log_coef = 0.0;  // coefficient of log t
  double constant = 0.0;
  double max_residual = 0.0;
  std::size_t n_points = 0;
};

// Fit x_half(t) = speed t + log_coef log t + constant over [t_min, t_max].
// Needs at least 10 samples spanning a factor 2 in t.
BramsonFit bramson_fit(const FrontTrace& trace, double t_min, double t_max);

struct ProfileDistance {
  double t_from = 0.0;
  double t_to = 0.0;
  double sup_distance = 0.0;  // sup over the common recentred window
  bool interpolated = false;  // recentring shift was not a whole cell
};

// Advance through snapshot_times, recentring each profile at its own
// half-level point, and return sup-norm distances of consecutive recentred
// profiles on the window [xi_lo, xi_hi] around the front.
std::vector<ProfileDistance> wave_profile_convergence(KppSolution& sol,
                                                      const std::vector<double>& snapshot_times,
                                                      double xi_lo, double xi_hi);

struct CrResult {
  double value = 0.0;
  double r = 0.0;
  double y_max = 0.0;
  double tail_integrand = 0.0;  // integrand at y_max, must be < 1e-10
};

// Front-tail functional at the solution's current time r:
//
//     C_r = sqrt(2/pi) Int_0^{y_max} u(r, sqrt2 r + y) y exp(sqrt2 y) dy
//
// by composite Simpson.  GridError when the window does not reach
// sqrt2 r + y_max or the integrand has not decayed below 1e-10 at y_max.
CrResult compute_C_r(const KppSolution& sol, double y_max);

// Evolve one solution through increasing r values, computing C_r at each.
std::vector<CrResult> c_r_curve(KppSolution& sol, const std::vector<double>& r_list,
                                double y_max);

struct InitialConditionReport {
  bool right_tail_ok = false;  // decays at least like exp(-sqrt2 x) (or compact)
  double right_rate = 0.0;     // fitted exponential rate; -inf for compact support
  bool left_mass_ok = false;   // sliding-window mass bounded away from 0 on the left
  double left_min_mass = 0.0;
  bool m_centering_ok = false;  // decay strictly faster than sqrt2: standard
                                // front centering applies unchanged
  bool conclusive = false;      // enough usable tail points to call it
};

// Check front-suitability of initial data; must be called before stepping.
InitialConditionReport validate_initial_condition(const KppSolution& sol,
                                                  double window = 2.0);

struct SandwichRow {
  double X = 0.0;
  double u_val = 0.0;      // u(t, X + m(t))
  double predicted = 0.0;  // c_r X exp(-sqrt2 X)
  double ratio = 0.0;      // u_val / predicted
  bool in_asymptotic_regime = false;  // X >= 8r - (3/(2 sqrt2)) log t
};

struct SandwichReport {
  double t = 0.0;
  double r = 0.0;
  double c_r = 0.0;
  double gamma_hat = 0.0;  // max over rows of max(ratio, 1/ratio)
  std::vector<SandwichRow> rows;
};

// Ratio table u(t, X + m(t)) / (c_r X exp(-sqrt2 X)) for the Heaviside
// solution: how tightly the front tail is sandwiched by the r-functional.
// Enforces t >= 8r and 0 < X <= t^0.4 for every X; the per-row asymptotic
// lower bound on X is reported as a flag, not enforced.
SandwichReport tail_sandwich(const KppSolution& sol_at_t, double r, double c_r,
                             const std::vector<double>& X_values);

// Driver: one Heaviside evolution, C_r at each r in r_list, then the ratio
// table for each at time t.
std::vector<SandwichReport> run_tail_sandwich(const SolverConfig& config,
                                              const std::vector<double>& r_list, double t,
                                              const std::vector<double>& X_values,
                                              double y_max = 28.0);

}  // namespace bbm::kpp
