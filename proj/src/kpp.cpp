#include "bbmlab/kpp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

#include "bbmlab/errors.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/stats_util.hpp"

namespace bbm::kpp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kStartupSteps = 4;  // backward-Euler steps after init
constexpr double kTailThreshold = 1e-10;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// (1 - u) - sum_k p_k (1 - u)^k, evaluated with w = 1 - u.
inline double reaction(double u, const std::vector<double>& pmf) {
  const double w = 1.0 - u;
  double wk = 1.0;
  double sum = 0.0;
  for (double p : pmf) {
    wk *= w;
    sum += p * wk;
  }
  return w - sum;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(dx > 0.0) || !(dx <= 1.0)) throw ConfigError("solver: dx must be in (0, 1]");
  if (!(dt > 0.0) || !(dt <= 0.1)) {
    throw ConfigError("solver: dt must be in (0, 0.1] (explicit reaction stability)");
  }
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
    throw ConfigError("solver: need finite x_min < x_max");
  }
  if (moving_window && !(front_margin > 0.0 && front_margin < x_max - x_min)) {
    throw ConfigError("solver: front_margin must be in (0, window width)");
  }
  const double cells = (x_max - x_min) / dx;
  if (cells > static_cast<double>(max_cells)) {
    throw ConfigError("solver: grid would need " + fmt(cells) + " cells, cap is " +
                      std::to_string(max_cells));
  }
}

double KppSolution::value_at(double x) const {
  const double pos = (x - x0_) / config_.dx;
  if (pos < 0.0 || pos > static_cast<double>(u_.size() - 1)) {
    throw GridError("solver: x = " + fmt(x) + " outside the window [" + fmt(x_left()) +
                    ", " + fmt(x_right()) + "]; widen the grid");
  }
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= u_.size()) return u_.back();
  const double w = pos - static_cast<double>(i);
  return u_[i] * (1.0 - w) + u_[i + 1] * w;
}

void KppSolution::one_step(bool backward_euler) {
  const std::size_t n = u_.size();
  const double dx2 = config_.dx * config_.dx;
  const double theta = backward_euler ? 1.0 : 0.5;
  // diffusion coefficient is 1/2, split theta-implicit / (1-theta)-explicit
  const double ci = theta * 0.5 * config_.dt / dx2;
  const double ce = (1.0 - theta) * 0.5 * config_.dt / dx2;

  rhs_.resize(n);
  scratch_.resize(n);
  rhs_[0] = 1.0;
  rhs_[n - 1] = 0.0;
  const auto& pmf = config_.law.pmf_vector();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    rhs_[i] = u_[i] + ce * (u_[i - 1] - 2.0 * u_[i] + u_[i + 1]) +
              config_.dt * reaction(u_[i], pmf);
  }

  // Thomas sweep on rows (-ci, 1 + 2 ci, -ci); rows 0 and n-1 are pinned
  // identity rows, so the first row contributes no coupling.
  std::vector<double>& cp = scratch_;  // post-elimination upper diagonal
  cp[0] = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double piv = (1.0 + 2.0 * ci) + ci * cp[i - 1];
    cp[i] = -ci / piv;
    rhs_[i] = (rhs_[i] + ci * rhs_[i - 1]) / piv;
  }

  u_[n - 1] = 0.0;
  for (std::size_t i = n - 1; i-- > 1;) {
    u_[i] = rhs_[i] - cp[i] * u_[i + 1];
  }
  u_[0] = 1.0;

  double lo = 0.0;
  double hi = 1.0;
  for (double v : u_) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo < -1e-3 || hi > 1.0 + 1e-3) {
    throw SolverError("solver: instability at t = " + fmt(t() + config_.dt) +
                      " (min " + fmt(lo) + ", max " + fmt(hi) + ")");
  }
  max_excursion_ = std::max({max_excursion_, -lo, hi - 1.0});
  if (lo < 0.0 || hi > 1.0) {
    for (double& v : u_) v = std::clamp(v, 0.0, 1.0);
  }
}

void KppSolution::step(std::size_t n_steps) {
  for (std::size_t s = 0; s < n_steps; ++s) {
    one_step(startup_left_ > 0);
    if (startup_left_ > 0) --startup_left_;
    ++steps_;
    if (config_.moving_window) shift_window_if_needed();
  }
}

void KppSolution::step_to(double t_target) {
  const double span = t_target - t();
  if (span < -1e-12) throw UsageError("solver: step_to into the past");
  const double n_real = span / config_.dt;
  const auto n = static_cast<std::int64_t>(std::llround(n_real));
  if (std::fabs(n_real - static_cast<double>(n)) > 1e-6) {
    throw ConfigError("solver: dt = " + fmt(config_.dt) + " does not divide the span to t = " +
                      fmt(t_target));
  }
  step(static_cast<std::size_t>(n));
}

double KppSolution::front_position(double level) const {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("front: level must be in (0,1)");
  for (std::size_t i = u_.size(); i-- > 1;) {
    if (u_[i - 1] >= level && u_[i] < level) {
      const double w = (u_[i - 1] - level) / (u_[i - 1] - u_[i]);
      return x_of(i - 1) + w * config_.dx;
    }
  }
  throw GridError("front: no crossing of level " + fmt(level) + " inside the window");
}

void KppSolution::shift_window_if_needed() {
  double front;
  try {
    front = front_position(0.5);
  } catch (const GridError&) {
    return;  // no front yet (e.g. all-zero data)
  }
  const double gap = x_right() - front;
  if (gap >= config_.front_margin) return;
  const double slack = 20.0;
  const double left_keep = 20.0;  // never shift the settled profile out from behind the front
  const double want = config_.front_margin + slack - gap;
  const double cap = front - left_keep - x_left();
  const double move = std::min(want, cap);
  if (!(move > 0.0)) return;
  const auto k = static_cast<std::size_t>(std::ceil(move / config_.dx));
  const std::size_t n = u_.size();
  if (k >= n) throw SolverError("solver: window shift larger than the window");
  std::memmove(u_.data(), u_.data() + k, (n - k) * sizeof(double));
  std::fill(u_.end() - static_cast<std::ptrdiff_t>(k), u_.end(), 0.0);
  u_[0] = 1.0;
  const double dxk = config_.dx * static_cast<double>(k);
  x0_ += dxk;
  shift_total_ += dxk;
}

KppSolution init_from_profile(const SolverConfig& config,
                              const std::function<double(double)>& u0) {
  config.validate();
  KppSolution sol;
  sol.config_ = config;
  sol.x0_ = config.x_min;
  const auto n = static_cast<std::size_t>(
                     std::llround((config.x_max - config.x_min) / config.dx)) + 1;
  sol.u_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = u0(sol.x_of(i));
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ConfigError("solver: initial profile must take values in [0,1]");
    }
    sol.u_[i] = v;
  }
  sol.u_.front() = 1.0;
  sol.u_.back() = 0.0;
  sol.startup_left_ = kStartupSteps;
  return sol;
}

KppSolution init_heaviside(const SolverConfig& config, double x0) {
  return init_from_profile(config, [x0](double x) { return x < x0 ? 1.0 : 0.0; });
}

KppSolution init_from_test_function(const SolverConfig& config, const TestFunction& tf) {
  const double delta = tf.delta();
  return init_from_profile(config, [&tf, delta](double x) {
    if (-x > delta) return 1.0;  // cutoff: mass above delta is forbidden
    return 1.0 - std::exp(-tf(-x));
  });
}

FrontTrace trace_front(KppSolution& sol, double t_end, double sample_dt) {
  if (!(sample_dt > 0.0)) throw ConfigError("trace_front: sample_dt must be > 0");
  FrontTrace trace;
  double t_next = sol.t();
  while (t_next <= t_end + 1e-9) {
    sol.step_to(t_next);
    trace.push_back({sol.t(), sol.front_position(0.5)});
    t_next += sample_dt;
  }
  return trace;
}

BramsonFit bramson_fit(const FrontTrace& trace, double t_min, double t_max) {
  std::vector<std::array<double, 3>> rows;
  std::vector<double> y;
  for (const auto& s : trace) {
    if (s.t < t_min || s.t > t_max) continue;
    if (!(s.t > 0.0)) continue;
    rows.push_back({s.t, std::log(s.t), 1.0});
    y.push_back(s.x_half);
  }
  if (rows.size() < 10) throw GridError("bramson_fit: need at least 10 samples in range");
  if (!(rows.back()[0] >= 2.0 * rows.front()[0])) {
    throw GridError("bramson_fit: fit window must span at least a factor 2 in t");
  }
  const auto c = fit_three_basis(rows, y);
  BramsonFit out;
  out.speed = c[0];
  out.log_coef = c[1];
  out.constant = c[2];
  out.n_points = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double fit = c[0] * rows[i][0] + c[1] * rows[i][1] + c[2];
    out.max_residual = std::max(out.max_residual, std::fabs(fit - y[i]));
  }
  return out;
}

std::vector<ProfileDistance> wave_profile_convergence(KppSolution& sol,
                                                      const std::vector<double>& snapshot_times,
                                                      double xi_lo, double xi_hi) {
  if (snapshot_times.size() < 2) {
    throw UsageError("wave_profile_convergence: need at least two snapshot times");
  }
  if (!(xi_lo < 0.0 && xi_hi > 0.0)) {
    throw DomainError("wave_profile_convergence: window must straddle 0");
  }
  const double dx = sol.dx();
  const auto n_xi = static_cast<std::size_t>(std::floor((xi_hi - xi_lo) / dx)) + 1;

  std::vector<ProfileDistance> out;
  std::vector<double> prev, cur;
  double prev_t = 0.0;
  bool have_prev = false;
  bool any_interp = false;
  for (double ts : snapshot_times) {
    sol.step_to(ts);
    const double front = sol.front_position(0.5);
    // recentred profile xi -> u(t, front + xi)
    cur.resize(n_xi);
    const double cells = front / dx;
    const bool aligned = std::fabs(cells - std::round(cells)) < 1e-9;
    any_interp = any_interp || !aligned;
    for (std::size_t i = 0; i < n_xi; ++i) {
      cur[i] = sol.value_at(front + xi_lo + dx * static_cast<double>(i));
    }
    if (have_prev) {
      double d = 0.0;
      for (std::size_t i = 0; i < n_xi; ++i) d = std::max(d, std::fabs(cur[i] - prev[i]));
      out.push_back({prev_t, ts, d, any_interp});
    }
    prev.swap(cur);
    prev_t = ts;
    have_prev = true;
  }
  return out;
}

CrResult compute_C_r(const KppSolution& sol, double y_max) {
  const double r = sol.t();
  if (!(r > 0.0)) throw DomainError("compute_C_r: solution time must be > 0");
  if (!(y_max > 0.0)) throw DomainError("compute_C_r: y_max must be > 0");
  const double base = kSqrt2 * r;
  if (base + y_max > sol.x_right()) {
    throw GridError("compute_C_r: window ends at " + fmt(sol.x_right()) +
                    ", need sqrt2 r + y_max = " + fmt(base + y_max) + "; widen the grid");
  }
  auto integrand = [&](double y) {
    return std::sqrt(2.0 / M_PI) * sol.value_at(base + y) * y * std::exp(kSqrt2 * y);
  };
  // composite Simpson at roughly the grid resolution
  auto half = static_cast<std::size_t>(std::ceil(y_max / (2.0 * sol.dx())));
  half = std::max<std::size_t>(half, 8);
  const std::size_t n = 2 * half;
  const double h = y_max / static_cast<double>(n);
  double sum = integrand(0.0) + integrand(y_max);
  for (std::size_t i = 1; i < n; ++i) {
    sum += integrand(h * static_cast<double>(i)) * ((i % 2 == 1) ? 4.0 : 2.0);
  }
  CrResult out;
  out.value = sum * h / 3.0;
  out.r = r;
  out.y_max = y_max;
  out.tail_integrand = integrand(y_max);
  if (!(out.tail_integrand < kTailThreshold)) {
    throw GridError("compute_C_r: integrand " + fmt(out.tail_integrand) + " at y_max = " +
                    fmt(y_max) + " has not decayed below 1e-10; increase y_max");
  }
  return out;
}

std::vector<CrResult> c_r_curve(KppSolution& sol, const std::vector<double>& r_list,
                                double y_max) {
  std::vector<CrResult> out;
  for (double r : r_list) {
    sol.step_to(r);
    out.push_back(compute_C_r(sol, y_max));
  }
  return out;
}

InitialConditionReport validate_initial_condition(const KppSolution& sol, double window) {
  if (sol.t() != 0.0) {
    throw UsageError("validate_initial_condition: call before stepping (t = 0)");
  }
  if (!(window > 0.0)) throw DomainError("validate_initial_condition: window must be > 0");
  const auto& u = sol.u();
  const double dx = sol.dx();
  InitialConditionReport rep;

  // Right tail: fit log u against x where u has left the front region but is
  // still resolvable.  No such points at all means compact support.
  std::vector<double> xs, ls;
  bool past_front = false;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    if (!past_front && u[i] < 1e-3) past_front = true;
    if (past_front && u[i] > 1e-12 && u[i] < 1e-3) {
      xs.push_back(sol.x_of(i));
      ls.push_back(std::log(u[i]));
    }
  }
  if (xs.size() < 6) {
    // compact support (or unresolvably thin tail): decays faster than any rate
    rep.right_rate = -kInf;
    rep.right_tail_ok = true;
    rep.m_centering_ok = true;
    rep.conclusive = past_front;
  } else {
    const auto fit = fit_line(xs, ls);
    rep.right_rate = fit.slope;
    rep.right_tail_ok = fit.slope <= -kSqrt2 + 1e-6;
    rep.m_centering_ok = fit.slope < -kSqrt2 - 0.05;
    rep.conclusive = true;
  }

  // Left mass: sliding windows over the left half must hold mass.
  const double x_mid = 0.5 * (sol.x_left() + sol.x_right());
  double min_mass = kInf;
  const auto w_cells = static_cast<std::size_t>(std::llround(window / dx));
  if (w_cells < 2 || sol.x_left() + window > x_mid) {
    throw DomainError("validate_initial_condition: window too large for the grid");
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < w_cells; ++i) mass += u[i] * dx;
  for (std::size_t i = 0; sol.x_of(i) + window <= x_mid; ++i) {
    min_mass = std::min(min_mass, mass);
    mass += (u[i + w_cells] - u[i]) * dx;
  }
  rep.left_min_mass = min_mass;
  rep.left_mass_ok = min_mass > 0.05 * window;
  return rep;
}

SandwichReport tail_sandwich(const KppSolution& sol_at_t, double r, double c_r,
                             const std::vector<double>& X_values) {
  const double t = sol_at_t.t();
  if (!(r > 0.0)) throw DomainError("tail_sandwich: r must be > 0");
  if (!(t >= 8.0 * r)) {
    throw DomainError("tail_sandwich: regime violation t >= 8r (t = " + fmt(t) +
                      ", r = " + fmt(r) + ")");
  }
  if (!(c_r > 0.0)) throw DomainError("tail_sandwich: c_r must be > 0");
  const double x_cap = std::pow(t, 0.4);
  const double m = recenter_m(t);
  const double lower = 8.0 * r - kLogCoef * std::log(t);
  SandwichReport rep;
  rep.t = t;
  rep.r = r;
  rep.c_r = c_r;
  rep.gamma_hat = 1.0;
  for (double X : X_values) {
    if (!(X > 0.0)) throw DomainError("tail_sandwich: X must be > 0");
    if (!(X <= x_cap)) {
      throw DomainError("tail_sandwich: regime violation X <= t^0.4 (X = " + fmt(X) +
                        ", t^0.4 = " + fmt(x_cap) + ")");
    }
    SandwichRow row;
    row.X = X;
    row.u_val = sol_at_t.value_at(X + m);
    row.predicted = c_r * X * std::exp(-kSqrt2 * X);
    row.ratio = row.u_val / row.predicted;
    row.in_asymptotic_regime = X >= lower;
    rep.gamma_hat = std::max({rep.gamma_hat, row.ratio, 1.0 / row.ratio});
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<SandwichReport> run_tail_sandwich(const SolverConfig& config,
                                              const std::vector<double>& r_list, double t,
                                              const std::vector<double>& X_values,
                                              double y_max) {
  KppSolution sol = init_heaviside(config);
  std::vector<CrResult> crs;
  {
    std::vector<double> sorted = r_list;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != r_list) throw UsageError("run_tail_sandwich: r_list must be increasing");
  }
  for (double r : r_list) {
    sol.step_to(r);
    crs.push_back(compute_C_r(sol, y_max));
  }
  sol.step_to(t);
  std::vector<SandwichReport> out;
  for (const auto& cr : crs) {
    out.push_back(tail_sandwich(sol, cr.r, cr.value, X_values));
  }
  return out;
}

}  // namespace bbm::kpp
