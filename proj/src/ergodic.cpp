#include "bbmlab/ergodic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bbmlab/errors.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/kpp.hpp"
#include "bbmlab/parallel.hpp"
#include "bbmlab/rng.hpp"

namespace bbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kDecompTag = 0xdec0;

bool divides(double step, double span) {
  const double q = span / step;
  return std::fabs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::fabs(q));
}

}  // namespace

CEstimate compute_C_kpp(const TestFunction& tf, double r, double y_max,
                        const BranchingLaw& law) {
  if (!(r >= 4.0)) throw DomainError("compute_C_kpp: r must be >= 4");
  if (tf.is_zero() && !std::isfinite(tf.delta())) {
    return {0.0, "kpp", r};  // trivial functional, no front at all
  }
  kpp::SolverConfig sc;
  sc.law = law;
  const double delta = std::isfinite(tf.delta()) ? tf.delta() : 0.0;
  sc.x_min = std::min(-30.0, -delta - 10.0);
  sc.x_max = kSqrt2 * r + y_max + 5.0;
  kpp::KppSolution sol = kpp::init_from_test_function(sc, tf);
  sol.step_to(r);
  const kpp::CrResult cr = kpp::compute_C_r(sol, y_max);
  return {cr.value, "kpp", r};
}

CEstimate compute_C_max(double r, double y_max, const BranchingLaw& law) {
  if (!(r >= 4.0)) throw DomainError("compute_C_max: r must be >= 4");
  kpp::SolverConfig sc;
  sc.law = law;
  sc.x_max = kSqrt2 * r + y_max + 5.0;
  kpp::KppSolution sol = kpp::init_heaviside(sc);
  sol.step_to(r);
  const kpp::CrResult cr = kpp::compute_C_r(sol, y_max);
  return {cr.value, "kpp", r};
}

void ErgodicConfig::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("ergodic: T must be finite > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("ergodic: epsilon in (0,1)");
  if (!(dt_avg > 0.0)) throw ConfigError("ergodic: dt_avg must be > 0");
  if (!divides(dt_avg, T)) throw ConfigError("ergodic: dt_avg must divide T");
  if (!(z_time_cap > 0.0)) throw ConfigError("ergodic: z_time_cap must be > 0");
  if (z_time_cap < T && !divides(dt_avg, z_time_cap)) {
    throw ConfigError("ergodic: dt_avg must divide z_time_cap so T' lands on the grid");
  }
  if (prune_gap != 0.0 && !(prune_gap >= 8.0)) {
    throw ConfigError("ergodic: prune_gap must be 0 or >= 8");
  }
  if (!(kpp_r >= 4.0)) throw ConfigError("ergodic: kpp_r must be >= 4");
}

ErgodicReport run_time_average(const ErgodicConfig& config, const TestFunction& tf,
                               const CEstimate* c_precomputed) {
  config.validate();
  const double z_time = std::min(config.T, config.z_time_cap);

  SimConfig sc;
  sc.seed = config.seed;
  sc.replica = config.replica;
  sc.horizon = config.T;
  sc.checkpoints = SimConfig::uniform_checkpoints(config.T, config.dt_avg);
  sc.law = config.law;
  sc.max_nodes = config.max_nodes;
  if (config.prune_gap > 0.0 && config.T > z_time) {
    sc.prune_gap = config.prune_gap;
    sc.prune_after = z_time;
  }
  const GenealogyForest forest = simulate(sc);

  std::vector<double> times, values;
  times.reserve(sc.checkpoints.size() + 1);
  values.reserve(sc.checkpoints.size() + 1);
  times.push_back(0.0);
  values.push_back(1.0);  // limit of the functional at t -> 0+
  for (double s : sc.checkpoints) {
    times.push_back(s);
    values.push_back(laplace_functional(extremal_process(forest, s), tf));
  }

  ErgodicReport rep;
  rep.tf_id = tf.id();
  rep.T = config.T;
  rep.epsilon = config.epsilon;
  rep.dt_avg = config.dt_avg;
  rep.avg = time_average(times, values, config.epsilon);
  rep.z_time = z_time;
  const MartingalePair mart = martingales(forest, z_time);
  rep.Y_estimate = mart.Y;
  rep.Z_estimate = mart.Z;
  rep.z_degenerate = !(mart.Z > 0.0);
  rep.C = c_precomputed ? *c_precomputed : compute_C_kpp(tf, config.kpp_r, 28.0, config.law);
  rep.analytic_value = std::exp(-rep.C.value * rep.Z_estimate);
  rep.abs_gap = std::fabs(rep.avg.value - rep.analytic_value);
  rep.seed = config.seed;
  rep.replica = config.replica;
  rep.total_nodes = forest.size();
  rep.pruned_nodes = forest.pruned_count();
  return rep;
}

SpaceAverageReport run_space_average(const ErgodicConfig& base, const TestFunction& tf,
                                     std::size_t n_replicas, double t,
                                     const CEstimate* c_precomputed, int threads) {
  base.validate();
  if (!(t > 0.0)) throw DomainError("space average: t must be > 0");
  if (n_replicas < 2) throw UsageError("space average: need at least 2 replicas");

  SpaceAverageReport rep;
  rep.tf_id = tf.id();
  rep.t = t;
  rep.n_replicas = n_replicas;
  rep.C = c_precomputed ? *c_precomputed : compute_C_kpp(tf, base.kpp_r, 28.0, base.law);

  std::vector<double> phi(n_replicas), analytic(n_replicas);
  std::vector<char> degenerate(n_replicas, 0);
  parallel_for(n_replicas, threads, [&](std::size_t i) {
    SimConfig sc;
    sc.seed = base.seed;
    sc.replica = base.replica + i;
    sc.horizon = t;
    sc.checkpoints = {t};
    sc.law = base.law;
    sc.max_nodes = base.max_nodes;
    const GenealogyForest forest = simulate(sc);
    phi[i] = laplace_functional(extremal_process(forest, t), tf);
    const MartingalePair mart = martingales(forest, t);
    analytic[i] = std::exp(-rep.C.value * mart.Z);
    degenerate[i] = mart.Z > 0.0 ? 0 : 1;
  });

  RunningStats sp, sa;
  for (std::size_t i = 0; i < n_replicas; ++i) {
    sp.add(phi[i]);
    sa.add(analytic[i]);
    rep.n_degenerate += degenerate[i];
  }
  rep.laplace = {sp.mean(), sp.se(), sp.count()};
  rep.analytic = {sa.mean(), sa.se(), sa.count()};
  rep.gap = std::fabs(rep.laplace.value - rep.analytic.value);
  rep.combined_se = std::sqrt(rep.laplace.se * rep.laplace.se +
                              rep.analytic.se * rep.analytic.se);
  return rep;
}

GumbelFit fit_gumbel_cdf(const std::vector<double>& x, const std::vector<double>& g) {
  if (x.size() != g.size()) throw UsageError("fit_gumbel_cdf: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (g[i] > 0.05 && g[i] < 0.95) {
      xs.push_back(x[i]);
      ys.push_back(std::log(-std::log(g[i])));
    }
  }
  if (xs.size() < 2) {
    throw GridError("fit_gumbel_cdf: only " + std::to_string(xs.size()) +
                    " grid points with G in (0.05, 0.95); widen the x grid");
  }
  const LineFit fit = fit_line(xs, ys);
  GumbelFit out;
  out.lambda = -fit.slope;
  out.a = std::exp(fit.intercept);
  out.r_squared = fit.r_squared;
  out.n_points = xs.size();
  return out;
}

GumbelReport run_gumbel(const ErgodicConfig& base, const std::vector<double>& x_grid,
                        const std::vector<std::uint64_t>& seeds, int threads) {
  base.validate();
  if (x_grid.size() < 4) throw UsageError("run_gumbel: need at least 4 grid points");
  for (std::size_t i = 1; i < x_grid.size(); ++i) {
    if (!(x_grid[i] > x_grid[i - 1])) {
      throw UsageError("run_gumbel: x grid must be strictly increasing");
    }
  }
  if (seeds.empty()) throw UsageError("run_gumbel: no seeds");

  GumbelReport rep;
  rep.T = base.T;
  rep.x_grid = x_grid;
  rep.c_max = compute_C_max(base.kpp_r, 28.0, base.law);
  rep.per_seed.resize(seeds.size());
  const double z_time = std::min(base.T, base.z_time_cap);

  parallel_for(seeds.size(), threads, [&](std::size_t si) {
    SimConfig sc;
    sc.seed = seeds[si];
    sc.replica = base.replica;
    sc.horizon = base.T;
    sc.checkpoints = SimConfig::uniform_checkpoints(base.T, base.dt_avg);
    sc.law = base.law;
    sc.max_nodes = base.max_nodes;
    if (base.prune_gap > 0.0 && base.T > z_time) {
      sc.prune_gap = base.prune_gap;
      sc.prune_after = z_time;
    }
    const GenealogyForest forest = simulate(sc);

    const auto& cks = forest.checkpoint_times();
    std::vector<double> times(cks.begin(), cks.end());
    std::vector<double> recentred(times.size());
    recentred[0] = -kInf;  // single particle, far below any threshold
    for (std::size_t k = 1; k < times.size(); ++k) {
      recentred[k] = forest.checkpoint_max(static_cast<int>(k)) - recenter_m(times[k]);
    }

    GumbelSeedResult res;
    res.seed = seeds[si];
    res.g_values.reserve(x_grid.size());
    std::vector<double> vals(times.size());
    for (double x : x_grid) {
      for (std::size_t k = 0; k < times.size(); ++k) {
        vals[k] = recentred[k] <= x ? 1.0 : 0.0;
      }
      res.g_values.push_back(time_average(times, vals, base.epsilon).value);
    }
    try {
      res.fit = fit_gumbel_cdf(x_grid, res.g_values);
      res.fit_valid = true;
    } catch (const GridError&) {
      res.fit_valid = false;
    }
    const MartingalePair mart = martingales(forest, z_time);
    res.z_estimate = mart.Z;
    res.z_degenerate = !(mart.Z > 0.0);
    rep.per_seed[si] = std::move(res);
  });

  std::vector<double> cz, a_hat;
  for (const auto& s : rep.per_seed) {
    if (s.z_degenerate) ++rep.n_degenerate;
    if (!s.fit_valid) continue;
    if (std::fabs(s.fit.lambda / kSqrt2 - 1.0) <= rep.lambda_tol) ++rep.n_lambda_ok;
    if (!s.z_degenerate) {
      cz.push_back(rep.c_max.value * s.z_estimate);
      a_hat.push_back(s.fit.a);
    }
  }
  if (cz.size() >= 3) {
    try {
      rep.a_on_cz = fit_line(cz, a_hat);
      rep.a_on_cz_valid = true;
    } catch (const UsageError&) {
      rep.a_on_cz_valid = false;
    }
  }
  return rep;
}

void BranchingTimeConfig::validate() const {
  if (!(t >= 1.0)) throw ConfigError("branching time: t must be >= 1");
  if (!(t2 > t)) throw ConfigError("branching time: t2 must exceed t");
  if (!(window_lo < window_hi)) throw ConfigError("branching time: empty window");
  if (r_list.empty()) throw ConfigError("branching time: empty r list");
  for (std::size_t i = 0; i < r_list.size(); ++i) {
    if (!(r_list[i] > 0.0)) throw ConfigError("branching time: r values must be > 0");
    if (i > 0 && !(r_list[i] > r_list[i - 1])) {
      throw ConfigError("branching time: r list must be strictly increasing");
    }
  }
  const double r_max = r_list.back();
  if (!(t > 3.0 * r_max)) {
    throw DomainError("branching time: regime needs t > 3 max(r), got t = " +
                      std::to_string(t) + ", max(r) = " + std::to_string(r_max));
  }
  if (!(t2 > t + r_max)) {
    throw DomainError("branching time: regime needs t2 > t + max(r)");
  }
  if (n_replicas < 10) throw ConfigError("branching time: need at least 10 replicas");
  if (!(grid_dt > 0.0)) throw ConfigError("branching time: grid_dt must be > 0");
  if (!divides(grid_dt, t) || !divides(grid_dt, t2)) {
    throw ConfigError("branching time: grid_dt must divide both t and t2");
  }
  if (prune_gap != 0.0 && !(prune_gap >= 8.0)) {
    throw ConfigError("branching time: prune_gap must be 0 or >= 8");
  }
}

BranchingTimeReport run_branching_time(const BranchingTimeConfig& config, int threads) {
  config.validate();

  std::vector<double> checkpoints = SimConfig::uniform_checkpoints(config.t2, config.grid_dt);

  std::vector<double> best(config.n_replicas, -kInf);
  std::vector<char> empty_flag(config.n_replicas, 0);
  parallel_for(config.n_replicas, threads, [&](std::size_t i) {
    SimConfig sc;
    sc.seed = config.seed;
    sc.replica = i;
    sc.horizon = config.t2;
    sc.checkpoints = checkpoints;
    sc.law = config.law;
    sc.prune_gap = config.prune_gap;
    sc.prune_after = 0.0;  // prune from the start: only the front matters here
    sc.max_nodes = config.max_nodes;
    const GenealogyForest forest = simulate(sc);
    const auto s1 = sigma_I(forest, config.t, config.window_lo, config.window_hi);
    const auto s2 = sigma_I(forest, config.t2, config.window_lo, config.window_hi);
    if (s1.empty() || s2.empty()) {
      empty_flag[i] = 1;
      return;
    }
    double m = -kInf;
    for (std::uint32_t v : s1) {
      for (std::uint32_t w : s2) {
        m = std::max(m, forest.branching_time(v, config.t, w, config.t2));
      }
    }
    best[i] = m;
  });

  BranchingTimeReport rep;
  rep.t = config.t;
  rep.t2 = config.t2;
  rep.window_lo = config.window_lo;
  rep.window_hi = config.window_hi;
  rep.n_replicas = config.n_replicas;
  for (char e : empty_flag) rep.n_empty += e;
  rep.n_effective = config.n_replicas - rep.n_empty;
  if (rep.n_effective == 0) {
    throw DomainError("branching time: no replica had both windows occupied; widen them");
  }

  std::vector<double> x03, x05, lf;
  for (double r : config.r_list) {
    BranchingTimeRow row;
    row.r = r;
    for (std::size_t i = 0; i < config.n_replicas; ++i) {
      if (!empty_flag[i] && best[i] >= r) ++row.count;
    }
    row.freq = static_cast<double>(row.count) / static_cast<double>(rep.n_effective);
    row.ci = wilson_interval(row.count, rep.n_effective);
    if (row.count > 0) {
      x03.push_back(std::pow(r, 0.3));
      x05.push_back(std::pow(r, 0.5));
      lf.push_back(std::log(row.freq));
    }
    rep.rows.push_back(row);
  }
  if (lf.size() >= 3) {
    rep.decay_k03 = fit_line(x03, lf);
    rep.decay_k05 = fit_line(x05, lf);
    rep.decay_valid = true;
  }
  return rep;
}

void DecompositionConfig::validate() const {
  if (!(T >= 4.0)) throw ConfigError("decomposition: T must be >= 4");
  if (n_outer < 8) throw UsageError("decomposition: need at least 8 outer replicas");
  if (n_inner < 16) {
    throw UsageError("decomposition: precision refusal, n_inner >= 16 required to "
                     "resolve the conditional mean");
  }
  if (!(grid_dt > 0.0) || !divides(grid_dt, T)) {
    throw ConfigError("decomposition: grid_dt must divide T");
  }
  if (prune_gap != 0.0 && !(prune_gap >= 8.0)) {
    throw ConfigError("decomposition: prune_gap must be 0 or >= 8");
  }
}

CorrelationDiagnostic run_decomposition_diagnostics(const DecompositionConfig& config,
                                                    const TestFunction& tf, int threads) {
  config.validate();
  const double R_T = std::pow(config.T, 0.4);

  std::vector<double> checkpoints = SimConfig::uniform_checkpoints(config.T, config.grid_dt);
  bool have_rt = false;
  for (double c : checkpoints) {
    if (std::fabs(c - R_T) < 1e-9) have_rt = true;
  }
  if (!have_rt) {
    checkpoints.push_back(R_T);
    std::sort(checkpoints.begin(), checkpoints.end());
  }
  std::vector<double> inner_cks, s_grid;
  for (double c : checkpoints) {
    if (c > R_T + 1e-12) {
      inner_cks.push_back(c);
      s_grid.push_back(c);
    }
  }
  if (s_grid.size() < 4) throw ConfigError("decomposition: grid too coarse beyond R_T");

  std::size_t n_far = 0, n_near = 0;
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    for (std::size_t l = k + 1; l < s_grid.size(); ++l) {
      (s_grid[l] - s_grid[k] >= R_T ? n_far : n_near) += 1;
    }
  }
  if (n_far == 0) throw DomainError("decomposition: T too small, no pairs |s - s'| >= R_T");
  if (n_near == 0) throw DomainError("decomposition: grid too coarse, no near pairs");

  std::vector<double> far_avg(config.n_outer), near_avg(config.n_outer);
  std::vector<double> max_y(config.n_outer, 0.0);
  parallel_for(config.n_outer, threads, [&](std::size_t o) {
    SimConfig sc;
    sc.seed = config.seed;
    sc.replica = o;
    sc.horizon = config.T;
    sc.checkpoints = checkpoints;
    sc.law = config.law;
    sc.max_nodes = config.max_nodes;
    if (config.prune_gap > 0.0) {
      sc.prune_gap = config.prune_gap;
      sc.prune_after = R_T;  // the state at the freeze time stays exact
    }
    const GenealogyForest outer = simulate(sc);
    const int ck_rt = outer.checkpoint_index(R_T);
    const auto frozen = outer.alive_at(ck_rt);

    std::vector<double> phi_outer(s_grid.size());
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      phi_outer[k] = laplace_functional(extremal_process(outer, s_grid[k]), tf);
    }

    std::vector<double> acc(s_grid.size(), 0.0);
    const std::uint64_t otag = derive_stream(derive_stream(config.seed, kDecompTag), o);
    for (std::size_t j = 0; j < config.n_inner; ++j) {
      const std::uint64_t jtag = derive_stream(otag, j);
      std::vector<InitialParticle> init;
      init.reserve(frozen.size());
      for (std::size_t p = 0; p < frozen.size(); ++p) {
        init.push_back({outer.position(frozen[p], ck_rt), derive_stream(jtag, p)});
      }
      SimConfig ic = sc;
      ic.start_time = R_T;
      ic.checkpoints = inner_cks;
      const GenealogyForest regrown = simulate_from(ic, init);
      for (std::size_t k = 0; k < s_grid.size(); ++k) {
        acc[k] += laplace_functional(extremal_process(regrown, s_grid[k]), tf);
      }
    }

    std::vector<double> y(s_grid.size());
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      y[k] = phi_outer[k] - acc[k] / static_cast<double>(config.n_inner);
      max_y[o] = std::max(max_y[o], std::fabs(y[k]));
    }
    double far_sum = 0.0, near_sum = 0.0;
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      for (std::size_t l = k + 1; l < s_grid.size(); ++l) {
        const double prod = y[k] * y[l];
        if (s_grid[l] - s_grid[k] >= R_T) {
          far_sum += prod;
        } else {
          near_sum += prod;
        }
      }
    }
    far_avg[o] = far_sum / static_cast<double>(n_far);
    near_avg[o] = near_sum / static_cast<double>(n_near);
  });

  CorrelationDiagnostic rep;
  rep.T = config.T;
  rep.R_T = R_T;
  rep.n_outer = config.n_outer;
  rep.n_inner = config.n_inner;
  rep.s_grid = s_grid;
  RunningStats sf, sn;
  for (std::size_t o = 0; o < config.n_outer; ++o) {
    sf.add(far_avg[o]);
    sn.add(near_avg[o]);
    rep.max_abs_y = std::max(rep.max_abs_y, max_y[o]);
  }
  rep.far_product = {sf.mean(), sf.se(), n_far};
  rep.near_product = {sn.mean(), sn.se(), n_near};
  return rep;
}

}  // namespace bbm
