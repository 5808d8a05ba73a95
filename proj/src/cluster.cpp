#include "bbmlab/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "bbmlab/errors.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/stats_util.hpp"

namespace bbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kClusterBudget = 1'000'000;
// Domain tags keep cluster / backbone streams disjoint from plain simulate().
constexpr std::uint64_t kClusterTag = 0xc1a5;
constexpr std::uint64_t kBackboneTag = 0xbb01;
constexpr std::uint64_t kPoissonMeanCap = 100'000'000;

// sum_j f(p + d_j) over the atoms that can see the support of f.  Atoms are
// sorted descending, so the relevant block [a - p, b - p] is contiguous.
double decorated_sum(const TestFunction& tf, const std::vector<double>& atoms, double p) {
  const double lo = tf.inf_support() - p;
  const double hi = tf.sup_support() - p;
  auto first = std::lower_bound(atoms.begin(), atoms.end(), hi,
                                [](double atom, double v) { return atom > v; });
  double s = 0.0;
  for (auto it = first; it != atoms.end() && *it >= lo; ++it) s += tf(p + *it);
  return s;
}

}  // namespace

ClusterSample sample_cluster(double t_d, const BranchingLaw& law, std::uint64_t seed,
                             std::uint64_t index, double max_depth) {
  if (!(t_d >= 4.0)) {
    throw DomainError("cluster: source horizon t_D must be >= 4, got " +
                      std::to_string(t_d));
  }
  if (!(max_depth > 0.0)) throw DomainError("cluster: max_depth must be > 0");

  SimConfig cfg;
  cfg.seed = derive_stream(derive_stream(seed, kClusterTag), index);
  cfg.horizon = t_d;
  cfg.checkpoints = {t_d};
  cfg.law = law;
  const double threshold = kSqrt2 * t_d;

  for (std::uint64_t attempt = 0; attempt < kClusterBudget; ++attempt) {
    cfg.replica = attempt;
    const GenealogyForest forest = simulate(cfg);
    const PointMeasure cloud = forest.alive_positions(t_d);
    const double mx = cloud.max();
    if (!(mx > threshold)) continue;

    ClusterSample out;
    out.source_horizon = t_d;
    out.truncated_at = max_depth;
    out.attempts = attempt + 1;
    out.atoms.atoms.reserve(cloud.size());
    for (double a : cloud.atoms) {
      const double d = a - mx;
      if (d >= -max_depth) out.atoms.atoms.push_back(d);
    }
    std::sort(out.atoms.atoms.begin(), out.atoms.atoms.end(), std::greater<>());
    return out;
  }
  throw ResourceError("cluster: no acceptance in " + std::to_string(kClusterBudget) +
                      " attempts at t_D = " + std::to_string(t_d));
}

std::vector<ClusterSample> sample_cluster_pool(std::size_t n, double t_d,
                                               const BranchingLaw& law,
                                               std::uint64_t seed, double max_depth) {
  std::vector<ClusterSample> pool;
  pool.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    pool.push_back(sample_cluster(t_d, law, seed, j, max_depth));
  }
  return pool;
}

BackboneSample sample_poisson_backbone(double C, double Z, double left_cutoff,
                                       std::uint64_t seed, std::uint64_t index) {
  if (!(C > 0.0) || !std::isfinite(C)) throw DomainError("backbone: C must be finite > 0");
  if (!(Z > 0.0) || !std::isfinite(Z)) {
    throw DomainError("backbone: Z must be finite > 0 (degenerate derivative rejected)");
  }
  if (!std::isfinite(left_cutoff)) throw DomainError("backbone: left_cutoff must be finite");

  BackboneSample out;
  out.C = C;
  out.Z = Z;
  out.left_cutoff = left_cutoff;
  out.mean = C * Z * std::exp(-kSqrt2 * left_cutoff);
  if (!(out.mean < static_cast<double>(kPoissonMeanCap))) {
    throw ResourceError("backbone: Poisson mean " + std::to_string(out.mean) +
                        " exceeds the cap; raise left_cutoff");
  }
  Rng rng(derive_stream(derive_stream(seed, kBackboneTag), index));
  const std::uint64_t n = rng.poisson(out.mean);
  out.positions.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.positions.push_back(left_cutoff + rng.exponential(kSqrt2));
  }
  return out;
}

EZSample assemble_EZ(const BackboneSample& backbone,
                     const std::vector<const ClusterSample*>& decorations) {
  if (decorations.size() != backbone.positions.size()) {
    throw UsageError("assemble_EZ: " + std::to_string(backbone.positions.size()) +
                     " backbone points but " + std::to_string(decorations.size()) +
                     " decorations");
  }
  EZSample out;
  out.backbone = backbone;
  std::size_t total = 0;
  for (const auto* d : decorations) total += d->atoms.size();
  out.flattened.atoms.reserve(total);
  for (std::size_t i = 0; i < decorations.size(); ++i) {
    const double p = backbone.positions[i];
    for (double d : decorations[i]->atoms.atoms) out.flattened.atoms.push_back(p + d);
  }
  return out;
}

MeanSE laplace_EZ_empirical(const std::vector<EZSample>& samples, const TestFunction& tf) {
  if (samples.empty()) throw UsageError("laplace_EZ_empirical: no samples");
  const double needed = std::min(tf.inf_support(), tf.delta());
  RunningStats stats;
  for (const auto& s : samples) {
    if (!(s.backbone.left_cutoff <= needed)) {
      throw DomainError("laplace_EZ_empirical: left_cutoff " +
                        std::to_string(s.backbone.left_cutoff) +
                        " sits above min(inf supp f, delta) = " + std::to_string(needed) +
                        "; the truncated backbone would bias the functional");
    }
    stats.add(laplace_functional(s.flattened, tf));
  }
  return {stats.mean(), stats.se(), stats.count()};
}

double laplace_EZ_analytic(double C, double Z, double cluster_integral) {
  return std::exp(-C * Z * cluster_integral);
}

ClusterIntegral C_from_clusters(const TestFunction& tf,
                                const std::vector<ClusterSample>& pool,
                                double quad_step) {
  if (pool.size() < 1000) {
    throw UsageError("C_from_clusters: need >= 1000 clusters, got " +
                     std::to_string(pool.size()));
  }
  if (!(quad_step > 0.0)) throw DomainError("C_from_clusters: quad_step must be > 0");

  const double delta = tf.delta();
  ClusterIntegral out;
  out.n_clusters = pool.size();

  if (tf.is_zero()) {
    // bracket(p) = 1{p > delta} exactly: no Monte Carlo part at all
    out.tail = std::isfinite(delta) ? std::exp(-kSqrt2 * delta) : 0.0;
    out.value = out.tail;
    out.mc_lo = out.mc_hi = delta;
    return out;
  }

  double shallowest = kInf;  // tightest truncation across the pool
  double deepest = 0.0;      // deepest retained atom
  for (const auto& c : pool) {
    shallowest = std::min(shallowest, c.truncated_at);
    if (!c.atoms.empty()) deepest = std::max(deepest, -c.atoms.atoms.back());
  }

  const double a = tf.inf_support();
  double lo, hi;
  if (std::isfinite(delta)) {
    lo = std::min(a, delta);
    hi = delta;
    out.tail = std::exp(-kSqrt2 * delta);
    // Atoms hidden by the depth cut must not be able to reach supp f from any
    // p in the window: need truncation depth beyond delta - inf supp f.
    if (shallowest < delta - a) {
      throw UsageError("C_from_clusters: pool truncated at depth " +
                       std::to_string(shallowest) + " but the window needs " +
                       std::to_string(delta - a));
    }
  } else {
    if (std::isfinite(shallowest)) {
      throw UsageError("C_from_clusters: delta = +inf needs an untruncated pool");
    }
    lo = a;
    hi = tf.sup_support() + deepest;
    out.tail = 0.0;
  }
  out.mc_lo = lo;
  out.mc_hi = hi;

  if (!(hi > lo)) {
    // f-support entirely above the cutoff: only the exact tail survives
    out.value = out.tail;
    return out;
  }

  // Simpson on [lo, hi] with an even number of intervals near quad_step
  auto half = static_cast<std::size_t>(std::ceil((hi - lo) / (2.0 * quad_step)));
  half = std::max<std::size_t>(half, 4);
  const std::size_t n = 2 * half;
  const double h = (hi - lo) / static_cast<double>(n);

  RunningStats per_cluster;
  double edge_bracket_sum = 0.0;
  std::vector<double> weights(n + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : ((i % 2 == 1) ? 4.0 : 2.0);
    const double p = lo + h * static_cast<double>(i);
    weights[i] = w * kSqrt2 * std::exp(-kSqrt2 * p) * h / 3.0;
  }
  for (const auto& c : pool) {
    double integral = 0.0;
    double edge = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double p = lo + h * static_cast<double>(i);
      const double s = decorated_sum(tf, c.atoms.atoms, p);
      const double bracket = 1.0 - std::exp(-s);
      integral += weights[i] * bracket;
      if (i == n) edge = bracket;
    }
    per_cluster.add(out.tail + integral);
    edge_bracket_sum += edge;
  }
  if (!std::isfinite(delta)) {
    const double edge_mean = edge_bracket_sum / static_cast<double>(pool.size());
    if (!(edge_mean < 1e-6)) {
      throw GridError("C_from_clusters: bracket still " + std::to_string(edge_mean) +
                      " at the upper quadrature edge; the pool is too shallow");
    }
  }
  out.value = per_cluster.mean();
  out.se = per_cluster.se();
  return out;
}

}  // namespace bbm
