#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "bbmlab/branching_law.hpp"
#include "bbmlab/point_measure.hpp"
#include "bbmlab/stats_util.hpp"
#include "bbmlab/test_function.hpp"

namespace bbm {

// One accepted decoration cluster: the population at the source horizon seen
// from its own maximum.  Atoms are sorted descending, so atoms[0] == 0 exactly
// and everything else is <= 0.
struct ClusterSample {
  PointMeasure atoms;
  double source_horizon = 0.0;
  double truncated_at = 0.0;  // depth cut applied at sampling; +inf if none
  std::uint64_t attempts = 0;  // rejection trials this sample consumed
};

// Rejection sampler for the decoration law: run the branching cloud to t_D and
// accept when the maximum beats sqrt2 t_D.  Acceptance decays in t_D, so the
// attempt budget is capped at 1e6 (ResourceError beyond).  t_D < 4 is refused:
// the conditioned cloud is still far from its limit shape there.  Atoms deeper
// than max_depth below the maximum are dropped when max_depth is finite.
ClusterSample sample_cluster(double t_d, const BranchingLaw& law, std::uint64_t seed,
                             std::uint64_t index = 0,
                             double max_depth = std::numeric_limits<double>::infinity());

// n independent clusters under one seed, indices 0..n-1.
std::vector<ClusterSample> sample_cluster_pool(
    std::size_t n, double t_d, const BranchingLaw& law, std::uint64_t seed,
    double max_depth = std::numeric_limits<double>::infinity());

// Backbone of cluster positions: the atoms of a Poisson process with intensity
// C Z sqrt2 exp(-sqrt2 x) dx restricted to (left_cutoff, infinity), realised
// as N ~ Poisson(C Z exp(-sqrt2 left_cutoff)) points left_cutoff + Exp(sqrt2).
struct BackboneSample {
  std::vector<double> positions;
  double C = 0.0;
  double Z = 0.0;
  double left_cutoff = 0.0;
  double mean = 0.0;  // the Poisson mean actually used
};

BackboneSample sample_poisson_backbone(double C, double Z, double left_cutoff,
                                       std::uint64_t seed, std::uint64_t index = 0);

// A realisation of the decorated measure E_Z below the cutoff: every backbone
// point carries one cluster, shifted to sit at that point.
struct EZSample {
  BackboneSample backbone;
  PointMeasure flattened;  // all backbone + decoration atoms
};

// decorations[i] decorates backbone.positions[i]; sizes must match.
EZSample assemble_EZ(const BackboneSample& backbone,
                     const std::vector<const ClusterSample*>& decorations);

// Empirical Laplace functional of assembled E_Z samples against f with its
// delta cutoff.  Every sample's left_cutoff must sit at or below
// min(inf supp f, delta); atoms below that point cannot register, so a higher
// cutoff would silently bias the estimate (DomainError instead).
MeanSE laplace_EZ_empirical(const std::vector<EZSample>& samples, const TestFunction& tf);

// exp(-C Z I), the exact Laplace functional of the decorated Poisson measure
// whose per-cluster integral (see C_from_clusters) is I.
double laplace_EZ_analytic(double C, double Z, double cluster_integral);

// Cluster-route integral
//
//     I(f, delta) = sqrt2 Int e^{-sqrt2 p} E[ 1 - 1{p <= delta}
//                      exp(-sum_j f(p + d_j)) ] dp
//
// over a pool of sampled clusters {d_j}.  The bracket vanishes identically
// below min(inf supp f, delta) and equals 1 above delta, so the integral
// splits into an exact tail exp(-sqrt2 delta) plus a Monte Carlo part on the
// window in between, estimated per cluster (value and standard error are the
// pool mean and SE of the per-cluster integrals).  Multiplying by a backbone
// intensity C gives that backbone's effective constant for (f, delta).
struct ClusterIntegral {
  double value = 0.0;
  double se = 0.0;
  double tail = 0.0;   // analytic part exp(-sqrt2 delta); 0 if delta = +inf
  double mc_lo = 0.0;  // quadrature window of the Monte Carlo part
  double mc_hi = 0.0;
  std::size_t n_clusters = 0;
};

// Needs at least 1000 clusters (UsageError below that: the SE would not be
// worth reporting).  Pools truncated too shallow for (f, delta) are refused,
// and a delta = +inf request with a nonzero f needs an untruncated pool.
ClusterIntegral C_from_clusters(const TestFunction& tf,
                                const std::vector<ClusterSample>& pool,
                                double quad_step = 0.01);

}  // namespace bbm
