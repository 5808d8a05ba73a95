#pragma once

#include <cstdint>
#include <vector>

#include "bbmlab/forest.hpp"
#include "bbmlab/point_measure.hpp"
#include "bbmlab/test_function.hpp"

namespace bbm {

// Front centering term: sqrt(2) t - (3 / (2 sqrt 2)) log t, t > 0.
double recenter_m(double t);

inline constexpr double kSqrt2 = 1.4142135623730951;
// 3 / (2 sqrt 2), the coefficient of the logarithmic front correction.
inline constexpr double kLogCoef = 1.0606601717798212;

// Particle positions at checkpoint t recentred by m(t).
PointMeasure extremal_process(const GenealogyForest& f, double t);

// Ids of particles whose recentred position lies in [lo, hi] at checkpoint t.
std::vector<std::uint32_t> sigma_I(const GenealogyForest& f, double t, double lo, double hi);

struct MartingalePair {
  double Y = 0.0;  // additive martingale, mean 1
  double Z = 0.0;  // derivative martingale, mean 0
  // State at t is inexact because pruning froze particles at or before t.
  bool pruned = false;
};

// Y(t) = sum exp(-sqrt2 (sqrt2 t - x_v)),  Z(t) = sum (sqrt2 t - x_v) exp(...).
// Uses absolute positions, valid at any checkpoint including start time.
MartingalePair martingales(const GenealogyForest& f, double t);

// Localization envelope f_{gamma,t}: s^gamma on [0, t/2], (t-s)^gamma above.
double envelope_f(double gamma, double t, double s);

// Tube boundary F_{gamma,t}(s) = (s/t) m(t) - f_{gamma,t}(s); F(0) = 0 and
// F(t) = m(t).  For gamma < 1/2 this is the upper boundary, for gamma > 1/2
// the lower one.
double envelope_F(double gamma, double t, double s);

// True when some particle of Sigma_I(t) has a checkpointed ancestral position
// outside the (F_beta, F_alpha) tube at a checkpoint s in the open window
// (r, t - r).  Checkpoint-discrete, so an undercount of the continuous event.
// Requires 0 < alpha < 1/2 < beta < 1 and 0 < r < t/2.
bool tube_violation(const GenealogyForest& f, double t, double lo, double hi,
                    double alpha, double beta, double r);

// exp(-integral of f_delta d mu): 0 if any atom exceeds tf.delta(), otherwise
// exp(-sum f(atom)).  Empty measure gives 1.
double laplace_functional(const PointMeasure& mu, const TestFunction& tf);

struct TimeAverageResult {
  double value = 0.0;    // (1 / (T - t0)) integral over [t0, T], trapezoid
  double t_split = 0.0;  // t0 + epsilon (T - t0)
  double early_avg = 0.0;      // average over [t0, t_split]
  double late_avg = 0.0;       // average over [t_split, T]
  double early_contrib = 0.0;  // contribution to value; the two sum to value
  double late_contrib = 0.0;   //   exactly by construction
};

// Trapezoid time average of a sampled series with an epsilon split of the
// window.  times must be strictly increasing with at least two entries and
// values the same length; 0 < epsilon < 1.  The split point is inserted by
// linear interpolation when it falls inside a cell.
TimeAverageResult time_average(const std::vector<double>& times,
                               const std::vector<double>& values, double epsilon);

}  // namespace bbm
