#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bbmlab/errors.hpp"

namespace bbm {

// Streaming mean/variance accumulator (Welford).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }

  double variance() const {  // unbiased
    if (n_ < 2) return 0.0;
    return m2_ / static_cast<double>(n_ - 1);
  }

  double stddev() const { return std::sqrt(variance()); }

  // Standard error of the mean.
  double se() const {
    if (n_ < 1) return 0.0;
    return stddev() / std::sqrt(static_cast<double>(n_));
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanSE {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval for a binomial proportion (z = 1.96 for 95%).
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96) {
  if (trials == 0) throw UsageError("wilson_interval: zero trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y = slope x + intercept.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw UsageError("fit_line: size mismatch");
  if (x.size() < 2) throw UsageError("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw UsageError("fit_line: x values are all equal");
  LineFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r_squared = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return out;
}

// Least squares for y ~ c0 b0(x) + c1 b1(x) + c2 b2(x) via modified
// Gram-Schmidt QR on the column-scaled design matrix; stable enough to
// recover exact-model synthetic data at 1e-12.
inline std::array<double, 3> fit_three_basis(const std::vector<std::array<double, 3>>& rows,
                                             const std::vector<double>& y) {
  const std::size_t n = rows.size();
  if (y.size() != n) throw UsageError("fit_three_basis: size mismatch");
  if (n < 3) throw UsageError("fit_three_basis: need at least three points");

  // column norms for scaling
  std::array<double, 3> scale{};
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += rows[i][j] * rows[i][j];
    scale[j] = std::sqrt(s);
    if (!(scale[j] > 0.0)) throw UsageError("fit_three_basis: zero basis column");
  }

  std::vector<std::array<double, 3>> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) q[i][j] = rows[i][j] / scale[j];
  }
  double r[3][3] = {};
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += q[i][k] * q[i][j];
      r[k][j] = dot;
      for (std::size_t i = 0; i < n; ++i) q[i][j] -= dot * q[i][k];
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += q[i][j] * q[i][j];
    nrm = std::sqrt(nrm);
    if (!(nrm > 1e-14)) throw UsageError("fit_three_basis: rank-deficient design");
    r[j][j] = nrm;
    for (std::size_t i = 0; i < n; ++i) q[i][j] /= nrm;
  }
  // rhs = Q^T y, then back substitution
  double rhs[3] = {};
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < n; ++i) rhs[j] += q[i][j] * y[i];
  }
  double c[3];
  for (int j = 2; j >= 0; --j) {
    double v = rhs[j];
    for (int k = j + 1; k < 3; ++k) v -= r[j][k] * c[k];
    c[j] = v / r[j][j];
  }
  return {c[0] / scale[0], c[1] / scale[1], c[2] / scale[2]};
}

}  // namespace bbm
