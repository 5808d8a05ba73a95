#include "bbmlab/extremal.hpp"

#include <cmath>
#include <string>

#include "bbmlab/errors.hpp"

namespace bbm {

double recenter_m(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError("recenter_m: t must be finite and > 0");
  }
  return kSqrt2 * t - kLogCoef * std::log(t);
}

PointMeasure extremal_process(const GenealogyForest& f, double t) {
  const double m = recenter_m(t);
  PointMeasure mu = f.alive_positions(t);
  for (double& a : mu.atoms) a -= m;
  return mu;
}

std::vector<std::uint32_t> sigma_I(const GenealogyForest& f, double t, double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError("sigma_I: interval must be finite with lo <= hi");
  }
  const double m = recenter_m(t);
  const int ck = f.checkpoint_index(t);
  std::vector<std::uint32_t> out;
  for (std::uint32_t v : f.alive_at(ck)) {
    const double x = f.position(v, ck) - m;
    if (x >= lo && x <= hi) out.push_back(v);
  }
  return out;
}

MartingalePair martingales(const GenealogyForest& f, double t) {
  const int ck = f.checkpoint_index(t);
  MartingalePair out;
  out.pruned = f.pruned_before(ck);
  const PointMeasure mu = f.alive_positions(t);
  const double st = kSqrt2 * t;
  for (double x : mu.atoms) {
    const double depth = st - x;
    const double w = std::exp(-kSqrt2 * depth);
    out.Y += w;
    out.Z += depth * w;
  }
  return out;
}

double envelope_f(double gamma, double t, double s) {
  if (!(gamma > 0.0)) throw DomainError("envelope_f: gamma must be > 0");
  if (!(t > 0.0)) throw DomainError("envelope_f: t must be > 0");
  if (!(s >= 0.0 && s <= t)) throw DomainError("envelope_f: need 0 <= s <= t");
  return (s <= 0.5 * t) ? std::pow(s, gamma) : std::pow(t - s, gamma);
}

double envelope_F(double gamma, double t, double s) {
  return (s / t) * recenter_m(t) - envelope_f(gamma, t, s);
}

bool tube_violation(const GenealogyForest& f, double t, double lo, double hi,
                    double alpha, double beta, double r) {
  if (!(alpha > 0.0 && alpha < 0.5 && beta > 0.5 && beta < 1.0)) {
    throw DomainError("tube_violation: need 0 < alpha < 1/2 < beta < 1");
  }
  if (!(r > 0.0 && r < 0.5 * t)) {
    throw DomainError("tube_violation: need 0 < r < t/2");
  }
  const auto ids = sigma_I(f, t, lo, hi);
  if (ids.empty()) return false;
  const auto& times = f.checkpoint_times();
  for (std::size_t ck = 0; ck < times.size(); ++ck) {
    const double s = times[ck];
    if (!(s > r && s < t - r)) continue;
    const double fa = envelope_F(alpha, t, s);
    const double fb = envelope_F(beta, t, s);
    for (std::uint32_t v : ids) {
      const double x = f.lineage_position(v, static_cast<int>(ck));
      if (x >= fa || x <= fb) return true;
    }
  }
  return false;
}

double laplace_functional(const PointMeasure& mu, const TestFunction& tf) {
  const double delta = tf.delta();
  double sum = 0.0;
  for (double a : mu.atoms) {
    if (a > delta) return 0.0;
    sum += tf(a);
  }
  return std::exp(-sum);
}

TimeAverageResult time_average(const std::vector<double>& times,
                               const std::vector<double>& values, double epsilon) {
  if (times.size() != values.size()) {
    throw UsageError("time_average: times and values differ in length");
  }
  if (times.size() < 2) throw UsageError("time_average: need at least two samples");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw UsageError("time_average: times must be strictly increasing");
    }
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw DomainError("time_average: epsilon must be in (0, 1)");
  }

  const double t0 = times.front();
  const double T = times.back();
  const double split = t0 + epsilon * (T - t0);

  double early = 0.0;
  double late = 0.0;
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double a = times[i];
    const double b = times[i + 1];
    const double va = values[i];
    const double vb = values[i + 1];
    if (b <= split) {
      early += 0.5 * (va + vb) * (b - a);
    } else if (a >= split) {
      late += 0.5 * (va + vb) * (b - a);
    } else {
      // split falls inside this cell: insert an interpolated node
      const double w = (split - a) / (b - a);
      const double vs = va + w * (vb - va);
      early += 0.5 * (va + vs) * (split - a);
      late += 0.5 * (vs + vb) * (b - split);
    }
  }

  TimeAverageResult out;
  out.t_split = split;
  out.early_contrib = early / (T - t0);
  out.late_contrib = late / (T - t0);
  out.value = out.early_contrib + out.late_contrib;
  out.early_avg = (split > t0) ? early / (split - t0) : values.front();
  out.late_avg = (T > split) ? late / (T - split) : values.back();
  return out;
}

}  // namespace bbm
