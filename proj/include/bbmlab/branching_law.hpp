#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "bbmlab/errors.hpp"
#include "bbmlab/rng.hpp"

namespace bbm {

// Offspring law of a branch event: pmf over k = 1, 2, ..., stored from k=1.
//
// The standard constructor enforces the critical normalization (offspring
// mean exactly 2) that every quantitative result here relies on; mass sums to
// 1 within 1e-12 and the mean is 2 within 1e-9 or construction throws.
// single_lineage() is the one sanctioned exception: p1 = 1 turns branch
// events into no-ops so a run degenerates to one plain Brownian path, which
// makes it the oracle law for increment-distribution tests.
class BranchingLaw {
 public:
  explicit BranchingLaw(std::vector<double> pmf) : BranchingLaw(std::move(pmf), true) {}

  // Binary splitting, p2 = 1.  The default everywhere.
  static BranchingLaw binary() { return BranchingLaw({0.0, 1.0}); }

  // Degenerate diagnostic law p1 = 1 (mean 1, exempt from the mean-2 check).
  static BranchingLaw single_lineage() { return BranchingLaw({1.0}, false); }

  std::size_t max_k() const { return pmf_.size(); }

  double pmf(std::size_t k) const {
    return (k >= 1 && k <= pmf_.size()) ? pmf_[k - 1] : 0.0;
  }

  const std::vector<double>& pmf_vector() const { return pmf_; }

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 1; k <= pmf_.size(); ++k) m += static_cast<double>(k) * pmf_[k - 1];
    return m;
  }

  // Second factorial moment sum k(k-1) p_k; finite by construction.
  double k_factorial_moment() const {
    double m = 0.0;
    for (std::size_t k = 1; k <= pmf_.size(); ++k) {
      m += static_cast<double>(k) * static_cast<double>(k - 1) * pmf_[k - 1];
    }
    return m;
  }

  // Offspring count by CDF inversion; support is small, a linear scan is fine.
  std::size_t sample(Rng& rng) const {
    double u = rng.uniform();
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
      u -= pmf_[i];
      if (u <= 0.0) return i + 1;
    }
    return pmf_.size();  // u landed in the rounding slack past the last bin
  }

 private:
  BranchingLaw(std::vector<double> pmf, bool enforce_mean) : pmf_(std::move(pmf)) {
    if (pmf_.empty()) throw ConfigError("offspring law: pmf is empty");
    double sum = 0.0;
    for (double p : pmf_) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ConfigError("offspring law: probabilities must be finite and >= 0");
      }
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
      throw ConfigError("offspring law: probabilities must sum to 1 (got " +
                        std::to_string(sum) + ")");
    }
    if (enforce_mean && std::fabs(mean() - 2.0) > 1e-9) {
      throw ConfigError("offspring law: mean offspring count must be 2 (got " +
                        std::to_string(mean()) + ")");
    }
  }

  std::vector<double> pmf_;
};

}  // namespace bbm
