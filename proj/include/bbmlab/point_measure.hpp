#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "bbmlab/errors.hpp"

namespace bbm {

// Finite point measure on the line: a bag of atom locations.  Multiplicity is
// represented by repetition; no ordering is guaranteed or relied upon.
struct PointMeasure {
  std::vector<double> atoms;

  PointMeasure() = default;
  explicit PointMeasure(std::vector<double> a) : atoms(std::move(a)) {}

  std::size_t size() const { return atoms.size(); }
  bool empty() const { return atoms.empty(); }

  double max() const {
    if (atoms.empty()) throw LookupError("point measure: max of empty measure");
    return *std::max_element(atoms.begin(), atoms.end());
  }

  double min() const {
    if (atoms.empty()) throw LookupError("point measure: min of empty measure");
    return *std::min_element(atoms.begin(), atoms.end());
  }

  // Number of atoms in the closed interval [lo, hi].
  std::size_t count_in(double lo, double hi) const {
    std::size_t n = 0;
    for (double a : atoms) {
      if (a >= lo && a <= hi) ++n;
    }
    return n;
  }

  PointMeasure shifted(double dx) const {
    PointMeasure out;
    out.atoms.reserve(atoms.size());
    for (double a : atoms) out.atoms.push_back(a + dx);
    return out;
  }
};

}  // namespace bbm
