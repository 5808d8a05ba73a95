#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace bbm {

// Test function for Laplace functionals: a nonnegative continuous piecewise
// linear bump given by knots, together with a right cutoff level delta.
//
// The pair (f, delta) stands for the extended function
//
//     f_delta(y) = f(y)  for y <= delta,   +infinity  for y > delta,
//
// so exp(-integral of f_delta against a point measure) is exp(-sum f(atom))
// when every atom is <= delta and exactly 0 as soon as one atom exceeds
// delta.  delta = +infinity disables the cutoff.
//
// Knot x's must be strictly increasing, values finite and >= 0, and the first
// and last value must be 0 so f is continuous with compact support.  f is 0
// outside the knot range.  An all-zero knot list is the legal "pure cutoff"
// function f == 0.
class TestFunction {
 public:
  using Knot = std::pair<double, double>;  // (x, f(x))

  TestFunction(std::vector<Knot> knots, double delta, std::string id = "custom");

  double operator()(double y) const;

  const std::string& id() const { return id_; }
  double delta() const { return delta_; }
  const std::vector<Knot>& knots() const { return knots_; }

  bool is_zero() const { return zero_; }

  // Infimum of supp f, +infinity when f == 0.  The left end of the region a
  // single atom can be "seen" through f alone (the cutoff sees everything
  // above delta regardless).
  double inf_support() const { return inf_support_; }
  // Supremum of supp f, -infinity when f == 0.
  double sup_support() const { return sup_support_; }

  double max_value() const { return max_value_; }

  // Named members of the fixed library shipped with the project (also stored
  // under data/tf_library.json): "zero", "window05", "bump1", "bump1_plus",
  // "bump2".  Unknown names throw LookupError.
  static TestFunction library(const std::string& name);
  static std::vector<std::string> library_names();

 private:
  std::vector<Knot> knots_;
  double delta_;
  std::string id_;
  bool zero_ = true;
  double inf_support_ = std::numeric_limits<double>::infinity();
  double sup_support_ = -std::numeric_limits<double>::infinity();
  double max_value_ = 0.0;
};

}  // namespace bbm
