#include "bbmlab/test_function.hpp"

#include <algorithm>
#include <cmath>

#include "bbmlab/errors.hpp"

namespace bbm {

TestFunction::TestFunction(std::vector<Knot> knots, double delta, std::string id)
    : knots_(std::move(knots)), delta_(delta), id_(std::move(id)) {
  if (knots_.size() < 2) throw ConfigError("test function: need at least 2 knots");
  if (std::isnan(delta_)) throw ConfigError("test function: delta is NaN");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const auto& [x, y] = knots_[i];
    if (!std::isfinite(x)) throw ConfigError("test function: knot x must be finite");
    if (!(y >= 0.0) || !std::isfinite(y)) {
      throw ConfigError("test function: knot values must be finite and >= 0");
    }
    if (i > 0 && !(x > knots_[i - 1].first)) {
      throw ConfigError("test function: knot x values must be strictly increasing");
    }
  }
  if (knots_.front().second != 0.0 || knots_.back().second != 0.0) {
    throw ConfigError("test function: first and last knot value must be 0");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (knots_[i].second > 0.0) {
      zero_ = false;
      // support starts where the ramp up from the previous zero knot begins
      if (inf_support_ == std::numeric_limits<double>::infinity()) {
        inf_support_ = knots_[i - 1].first;
      }
      sup_support_ = knots_[std::min(i + 1, knots_.size() - 1)].first;
      max_value_ = std::max(max_value_, knots_[i].second);
    }
  }
}

double TestFunction::operator()(double y) const {
  if (zero_) return 0.0;
  if (y <= knots_.front().first || y >= knots_.back().first) return 0.0;
  // first knot strictly to the right of y
  auto it = std::upper_bound(knots_.begin(), knots_.end(), y,
                             [](double v, const Knot& k) { return v < k.first; });
  const auto& [x1, y1] = *it;
  const auto& [x0, y0] = *(it - 1);
  const double w = (y - x0) / (x1 - x0);
  return y0 + w * (y1 - y0);
}

TestFunction TestFunction::library(const std::string& name) {
  const double inf = std::numeric_limits<double>::infinity();
  if (name == "zero") {
    return TestFunction({{-1.0, 0.0}, {1.0, 0.0}}, inf, "zero");
  }
  if (name == "window05") {
    // pure cutoff at 0.5: the functional is the indicator {max atom <= 0.5}
    return TestFunction({{-1.0, 0.0}, {1.0, 0.0}}, 0.5, "window05");
  }
  if (name == "bump1") {
    // reference bump: triangle on [-2, 1] peaking at (-0.5, 0.8), cutoff 1
    return TestFunction({{-2.0, 0.0}, {-0.5, 0.8}, {1.0, 0.0}}, 1.0, "bump1");
  }
  if (name == "bump1_plus") {
    // pointwise >= bump1 with the same support and cutoff; monotonicity probes
    return TestFunction({{-2.0, 0.0}, {-0.5, 1.2}, {1.0, 0.0}}, 1.0, "bump1_plus");
  }
  if (name == "bump2") {
    // wider plateau bump sitting deeper below the front, softer cutoff
    return TestFunction({{-3.0, 0.0}, {-2.0, 0.5}, {-1.0, 0.5}, {0.0, 0.0}}, 2.0, "bump2");
  }
  throw LookupError("test function library: unknown name '" + name + "'");
}

std::vector<std::string> TestFunction::library_names() {
  return {"zero", "window05", "bump1", "bump1_plus", "bump2"};
}

}  // namespace bbm
