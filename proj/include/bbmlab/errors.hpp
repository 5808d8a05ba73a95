#pragma once

#include <stdexcept>
#include <string>

namespace bbm {

// Error taxonomy used across the library.  The CLI maps ConfigError to exit
// code 2 and ResourceError to exit code 3; everything else is a plain failure.

// Invalid configuration: bad flag values, malformed config files, violated
// config invariants (non-increasing checkpoint grid, prune gap too small, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mathematical precondition violated on otherwise well-formed input
// (t outside a node's lifespan, nonpositive horizon, regime bounds).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unknown id or key: node id out of range, t not on the checkpoint grid.
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: mismatched argument sizes, nodes from a different forest,
// too few samples where the estimator is meaningless.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hard resource cap hit: node arena limit, rejection-sampling budget.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical scheme left its trust region (non-finite values, out-of-range
// solution); carries a diagnostic of where it happened.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quadrature or fit domain too small: integrand not decayed at the grid
// edge, too few usable points.  The fix is a wider grid, hence the name.
struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bbm
