#pragma once

#include <cmath>
#include <cstdint>

#include "bbmlab/errors.hpp"

namespace bbm {

// Deterministic random streams.
//
// Every particle in a simulation owns an independent stream whose 64-bit key
// is derived by hashing (parent key, child slot), with the root key derived
// from (seed, replica index).  Two runs with the same config are bit
// identical, and a particle keeps the same draws whether or not unrelated
// parts of the tree are pruned, which is what makes paired pruned/unpruned
// comparisons on one seed meaningful.
//
// Generator: xoshiro256++ seeded through a splitmix64 expansion of the key.
// Distributions are implemented here rather than taken from <random> because
// the standard leaves normal_distribution's draw sequence unspecified.

// Fibonacci hashing constant, also splitmix64's increment.
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer: bijective avalanche on 64 bits.
inline constexpr std::uint64_t avalanche(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Key for a child stream.  Used for (seed, replica), (parent, slot) and any
// other hierarchical derivation; slot 0 is reserved for the node itself.
inline constexpr std::uint64_t derive_stream(std::uint64_t key, std::uint64_t slot) {
  return avalanche((key + kGolden) ^ avalanche(slot + kGolden));
}

class Rng {
 public:
  explicit Rng(std::uint64_t key) {
    // splitmix64 sequence seeds the four xoshiro words
    std::uint64_t z = key;
    for (auto& w : s_) {
      z += kGolden;
      w = avalanche(z);
    }
    // all-zero state is the one forbidden xoshiro state
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = kGolden;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); never returns 0, safe under log().
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the sine partner is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw DomainError("exponential: rate must be > 0");
    return -std::log(uniform()) / rate;
  }

  // Poisson count: Knuth inversion below mean 10, Hormann's PTRS transformed
  // rejection above it (exact, no normal approximation).
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
      throw DomainError("poisson: mean must be finite and >= 0");
    }
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      std::uint64_t n = 0;
      double prod = uniform();
      while (prod > limit) {
        ++n;
        prod *= uniform();
      }
      return n;
    }
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          -mean + kf * loglam - std::lgamma(kf + 1.0)) {
        return static_cast<std::uint64_t>(kf);
      }
    }
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bbm
