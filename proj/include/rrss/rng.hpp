#pragma once

// Reproducible random streams.
//
// Generator "rrss-rng v1": std::mt19937_64 (bit-exact by the C++ standard)
// feeding hand-rolled transforms, so results do not depend on the standard
// library's distribution implementations.
//   uniform01 : (next() >> 11) * 2^-53, in [0, 1)
//   normal    : Marsaglia polar method, pairs cached
//   sign      : top bit of next() -> +1 / -1

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

namespace rrss {

enum class SeedPurpose : std::uint64_t {
  Matrix = 0,
  Init = 1,
  Sign = 2,
};

/// Per-purpose seed derived from a master seed by a fixed offset.
inline std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose) {
  return master + static_cast<std::uint64_t>(purpose);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (cached_) {
      double v = *cached_;
      cached_.reset();
      return v;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    cached_ = v * f;
    return u * f;
  }

  double sign() { return (engine_() >> 63) ? -1.0 : 1.0; }

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_;
};

}  // namespace rrss
