#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "rsak/numerics/matrix.hpp"

namespace rsak {

/**
 * xoshiro256** generator seeded through splitmix64.
 *
 * Every draw is defined by integer arithmetic and IEEE double operations, so a
 * seed produces the same stream on every platform. `child(name)` derives an
 * independent sub-stream keyed by a string, which is how each tensor gets an
 * initialization that does not depend on the order tensors are created in.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  Rng child(std::string_view name) const;
  Rng child(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_normal_;
};

/// rows×cols matrix of normal(0, stddev) draws. stddev = 0 gives exact zeros.
Matrix rng_normal(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

}  // namespace rsak
