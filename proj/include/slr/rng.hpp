#pragma once

#include <array>
#include <cstdint>

#include "slr/tensor.hpp"

namespace slr {

/// xoshiro256** seeded through splitmix64.
///
/// Uniform and normal variates are produced with explicit formulas (53-bit
/// mantissa fill and Box-Muller) rather than <random> distributions, whose
/// output is implementation-defined. The same seed and call sequence yields
/// the same stream on every platform.
class Rng {
 public:
  static constexpr const char *kAlgorithm = "xoshiro256**/splitmix64";

  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for a sub-task, e.g. one dataset example.
  static Rng derived(std::uint64_t seed, std::uint64_t index) { return Rng(seed ^ index); }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Complex normal with independent N(0, sigma^2) real and imaginary parts.
  cplx complex_normal(double sigma = 1.0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::array<std::uint64_t, 4> s_;
  bool has_spare_ = false;
  double spare_ = 0;
};

ComplexTensor random_complex(Rng &rng, Shape shape, double sigma = 1.0);
RealTensor random_real(Rng &rng, Shape shape, double sigma = 1.0);

}  // namespace slr
