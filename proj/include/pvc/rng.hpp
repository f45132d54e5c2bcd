#pragma once

#include <cstdint>

#include "pvc/tensor.hpp"

namespace pvc {

// Counter-based splitmix64 stream. The draw sequence depends only on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller; consumes two uniforms per draw.
  double gaussian(double mean = 0.0, double stddev = 1.0);
  std::size_t below(std::size_t n);

  Tensor gaussian_tensor(Shape shape, double stddev = 1.0);
  Tensor uniform_tensor(Shape shape, double lo, double hi);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace pvc
