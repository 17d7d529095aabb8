#pragma once

// Deterministic PRNG: PCG32 (oneseq variant), fixed constants, integer-only
// state transitions, so identical seeds give bit-identical streams on every
// platform. Doubles take 53 bits from two consecutive 32-bit outputs.
//
//   state' = state * 6364136223846793005 + 1442695040888963407
//   output = rotr32(((state >> 18) ^ state) >> 27, state >> 59)   [pre-step state]
//   seeding: state = seed + INCREMENT, then one step

#include <cstdint>

#include "resdual/tensor.hpp"

namespace resdual {

class Rng {
  public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

    explicit Rng(std::uint64_t seed);

    std::uint32_t next_u32();

    // uniform in [0,1) with 53 random bits
    double next_double();

    // uniform in [lo, hi)
    double uniform(double lo, double hi);

    // flat row-major fill, elements drawn in storage order
    Tensor uniform_tensor(Shape shape, double lo, double hi);

  private:
    std::uint64_t state_;
};

}  // namespace resdual
