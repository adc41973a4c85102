#pragma once

#include <cstdint>
#include <string_view>

#include "wesar/matrix.hpp"

namespace wesar {

// Counter-based deterministic generator (SplitMix64 core).  The same seed
// yields a bit-identical stream on every platform: the Gaussian sampler uses
// only IEEE arithmetic, sqrt, and an internal portable log, never libm's.
//
// split() derives an independent child stream from the *original* seed and a
// label, so per-matrix initialization does not depend on the order in which
// matrices are constructed or on how much of the parent stream was consumed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();   // [0, 1), 53-bit resolution
    double gaussian();  // standard normal, polar method
    Rng split(std::string_view label) const;
    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// rows x cols matrix of i.i.d. N(0, std^2) samples drawn sequentially from
// rng; std = 0 gives the zero matrix, negative std throws.
Matrix gaussian_fill(Rng& rng, int rows, int cols, double std);

// Uniform integer in [0, n) via 128-bit multiply-shift: deterministic,
// branch-free, and without the classic modulo bias.  n must be positive.
std::uint64_t bounded_u64(Rng& rng, std::uint64_t n);

}  // namespace wesar
