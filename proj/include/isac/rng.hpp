#pragma once

#include <cstdint>
#include <random>

#include "isac/types.hpp"

namespace isac {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for realization q of a run with the given master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Named sub-streams inside one realization.
enum class Stream : std::uint64_t {
    channels = 1,
    rcs,
    symbols,
    init,
    ue_noise,
    rx_noise,
    pilots,
    adversary_noise,
    votes,
};

Rng make_stream(std::uint64_t realization_seed, Stream s);

/// CN(0, var): independent real/imaginary parts with variance var/2 each.
cplx complex_normal(Rng& rng, double var = 1.0);
CMatrix complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double var = 1.0);

} // namespace isac
