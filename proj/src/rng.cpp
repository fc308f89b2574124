#include "isac/rng.hpp"

#include <cmath>

namespace isac {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

Rng make_stream(std::uint64_t realization_seed, Stream s)
{
    return Rng(derive_seed(realization_seed, static_cast<std::uint64_t>(s) << 32));
}

cplx complex_normal(Rng& rng, double var)
{
    std::normal_distribution<double> n(0.0, 1.0);
    const double s = std::sqrt(var / 2.0);
    const double re = n(rng);
    const double im = n(rng);
    return {s * re, s * im};
}

CMatrix complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double var)
{
    CMatrix m(rows, cols);
    // Column-major fill keeps the draw order independent of Eigen internals.
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            m(r, c) = complex_normal(rng, var);
    return m;
}

} // namespace isac
