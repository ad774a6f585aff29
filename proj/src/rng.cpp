#include "narex/rng.hpp"

#include <cmath>

#include "narex/common.hpp"

namespace narex {

int Rng::uniform_int(int lo, int hi) {
    NAREX_CHECK(lo <= hi, "uniform_int: empty range [", lo, ", ", hi, "]");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
    // Rejection sampling to kill modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<int>(draw % span);
}

double Rng::normal(double mean, double stddev) {
    // Box-Muller, no caching: two draws per variate keeps the stream position
    // a pure function of call count.
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

int Rng::poisson(double lambda) {
    NAREX_CHECK(lambda > 0.0, "poisson: lambda must be positive, got ", lambda);
    const double threshold = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform();
    } while (p > threshold);
    return k - 1;
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words.
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace narex
