#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace narex {

// mt19937_64 with hand-rolled draws. The standard distributions are not
// pinned across library implementations; these are, so seeded runs produce
// byte-identical artifacts everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi);

    double normal(double mean = 0.0, double stddev = 1.0);

    // Knuth's product-of-uniforms sampler; fine for small lambda.
    int poisson(double lambda);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[uniform_int(0, i)]);
        }
    }

    // Derives an independent stream id, e.g. mix(seed, doc_index).
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

  private:
    std::mt19937_64 gen_;
};

}  // namespace narex
