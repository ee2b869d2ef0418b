#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rcache {

// Deterministic RNG wrapper. Draws go through hand-rolled reductions because
// std::uniform_int_distribution is implementation-defined and would break
// byte-identical reruns across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [lo, hi], inclusive. Modulo bias is irrelevant here; the
    // draws only feed instance generation and sampling.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi <= lo) return lo;
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(gen_() % span);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Sampler for Zipf-like popularity over {0, ..., n-1} with exponent s,
// using an explicit cumulative table.
class ZipfSampler {
public:
    ZipfSampler(int n, double s);
    int sample(Rng& rng) const;

private:
    std::vector<double> cdf_;
};

}  // namespace rcache
