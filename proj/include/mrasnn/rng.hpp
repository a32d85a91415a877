#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mrasnn {

// Deterministic RNG wrapper. std::mt19937 output is pinned by the standard,
// but the distribution classes are implementation-defined, so the float
// mappings live here; fixed-seed runs must be reproducible byte-for-byte.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    // Uniform in [0, 1) with 24 bits of mantissa.
    double uniform() {
        return static_cast<double>(gen_() >> 8) * (1.0 / 16777216.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one value per call (the spare is kept).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        if (n == 0) return 0;
        uint64_t limit = (0xFFFFFFFFull / n) * n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    uint32_t raw() { return gen_(); }

    // Fisher-Yates shuffle.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mrasnn
