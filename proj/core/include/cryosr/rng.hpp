#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cryosr {

// Deterministic random source. Distributions are implemented by hand on
// top of mt19937_64 because the standard library's are free to differ
// across implementations, and bit reproducibility is part of the
// pipeline's contract.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t raw() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi] by rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    // Standard normal via Box-Muller; the pair's second member is cached.
    double gaussian();

    // k distinct values from [0, n) by partial Fisher-Yates, order kept.
    std::vector<int> sample_without_replacement(int n, int k);

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cryosr
