#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace enfgrid {

// Deterministic RNG used everywhere randomness is needed. Draws are produced
// from raw 64-bit engine output so the stream does not depend on the standard
// library's distribution implementations. One root seed per run; components
// derive child seeds via derive_seed so streams never alias.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        // splitmix64 warmup decorrelates small/sequential seeds
        state_ = seed;
        for (int i = 0; i < 4; ++i) next_raw();
        cached_valid_ = false;
    }

    std::uint64_t next_raw() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // uniform integer in [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_raw() % span);
    }

    // standard normal via Box-Muller (caches the second deviate)
    double gaussian() {
        if (cached_valid_) {
            cached_valid_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        cached_ = radius * std::sin(angle);
        cached_valid_ = true;
        return radius * std::cos(angle);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

private:
    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool cached_valid_ = false;
};

// Stable child-seed derivation: hash the label into the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index);

} // namespace enfgrid
