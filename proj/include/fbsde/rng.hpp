#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace fbsde {

// Counter-style per-path RNG: each (seed, stream) pair yields an independent
// xoshiro256** sequence seeded through SplitMix64, so parallel scheduling
// cannot perturb the draws of any path.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t sm = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in (0, 1).
    double next_uniform() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u == 0.0 ? 0x1.0p-53 : u;
    }

    // Standard normal via Box-Muller, pair-cached.
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Poisson count by inversion; means here are per-step jump intensities
    // and stay small.
    int next_poisson(double mean) {
        if (mean < 0.0) throw std::invalid_argument("next_poisson: negative mean");
        if (mean == 0.0) return 0;
        const double u = next_uniform();
        double p = std::exp(-mean);
        double cdf = p;
        int k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4] = {};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace fbsde
