#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "core/error.hpp"
#include <string_view>
#include <vector>

namespace semshift {

// splitmix64 step, used both as a mixer for seed derivation and to expand
// one master seed into independent per-stage seeds.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stage seeds are derived from the master seed by hashing the stage name into
// it. Documented in the README; every pipeline stage uses this so any stage
// can be re-run independently with identical randomness.
inline uint64_t derive_seed(uint64_t master, std::string_view stage) {
    return splitmix64(master ^ fnv1a64(stage));
}

inline uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index) {
    return splitmix64(derive_seed(master, stage) + splitmix64(index + 1));
}

// mt19937_64 with hand-rolled uniform/normal/shuffle on top. The std
// distributions are implementation-defined, so they are not used; everything
// here is pinned down to the engine's output stream.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // uniform double in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) {
            throw InvalidArgument("uniform_int: n must be positive");
        }
        // rejection sampling keeps the draw unbiased
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace semshift
