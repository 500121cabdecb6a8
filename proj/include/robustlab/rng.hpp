#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace robustlab {

// Deterministic random source. All transforms (uniform, normal, bounded ints)
// are written out explicitly on top of the mt19937_64 bit stream instead of
// going through std::*_distribution, whose outputs differ across standard
// library implementations. Every stochastic component in the library takes a
// seed and derives per-item streams with derive_seed, so results never depend
// on evaluation order or thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // [0, 1)
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; draws two uniforms per call and keeps no
    // cached state, so interleaving with other draws stays reproducible.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Unbiased integer in [0, n) by rejection.
    std::size_t index(std::size_t n) {
        const std::uint64_t un = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return std::size_t(x % un);
    }

    // Fisher-Yates.
    template <typename V>
    void shuffle(V& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

// splitmix64 finalizer, used to spread derived seeds apart.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Independent stream for item `stream` under a base seed (used for
// per-example attack seeds, per-epoch shuffles, and so on).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream + 1));
}

}  // namespace robustlab
