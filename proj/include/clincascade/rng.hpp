#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "clincascade/text.hpp"

namespace clincascade {

/// Deterministic PRNG with portable draws.
///
/// std::mt19937_64's output sequence is fixed by the standard, but the
/// standard distributions are not, so draws are derived from raw engine
/// output here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for a named component: the same (seed, name) pair always yields
/// the same stream, independently of any other component.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
    return splitmix64(seed ^ text::fnv1a64(name));
}

}  // namespace clincascade
