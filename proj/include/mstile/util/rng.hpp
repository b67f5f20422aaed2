#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>
#include <vector>

namespace mstile {

// All randomness in the library flows through these primitives. They are
// fully specified here (no std::*_distribution) so identical seeds give
// identical streams on every platform and toolchain.

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime  = 0x100000001b3ull;

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

// splitmix64 finalizer; decorrelates consecutive or related inputs.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_u64(std::uint64_t h, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    return fnv1a64(b, 8, h);
}

// Seed for a named sub-stream: hash of (base seed, tag, indices...), then
// mixed. Used everywhere a worker or replicate needs its own stream, so
// results cannot depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::initializer_list<std::uint64_t> indices = {}) {
    std::uint64_t h = hash_u64(kFnvOffset, base);
    h = fnv1a64(tag, h);
    for (std::uint64_t ix : indices) h = hash_u64(h, ix);
    return mix64(h);
}

// splitmix64 generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased uniform integer in [0, n). n must be >= 1.
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling over the top of the range
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
        std::uint64_t v;
        do {
            v = next();
        } while (v > limit);
        return v % n;
    }

    // Uniform real in [lo, hi].
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Fisher-Yates over an index permutation.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Stateless lattice hash: uniform [0,1) value at integer grid point (i,j)
// for a given salt. Basis of the value-noise fields; defined here so test
// vectors stay stable.
inline double lattice_unit(std::uint64_t salt, std::int64_t i, std::int64_t j) {
    std::uint64_t h = hash_u64(kFnvOffset, salt);
    h = hash_u64(h, static_cast<std::uint64_t>(i));
    h = hash_u64(h, static_cast<std::uint64_t>(j));
    return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

} // namespace mstile
