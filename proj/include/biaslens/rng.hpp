#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace biaslens {

/// Seed used when the caller supplies none.
inline constexpr std::uint64_t kDefaultSeed = 10622;

/// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `text`.
constexpr std::uint64_t hash_bytes(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Derives an independent stream key from a seed, a purpose tag and a name or index.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view tag, std::uint64_t id) noexcept {
    return mix64(mix64(seed ^ hash_bytes(tag)) ^ mix64(id));
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view tag, std::string_view name) noexcept {
    return stream_key(seed, tag, hash_bytes(name));
}

/// Counter-based generator: the i-th output is a pure function of (key, i), so
/// streams can be consumed on any thread in any order with identical results.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
        : key_(key), counter_(counter) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    static constexpr result_type at(std::uint64_t key, std::uint64_t counter) noexcept {
        return mix64(mix64(key ^ (counter * 0xD1B54A32D192ED03ull)) + counter);
    }

    constexpr result_type operator()() noexcept { return at(key_, counter_++); }

    /// Uniform integer in [0, bound) without modulo bias. `bound` must be > 0.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = (*this)();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<__uint128_t>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double unit() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace biaslens
