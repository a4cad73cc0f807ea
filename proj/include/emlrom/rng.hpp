#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace emlrom {

/// SplitMix64 finalizer. Used as a counter-based generator: the i-th draw of
/// stream `key` is mix64(key + (i + 1) * golden), so any draw can be computed
/// independently and the stream is identical on every platform.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    explicit constexpr CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept { return mix64(key_ + (counter + 1) * kGolden); }

    /// Uniform in (0, 1): 53 random bits, offset by half an ulp so 0 is never returned.
    double uniform(std::uint64_t counter) const noexcept
    {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on draws 2i and 2i+1 (cosine branch).
    double normal(std::uint64_t i) const noexcept
    {
        const double u1 = uniform(2 * i);
        const double u2 = uniform(2 * i + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
};

/// FNV-1a over the bytes of `s`.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace emlrom
