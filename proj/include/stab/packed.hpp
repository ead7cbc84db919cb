#pragma once

// Broadword helpers over byte lanes. Every lane holds a value below 128 so
// that the high bit of each byte is free to carry comparison results.

#include <bit>
#include <cstdint>
#include <cstring>

namespace stab::packed {

inline constexpr std::uint64_t kLow = 0x0101010101010101ULL;
inline constexpr std::uint64_t kHigh = 0x8080808080808080ULL;
inline constexpr unsigned kLaneMax = 127;

inline std::uint64_t load(const std::uint8_t* p) {
    std::uint64_t w;
    std::memcpy(&w, p, sizeof w);
    return w;
}

inline void store(std::uint8_t* p, std::uint64_t w) { std::memcpy(p, &w, sizeof w); }

constexpr std::uint64_t broadcast(unsigned v) { return kLow * (v & 0xFFU); }

/// High bit set in each byte equal to v.
constexpr std::uint64_t eq(std::uint64_t w, unsigned v) {
    const std::uint64_t t = w ^ broadcast(v);
    return ~(((t & ~kHigh) + ~kHigh) | t | ~kHigh);
}

/// High bit set in each byte >= v.
constexpr std::uint64_t ge(std::uint64_t w, unsigned v) { return ((w | kHigh) - broadcast(v)) & kHigh; }

/// High bit set in each byte <= v.
constexpr std::uint64_t le(std::uint64_t w, unsigned v) { return ((broadcast(v) | kHigh) - w) & kHigh; }

/// High bits of the first n bytes (n <= 8).
constexpr std::uint64_t first_lanes(unsigned n) {
    return n >= 8 ? kHigh : kHigh & ((std::uint64_t{1} << (8 * n)) - 1);
}

/// Lane index of the k-th (1-based) flagged byte; the mask must hold >= k flags.
inline unsigned select_lane(std::uint64_t mask, unsigned k) {
    for (unsigned i = 1; i < k; ++i) mask &= mask - 1;
    return static_cast<unsigned>(std::countr_zero(mask)) / 8;
}

inline unsigned last_lane(std::uint64_t mask) {
    return static_cast<unsigned>(63 - std::countl_zero(mask)) / 8;
}

inline unsigned count(std::uint64_t mask) { return static_cast<unsigned>(std::popcount(mask)); }

}  // namespace stab::packed
