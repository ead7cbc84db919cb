#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stab {

using Coord = std::int64_t;
using Priority = std::uint64_t;
using IntervalId = std::uint64_t;

inline constexpr Coord kMinCoord = INT64_MIN;
inline constexpr Coord kMaxCoord = INT64_MAX;

/// Raised on contract violations by callers (duplicate ids, bad ranges, ...).
class usage_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Closed interval [left, right] carrying a priority.
struct Interval {
    IntervalId id = 0;
    Coord left = 0;
    Coord right = 0;
    Priority priority = 0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

struct Range {
    Coord lo = 0;
    Coord hi = 0;
    friend bool operator==(const Range&, const Range&) = default;
};

struct Rectangle {
    IntervalId id = 0;
    std::vector<Range> dims;
    Priority priority = 0;
};

struct QueryPoint {
    std::vector<Coord> coords;
};

/// (priority, id) with id as tie-break; the order used by every structure.
struct TotalOrderKey {
    Priority priority = 0;
    IntervalId id = 0;

    friend constexpr std::strong_ordering operator<=>(const TotalOrderKey& a,
                                                      const TotalOrderKey& b) {
        if (auto c = a.priority <=> b.priority; c != 0) return c;
        return a.id <=> b.id;
    }
    friend constexpr bool operator==(const TotalOrderKey&, const TotalOrderKey&) = default;
};

constexpr std::strong_ordering cmp_total(const TotalOrderKey& a, const TotalOrderKey& b) {
    return a <=> b;
}

constexpr bool contains(const Interval& s, Coord x) { return s.left <= x && x <= s.right; }

constexpr bool contains(const Range& r, Coord x) { return r.lo <= x && x <= r.hi; }

/// Containment of a closed range inside another, non-strict.
constexpr bool covers(const Range& outer, const Range& inner) {
    return outer.lo <= inner.lo && inner.hi <= outer.hi;
}

inline bool rect_contains(const Rectangle& s, const QueryPoint& q) {
    if (s.dims.size() != q.coords.size())
        throw usage_error("rect_contains: dimension mismatch");
    for (std::size_t i = 0; i < s.dims.size(); ++i)
        if (!contains(s.dims[i], q.coords[i])) return false;
    return true;
}

/// Answer of a stabbing-max query.
struct Hit {
    IntervalId id = 0;
    Priority priority = 0;
    friend bool operator==(const Hit&, const Hit&) = default;
};

using MaybeHit = std::optional<Hit>;

inline void validate(const Interval& s) {
    if (s.left > s.right) throw usage_error("interval has left > right");
}

inline void validate(const Rectangle& s, std::size_t dim) {
    if (s.dims.size() != dim) throw usage_error("rectangle dimension mismatch");
    for (const auto& r : s.dims)
        if (r.lo > r.hi) throw usage_error("rectangle has lo > hi");
}

}  // namespace stab
