#pragma once

// Brute-force references: linear scans over flat sets. They depend on
// nothing but the core types so a bug elsewhere cannot leak into them.

#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stab/core_types.hpp"

namespace stab::oracle {

/// Highest (priority, id) interval containing x.
MaybeHit o_max(const std::vector<Interval>& set, Coord x);
std::uint64_t o_count(const std::vector<Interval>& set, Coord x);
/// Highest (priority, id) rectangle containing q; throws on dimension mismatch.
MaybeHit o_max_dd(const std::vector<Rectangle>& set, const QueryPoint& q);

/// Flat set with the same update interface as the structures. max() walks
/// the items from the highest (priority, id) down and stops at the first
/// container; count() scans every item.
class FlatSet {
public:
    void insert(const Interval& s);
    void erase(IntervalId id);
    MaybeHit max(Coord x) const;
    std::uint64_t count(Coord x) const;
    bool contains(IntervalId id) const { return slot_.count(id) != 0; }
    /// Live items in no particular order.
    const std::vector<Interval>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<Interval> items_;
    std::vector<std::pair<Coord, Coord>> spans_;  // items_[i].left, .right
    std::unordered_map<IntervalId, std::size_t> slot_;
    std::map<TotalOrderKey, Interval, std::greater<>> by_rank_;
};

class FlatRects {
public:
    void insert(const Rectangle& s);
    void erase(IntervalId id);
    const std::vector<Rectangle>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<Rectangle> items_;
};

}  // namespace stab::oracle
