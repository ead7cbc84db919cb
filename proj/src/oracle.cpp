#include "stab/oracle.hpp"

#include <algorithm>

namespace stab::oracle {

namespace {

bool better(const MaybeHit& cur, Priority p, IntervalId id) {
    return !cur || TotalOrderKey{p, id} > TotalOrderKey{cur->priority, cur->id};
}

}  // namespace

MaybeHit o_max(const std::vector<Interval>& set, Coord x) {
    MaybeHit best;
    for (const Interval& s : set)
        if (s.left <= x && x <= s.right && better(best, s.priority, s.id)) best = Hit{s.id, s.priority};
    return best;
}

std::uint64_t o_count(const std::vector<Interval>& set, Coord x) {
    std::uint64_t n = 0;
    for (const Interval& s : set) n += s.left <= x && x <= s.right;
    return n;
}

MaybeHit o_max_dd(const std::vector<Rectangle>& set, const QueryPoint& q) {
    MaybeHit best;
    for (const Rectangle& s : set) {
        if (s.dims.size() != q.coords.size()) throw usage_error("oracle: dimension mismatch");
        bool in = true;
        for (std::size_t i = 0; i < q.coords.size() && in; ++i)
            in = s.dims[i].lo <= q.coords[i] && q.coords[i] <= s.dims[i].hi;
        if (in && better(best, s.priority, s.id)) best = Hit{s.id, s.priority};
    }
    return best;
}

void FlatSet::insert(const Interval& s) {
    if (!slot_.emplace(s.id, items_.size()).second) throw usage_error("oracle: duplicate id");
    items_.push_back(s);
    spans_.emplace_back(s.left, s.right);
    by_rank_.emplace(TotalOrderKey{s.priority, s.id}, s);
}

void FlatSet::erase(IntervalId id) {
    auto f = slot_.find(id);
    if (f == slot_.end()) throw usage_error("oracle: unknown id");
    const std::size_t i = f->second;
    by_rank_.erase(TotalOrderKey{items_[i].priority, id});
    slot_.erase(f);
    if (i + 1 != items_.size()) {
        items_[i] = items_.back();
        spans_[i] = spans_.back();
        slot_[items_[i].id] = i;
    }
    items_.pop_back();
    spans_.pop_back();
}

// A short walk from the top usually finds the answer; otherwise scan all.
MaybeHit FlatSet::max(Coord x) const {
    std::size_t steps = 0;
    for (const auto& [key, s] : by_rank_) {
        if (s.left <= x && x <= s.right) return Hit{s.id, s.priority};
        if (++steps == 512) break;
    }
    if (steps < 512) return std::nullopt;
    MaybeHit best;
    for (std::size_t i = 0; i < spans_.size(); ++i) {
        const bool in = static_cast<unsigned>(spans_[i].first <= x) & static_cast<unsigned>(x <= spans_[i].second);
        if (in && better(best, items_[i].priority, items_[i].id)) best = Hit{items_[i].id, items_[i].priority};
    }
    return best;
}

std::uint64_t FlatSet::count(Coord x) const {
    std::uint64_t n = 0;
    for (const auto& [l, r] : spans_) n += static_cast<unsigned>(l <= x) & static_cast<unsigned>(x <= r);
    return n;
}

void FlatRects::insert(const Rectangle& s) {
    for (const Rectangle& t : items_)
        if (t.id == s.id) throw usage_error("oracle: duplicate id");
    items_.push_back(s);
}

void FlatRects::erase(IntervalId id) {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const Rectangle& t) { return t.id == id; });
    if (it == items_.end()) throw usage_error("oracle: unknown id");
    *it = items_.back();
    items_.pop_back();
}

}  // namespace stab::oracle
