#include "stab/max_index.hpp"

#include <algorithm>

#include "stab/core_types.hpp"

namespace stab {

void MaxIndex::reset(unsigned width) {
    width_ = width;
    present_ = 0;
    pairs_.assign(static_cast<std::size_t>(width) * (width + 1) / 2, {});
    keys_.clear();
    dirty_ = false;
}

void MaxIndex::check_range(unsigned l, unsigned r) const {
    if (l < 1 || l > r || r > width_) throw usage_error("child range out of bounds");
}

// Pairs with smaller l come first; within a given l, r ascends.
std::size_t MaxIndex::pair_index(unsigned l, unsigned r) const {
    const std::size_t before = static_cast<std::size_t>(l - 1) * width_ -
                               static_cast<std::size_t>(l - 1) * (l - 2) / 2;
    return before + (r - l);
}

void MaxIndex::set(unsigned l, unsigned r, std::uint64_t key, std::uint64_t box) {
    check_range(l, r);
    auto& v = pairs_[pair_index(l, r)];
    auto it = std::lower_bound(v.begin(), v.end(), box, [](const Entry& e, std::uint64_t b) { return e.box < b; });
    if (it != v.end() && it->box == box) {
        if (it->key == key) return;
        if (--keys_[it->key] == 0) keys_.erase(it->key);
        it->key = key;
    } else {
        v.insert(it, Entry{box, key, 0});
        ++present_;
    }
    ++keys_[key];
    dirty_ = true;
}

void MaxIndex::clear(unsigned l, unsigned r, std::uint64_t box) {
    check_range(l, r);
    auto& v = pairs_[pair_index(l, r)];
    auto it = std::lower_bound(v.begin(), v.end(), box, [](const Entry& e, std::uint64_t b) { return e.box < b; });
    if (it == v.end() || it->box != box) throw usage_error("clear of absent max-index entry");
    if (--keys_[it->key] == 0) keys_.erase(it->key);
    v.erase(it);
    --present_;
    dirty_ = true;
}

std::optional<std::uint64_t> MaxIndex::key(unsigned l, unsigned r, std::uint64_t box) const {
    check_range(l, r);
    const auto& v = pairs_[pair_index(l, r)];
    auto it = std::lower_bound(v.begin(), v.end(), box, [](const Entry& e, std::uint64_t b) { return e.box < b; });
    if (it == v.end() || it->box != box) return std::nullopt;
    return it->key;
}

std::uint32_t MaxIndex::rank_of(unsigned l, unsigned r, std::uint64_t box) const {
    check_range(l, r);
    rerank();
    for (const auto& e : pairs_[pair_index(l, r)])
        if (e.box == box) return e.rank;
    return 0;
}

void MaxIndex::rerank() const {
    if (!dirty_) return;
    dirty_ = false;
    std::vector<std::uint64_t> distinct;
    distinct.reserve(keys_.size());
    for (const auto& [k, _] : keys_) distinct.push_back(k);
    for (auto& v : pairs_)
        for (auto& e : v)
            e.rank = static_cast<std::uint32_t>(std::lower_bound(distinct.begin(), distinct.end(), e.key) -
                                                distinct.begin()) + 1;
}

bool MaxIndex::box_covers(std::uint64_t box, std::span<const std::uint8_t> h) {
    for (std::size_t d = 0; d < h.size(); ++d) {
        const unsigned lo = (box >> (16 * d)) & 0xFF;
        const unsigned hi = (box >> (16 * d + 8)) & 0xFF;
        if (h[d] < lo || h[d] > hi) return false;
    }
    return true;
}

template <class Better>
std::optional<MaxIndex::Cover> MaxIndex::scan(unsigned f, std::span<const std::uint8_t> h, Better better) const {
    if (f < 1 || f > width_) throw usage_error("query child index out of range");
    const Entry* best = nullptr;
    Cover out;
    for (unsigned l = 1; l <= f; ++l) {
        for (unsigned r = f; r <= width_; ++r) {
            for (const auto& e : pairs_[pair_index(l, r)]) {
                if (!box_covers(e.box, h)) continue;
                if (!best || better(e, *best)) {
                    best = &e;
                    out = {l, r, e.box, e.key};
                }
            }
        }
    }
    if (!best) return std::nullopt;
    return out;
}

std::optional<MaxIndex::Cover> MaxIndex::query_cover(unsigned f, std::span<const std::uint8_t> h) const {
    rerank();
    return scan(f, h, [](const Entry& a, const Entry& b) { return a.rank > b.rank; });
}

std::optional<MaxIndex::Cover> MaxIndex::query_cover_by_key(unsigned f, std::span<const std::uint8_t> h) const {
    return scan(f, h, [](const Entry& a, const Entry& b) { return a.key > b.key; });
}

}  // namespace stab
