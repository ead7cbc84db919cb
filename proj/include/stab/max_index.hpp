#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace stab {

/// Per-node index over the sets S_lr (optionally refined by a bounded box):
/// for each present (l, r, box) one key, the label of the block holding the
/// set's maximum. A query for child f returns the greatest key over all
/// entries with l <= f <= r whose box covers the query's bounded
/// coordinates. Queries compare small ranks (the position of each key among
/// the distinct present keys) instead of the keys themselves.
class MaxIndex {
public:
    struct Cover {
        unsigned l = 0;
        unsigned r = 0;
        std::uint64_t box = 0;
        std::uint64_t key = 0;
        friend bool operator==(const Cover&, const Cover&) = default;
    };

    explicit MaxIndex(unsigned width = 0) { reset(width); }

    /// Drops every entry and sets the child count.
    void reset(unsigned width);
    unsigned width() const { return width_; }
    std::size_t size() const { return present_; }

    void set(unsigned l, unsigned r, std::uint64_t key, std::uint64_t box = 0);
    /// Throws usage_error when the entry is absent.
    void clear(unsigned l, unsigned r, std::uint64_t box = 0);
    std::optional<std::uint64_t> key(unsigned l, unsigned r, std::uint64_t box = 0) const;

    /// Argmax by rank; ties go to the smallest l, then r, then box.
    std::optional<Cover> query_cover(unsigned f, std::span<const std::uint8_t> h = {}) const;
    /// Same answer computed on raw keys; kept as the reference path.
    std::optional<Cover> query_cover_by_key(unsigned f, std::span<const std::uint8_t> h = {}) const;

    std::uint32_t rank_of(unsigned l, unsigned r, std::uint64_t box = 0) const;

    static bool box_covers(std::uint64_t box, std::span<const std::uint8_t> h);

private:
    struct Entry {
        std::uint64_t box;
        std::uint64_t key;
        std::uint32_t rank;
    };

    std::size_t pair_index(unsigned l, unsigned r) const;
    void check_range(unsigned l, unsigned r) const;
    void rerank() const;
    template <class Better>
    std::optional<Cover> scan(unsigned f, std::span<const std::uint8_t> h, Better better) const;

    unsigned width_ = 0;
    std::size_t present_ = 0;
    // Ranks are refreshed lazily on the first read after a change.
    mutable std::vector<std::vector<Entry>> pairs_;  // l-major, each sorted by box
    mutable bool dirty_ = false;
    std::map<std::uint64_t, std::uint32_t> keys_;  // key -> multiplicity
};

}  // namespace stab
