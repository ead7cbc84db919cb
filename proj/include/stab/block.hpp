#pragma once

// A block of a node's compact list: a short priority-ordered run of entries.
// Each entry packs its identifier (the one or two child indices that also
// hold the interval), its tag (the child range l..r it covers in this node,
// or 0..0 when it is not a live member of the node's own set), optional
// bounded coordinates, and link flags, one byte lane per field. Positions
// are 1-based. Stamps are small positive tokens that keep addressing the
// same entry while other entries are inserted around it.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "stab/order_labels.hpp"

namespace stab {

using Stamp = std::uint32_t;

struct Position {
    BlockHandle block;
    Stamp stamp = 0;

    bool valid() const { return block.valid() && stamp != 0; }
    friend bool operator==(const Position&, const Position&) = default;
};

struct Identifier {
    std::uint8_t c1 = 0;
    std::uint8_t c2 = 0;

    bool has(unsigned f) const { return f != 0 && (c1 == f || c2 == f); }
    bool empty() const { return c1 == 0 && c2 == 0; }
    /// Lane (0 or 1) that stores f; f must be present.
    unsigned slot_of(unsigned f) const { return c1 == f ? 0 : 1; }
    friend bool operator==(const Identifier&, const Identifier&) = default;
};

struct Tag {
    std::uint8_t l = 0;
    std::uint8_t r = 0;

    bool live() const { return l != 0; }
    friend bool operator==(const Tag&, const Tag&) = default;
};

/// Key of the set S_lr[box] an entry belongs to: l, r and bounded box bytes.
using TagKey = std::uint64_t;

inline constexpr unsigned kMaxBoundedDims = 3;

inline TagKey make_tag_key(Tag t, std::span<const std::uint8_t> lo, std::span<const std::uint8_t> hi) {
    TagKey k = t.l | (TagKey{t.r} << 8);
    for (std::size_t i = 0; i < lo.size(); ++i) {
        k |= TagKey{lo[i]} << (16 + 16 * i);
        k |= TagKey{hi[i]} << (24 + 16 * i);
    }
    return k;
}

inline unsigned tag_key_l(TagKey k) { return k & 0xFF; }
inline unsigned tag_key_r(TagKey k) { return (k >> 8) & 0xFF; }
inline std::uint64_t tag_key_box(TagKey k) { return k >> 16; }

class Block {
public:
    explicit Block(std::uint32_t max_fill = 64, unsigned bounded_dims = 0);

    std::uint32_t size() const { return size_; }
    std::uint32_t max_fill() const { return max_fill_; }
    bool full() const { return size_ >= max_fill_; }
    unsigned bounded_dims() const { return dims_; }

    /// Inserts after position `after` (0 = front). Throws when full.
    Stamp insert(std::uint32_t after, Identifier ident, Tag tag, std::uint32_t uid = 0,
                 std::span<const std::uint8_t> box_lo = {}, std::span<const std::uint8_t> box_hi = {});

    /// Number of entries among the first i that carry child f.
    std::uint32_t rank(unsigned f, std::uint32_t i) const;
    /// Position of the k-th entry carrying child f.
    std::uint32_t select(unsigned f, std::uint32_t k) const;
    std::uint32_t count(unsigned f) const { return rank(f, size_); }

    std::uint32_t pos_of_stamp(Stamp t) const;
    Stamp stamp_at(std::uint32_t pos) const;
    bool has_stamp(Stamp t) const { return t != 0 && t < pos_.size() && pos_[t] != 0; }

    /// Greatest position whose tag covers f (and whose box covers h).
    std::optional<std::uint32_t> gmax(unsigned f, std::span<const std::uint8_t> h = {}) const;

    Tag tag(std::uint32_t pos) const;
    void set_tag(std::uint32_t pos, Tag t);
    Identifier ident(std::uint32_t pos) const;
    void set_ident(std::uint32_t pos, Identifier id);
    std::uint32_t uid(std::uint32_t pos) const;
    std::uint8_t box_lo(std::uint32_t pos, unsigned dim) const;
    std::uint8_t box_hi(std::uint32_t pos, unsigned dim) const;
    TagKey tag_key(std::uint32_t pos) const;

    using TagCounts = std::vector<std::pair<TagKey, std::uint32_t>>;

    /// Live-tag multiplicities, sorted by TagKey.
    std::uint32_t tag_count(TagKey k) const;
    const TagCounts& tag_counts() const { return tag_counts_; }

    /// Moves the upper half into a new block; both halves keep their stamps.
    Block split_off();

    /// Every child index > j is incremented, in identifiers and tags.
    void shift_children(unsigned j);

    // Links: a parent link per entry, a child link per identifier lane.
    bool has_parent_link(std::uint32_t pos) const;
    Position parent_target(std::uint32_t pos) const;
    void set_parent_link(std::uint32_t pos, Position target);
    void clear_parent_link(std::uint32_t pos);
    bool has_child_link(std::uint32_t pos, unsigned slot) const;
    Position child_target(std::uint32_t pos, unsigned slot) const;
    void set_child_link(std::uint32_t pos, unsigned slot, Position target);
    void clear_child_link(std::uint32_t pos, unsigned slot);
    void clear_child_links_for(unsigned f);
    void clear_parent_links();

    /// Last position <= pos holding a parent link.
    std::optional<std::uint32_t> last_parent_link(std::uint32_t pos) const;
    /// Last position <= pos whose lane for child f holds a child link.
    std::optional<std::uint32_t> last_child_link(std::uint32_t pos, unsigned f) const;

    /// Word-level reads counted since construction (for probe accounting).
    std::uint64_t word_reads() const { return word_reads_; }

private:
    using Lane = std::vector<std::uint8_t>;
    struct Links {
        Position parent;
        Position child[2];
    };

    static std::uint32_t padded(std::uint32_t n) { return (n / 8 + 1) * 8; }
    void check_pos(std::uint32_t pos) const;
    void lane_insert(Lane& lane, std::uint32_t idx, std::uint8_t v);
    Stamp append(Identifier ident, Tag tag, std::uint32_t uid, std::span<const std::uint8_t> box_lo,
                 std::span<const std::uint8_t> box_hi);
    Stamp fresh_stamp();
    void recount_tags();
    void bump_tag(TagKey k, int delta);
    std::uint64_t box_mask(std::uint32_t word, std::span<const std::uint8_t> h) const;

    std::uint32_t max_fill_;
    unsigned dims_;
    std::uint32_t size_ = 0;

    Lane c1_, c2_, tl_, tr_, plink_, clink1_, clink2_;
    std::vector<Lane> jlo_, jhi_;
    std::vector<Stamp> stamp_at_;
    std::vector<std::uint32_t> uid_at_;

    std::vector<std::uint32_t> pos_;  // stamp -> position (0 = unused)
    std::vector<Links> links_;        // indexed by stamp
    TagCounts tag_counts_;
    mutable std::uint64_t word_reads_ = 0;
};

/// Splits a full block into two halves of floor(n/2) and ceil(n/2) entries.
std::pair<Block, Block> split(Block b);

}  // namespace stab
