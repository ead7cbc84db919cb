#include "stab/block.hpp"

#include <algorithm>
#include <bit>

#include "stab/packed.hpp"

namespace stab {

namespace pk = packed;

Block::Block(std::uint32_t max_fill, unsigned bounded_dims)
    : max_fill_(max_fill), dims_(bounded_dims), jlo_(bounded_dims), jhi_(bounded_dims) {
    if (max_fill < 2) throw usage_error("block capacity must be at least 2");
    if (bounded_dims > kMaxBoundedDims) throw usage_error("too many bounded dimensions");
    // Lanes never outgrow padded(max_fill); reserving up front keeps
    // insertion free of reallocation.
    const std::uint32_t room = padded(std::min<std::uint32_t>(max_fill, 1024));
    for (Lane* l : {&c1_, &c2_, &tl_, &tr_, &plink_, &clink1_, &clink2_}) {
        l->reserve(room);
        l->assign(padded(0), 0);
    }
    for (unsigned d = 0; d < dims_; ++d) {
        jlo_[d].reserve(room);
        jhi_[d].reserve(room);
        jlo_[d].assign(padded(0), 0);
        jhi_[d].assign(padded(0), 0);
    }
    stamp_at_.reserve(room);
    uid_at_.reserve(room);
    pos_.reserve(room + 1);
    links_.reserve(room + 1);
    pos_.assign(1, 0);
    links_.assign(1, {});
}

void Block::check_pos(std::uint32_t pos) const {
    if (pos < 1 || pos > size_) throw usage_error("block position out of range");
}

void Block::lane_insert(Lane& lane, std::uint32_t idx, std::uint8_t v) {
    lane.insert(lane.begin() + idx, v);
    lane.resize(padded(size_ + 1), 0);
}

Stamp Block::fresh_stamp() {
    if (pos_.size() == size_ + 1u) {  // every stamp in use
        pos_.push_back(0);
        links_.emplace_back();
        return static_cast<Stamp>(pos_.size() - 1);
    }
    for (Stamp t = 1; t < pos_.size(); ++t)
        if (pos_[t] == 0) return t;
    pos_.push_back(0);
    links_.emplace_back();
    return static_cast<Stamp>(pos_.size() - 1);
}

Stamp Block::insert(std::uint32_t after, Identifier ident, Tag tag, std::uint32_t uid,
                    std::span<const std::uint8_t> box_lo, std::span<const std::uint8_t> box_hi) {
    if (full()) throw usage_error("block full");
    if (after > size_) throw usage_error("insert position out of range");
    if (box_lo.size() != dims_ || box_hi.size() != dims_) throw usage_error("bounded box arity mismatch");
    if (ident.c1 > pk::kLaneMax || ident.c2 > pk::kLaneMax || tag.r > pk::kLaneMax)
        throw usage_error("child index exceeds lane width");
    if (tag.l > tag.r || (tag.l == 0) != (tag.r == 0)) throw usage_error("invalid tag");

    const std::uint32_t idx = after;  // 0-based slot of the new entry
    if (idx == size_) return append(ident, tag, uid, box_lo, box_hi);
    lane_insert(c1_, idx, ident.c1);
    lane_insert(c2_, idx, ident.c2);
    lane_insert(tl_, idx, tag.l);
    lane_insert(tr_, idx, tag.r);
    lane_insert(plink_, idx, 0);
    lane_insert(clink1_, idx, 0);
    lane_insert(clink2_, idx, 0);
    for (unsigned d = 0; d < dims_; ++d) {
        if (box_lo[d] > pk::kLaneMax || box_hi[d] > pk::kLaneMax) throw usage_error("bounded coordinate too large");
        lane_insert(jlo_[d], idx, box_lo[d]);
        lane_insert(jhi_[d], idx, box_hi[d]);
    }
    const Stamp t = fresh_stamp();
    if (idx < size_)
        for (Stamp s = 1; s < pos_.size(); ++s)
            if (pos_[s] > idx) ++pos_[s];
    pos_[t] = idx + 1;
    links_[t] = {};
    stamp_at_.insert(stamp_at_.begin() + idx, t);
    uid_at_.insert(uid_at_.begin() + idx, uid);
    ++size_;
    if (tag.live()) bump_tag(tag_key(idx + 1), +1);
    return t;
}

Stamp Block::append(Identifier ident, Tag tag, std::uint32_t uid, std::span<const std::uint8_t> box_lo,
                    std::span<const std::uint8_t> box_hi) {
    const std::uint32_t idx = size_;
    const std::uint32_t len = padded(size_ + 1);
    auto put = [&](Lane& lane, std::uint8_t v) {
        if (lane.size() < len) lane.resize(len, 0);
        lane[idx] = v;
    };
    put(c1_, ident.c1);
    put(c2_, ident.c2);
    put(tl_, tag.l);
    put(tr_, tag.r);
    put(plink_, 0);
    put(clink1_, 0);
    put(clink2_, 0);
    for (unsigned d = 0; d < dims_; ++d) {
        if (box_lo[d] > pk::kLaneMax || box_hi[d] > pk::kLaneMax) throw usage_error("bounded coordinate too large");
        put(jlo_[d], box_lo[d]);
        put(jhi_[d], box_hi[d]);
    }
    const Stamp t = fresh_stamp();
    pos_[t] = idx + 1;
    links_[t] = {};
    stamp_at_.push_back(t);
    uid_at_.push_back(uid);
    ++size_;
    if (tag.live()) bump_tag(tag_key(idx + 1), +1);
    return t;
}

std::uint32_t Block::rank(unsigned f, std::uint32_t i) const {
    if (i > size_) throw usage_error("rank index out of range");
    if (f == 0 || i == 0) return 0;
    std::uint32_t total = 0;
    for (std::uint32_t w = 0; w * 8 < i; ++w) {
        std::uint64_t m = pk::eq(pk::load(&c1_[w * 8]), f) | pk::eq(pk::load(&c2_[w * 8]), f);
        m &= pk::first_lanes(std::min<std::uint32_t>(8, i - w * 8));
        total += pk::count(m);
        ++word_reads_;
    }
    return total;
}

std::uint32_t Block::select(unsigned f, std::uint32_t k) const {
    if (k == 0) throw usage_error("select rank must be positive");
    std::uint32_t seen = 0;
    for (std::uint32_t w = 0; w * 8 < size_; ++w) {
        std::uint64_t m = pk::eq(pk::load(&c1_[w * 8]), f) | pk::eq(pk::load(&c2_[w * 8]), f);
        m &= pk::first_lanes(std::min<std::uint32_t>(8, size_ - w * 8));
        ++word_reads_;
        const unsigned c = pk::count(m);
        if (seen + c >= k) return w * 8 + pk::select_lane(m, k - seen) + 1;
        seen += c;
    }
    throw usage_error("select rank exceeds count");
}

std::uint32_t Block::pos_of_stamp(Stamp t) const {
    if (!has_stamp(t)) throw usage_error("unknown stamp");
    return pos_[t];
}

Stamp Block::stamp_at(std::uint32_t pos) const {
    check_pos(pos);
    return stamp_at_[pos - 1];
}

std::uint64_t Block::box_mask(std::uint32_t w, std::span<const std::uint8_t> h) const {
    std::uint64_t m = pk::kHigh;
    for (unsigned d = 0; d < dims_; ++d) {
        m &= pk::le(pk::load(&jlo_[d][w * 8]), h[d]);
        m &= pk::ge(pk::load(&jhi_[d][w * 8]), h[d]);
    }
    return m;
}

std::optional<std::uint32_t> Block::gmax(unsigned f, std::span<const std::uint8_t> h) const {
    if (h.size() != dims_) throw usage_error("query box arity mismatch");
    if (f == 0 || size_ == 0) return std::nullopt;
    for (std::uint32_t w = (size_ - 1) / 8 + 1; w-- > 0;) {
        std::uint64_t m = pk::le(pk::load(&tl_[w * 8]), f) & pk::ge(pk::load(&tr_[w * 8]), f);
        m &= pk::first_lanes(std::min<std::uint32_t>(8, size_ - w * 8));
        if (dims_ && m) m &= box_mask(w, h);
        ++word_reads_;
        if (m) return w * 8 + pk::last_lane(m) + 1;
    }
    return std::nullopt;
}

Tag Block::tag(std::uint32_t pos) const {
    check_pos(pos);
    return {tl_[pos - 1], tr_[pos - 1]};
}

TagKey Block::tag_key(std::uint32_t pos) const {
    check_pos(pos);
    std::uint8_t lo[kMaxBoundedDims], hi[kMaxBoundedDims];
    for (unsigned d = 0; d < dims_; ++d) {
        lo[d] = jlo_[d][pos - 1];
        hi[d] = jhi_[d][pos - 1];
    }
    return make_tag_key({tl_[pos - 1], tr_[pos - 1]}, {lo, dims_}, {hi, dims_});
}

void Block::bump_tag(TagKey k, int delta) {
    auto it = std::lower_bound(tag_counts_.begin(), tag_counts_.end(), k,
                               [](const auto& e, TagKey key) { return e.first < key; });
    if (it == tag_counts_.end() || it->first != k) it = tag_counts_.insert(it, {k, 0});
    it->second = static_cast<std::uint32_t>(static_cast<int>(it->second) + delta);
    if (it->second == 0) tag_counts_.erase(it);
}

void Block::set_tag(std::uint32_t pos, Tag t) {
    check_pos(pos);
    if (t.l > t.r || (t.l == 0) != (t.r == 0) || t.r > pk::kLaneMax) throw usage_error("invalid tag");
    const Tag old = tag(pos);
    if (old == t) return;
    if (old.live()) bump_tag(tag_key(pos), -1);
    tl_[pos - 1] = t.l;
    tr_[pos - 1] = t.r;
    if (t.live()) bump_tag(tag_key(pos), +1);
}

Identifier Block::ident(std::uint32_t pos) const {
    check_pos(pos);
    return {c1_[pos - 1], c2_[pos - 1]};
}

void Block::set_ident(std::uint32_t pos, Identifier id) {
    check_pos(pos);
    if (id.c1 > pk::kLaneMax || id.c2 > pk::kLaneMax) throw usage_error("child index exceeds lane width");
    c1_[pos - 1] = id.c1;
    c2_[pos - 1] = id.c2;
}

std::uint32_t Block::uid(std::uint32_t pos) const {
    check_pos(pos);
    return uid_at_[pos - 1];
}

std::uint8_t Block::box_lo(std::uint32_t pos, unsigned dim) const {
    check_pos(pos);
    return jlo_.at(dim)[pos - 1];
}

std::uint8_t Block::box_hi(std::uint32_t pos, unsigned dim) const {
    check_pos(pos);
    return jhi_.at(dim)[pos - 1];
}

std::uint32_t Block::tag_count(TagKey k) const {
    auto it = std::lower_bound(tag_counts_.begin(), tag_counts_.end(), k,
                               [](const auto& e, TagKey key) { return e.first < key; });
    return it == tag_counts_.end() || it->first != k ? 0 : it->second;
}

void Block::recount_tags() {
    tag_counts_.clear();
    for (std::uint32_t p = 1; p <= size_; ++p)
        if (tl_[p - 1] != 0) bump_tag(tag_key(p), +1);
}

Block Block::split_off() {
    if (size_ < max_fill_) throw usage_error("split of a block that is not full");
    const std::uint32_t keep = size_ / 2;
    const std::uint32_t moved = size_ - keep;
    Block out(max_fill_, dims_);
    auto move_lane = [&](Lane& src, Lane& dst) {
        dst.assign(src.begin() + keep, src.begin() + size_);
        dst.resize(padded(moved), 0);
        src.resize(padded(keep));
        std::fill(src.begin() + keep, src.end(), 0);
    };
    move_lane(c1_, out.c1_);
    move_lane(c2_, out.c2_);
    move_lane(tl_, out.tl_);
    move_lane(tr_, out.tr_);
    move_lane(plink_, out.plink_);
    move_lane(clink1_, out.clink1_);
    move_lane(clink2_, out.clink2_);
    for (unsigned d = 0; d < dims_; ++d) {
        move_lane(jlo_[d], out.jlo_[d]);
        move_lane(jhi_[d], out.jhi_[d]);
    }
    out.stamp_at_.assign(stamp_at_.begin() + keep, stamp_at_.end());
    out.uid_at_.assign(uid_at_.begin() + keep, uid_at_.end());
    stamp_at_.resize(keep);
    uid_at_.resize(keep);
    Stamp top = 0;
    for (Stamp t : out.stamp_at_) top = std::max(top, t);
    out.pos_.assign(top + 1, 0);
    out.links_.assign(top + 1, {});
    for (std::uint32_t i = 0; i < moved; ++i) {
        const Stamp t = out.stamp_at_[i];
        out.pos_[t] = i + 1;
        out.links_[t] = links_[t];
        pos_[t] = 0;
        links_[t] = {};
    }
    while (pos_.size() > 1 && pos_.back() == 0) {
        pos_.pop_back();
        links_.pop_back();
    }
    size_ = keep;
    out.size_ = moved;
    recount_tags();
    out.recount_tags();
    return out;
}

std::pair<Block, Block> split(Block b) {
    Block upper = b.split_off();
    return {std::move(b), std::move(upper)};
}

void Block::shift_children(unsigned j) {
    Lane* lanes[] = {&c1_, &c2_, &tl_, &tr_};
    for (Lane* lane : lanes) {
        for (std::uint32_t w = 0; w * 8 < size_; ++w) {
            const std::uint64_t word = pk::load(&(*lane)[w * 8]);
            if (pk::eq(word, pk::kLaneMax) & pk::ge(word, j + 1) & pk::first_lanes(8))
                throw usage_error("child index would exceed lane width");
        }
    }
    bool tags_moved = false;
    for (Lane* lane : lanes) {
        for (std::uint32_t w = 0; w * 8 < size_; ++w) {
            const std::uint64_t word = pk::load(&(*lane)[w * 8]);
            const std::uint64_t bump = pk::ge(word, j + 1) & pk::first_lanes(std::min<std::uint32_t>(8, size_ - w * 8));
            pk::store(&(*lane)[w * 8], word + (bump >> 7));
            tags_moved |= bump != 0 && (lane == &tl_ || lane == &tr_);
        }
    }
    if (tags_moved) recount_tags();
}

bool Block::has_parent_link(std::uint32_t pos) const {
    check_pos(pos);
    return plink_[pos - 1] != 0;
}

Position Block::parent_target(std::uint32_t pos) const {
    if (!has_parent_link(pos)) throw usage_error("entry has no parent link");
    return links_[stamp_at_[pos - 1]].parent;
}

void Block::set_parent_link(std::uint32_t pos, Position target) {
    check_pos(pos);
    plink_[pos - 1] = 0x80;
    links_[stamp_at_[pos - 1]].parent = target;
}

void Block::clear_parent_link(std::uint32_t pos) {
    check_pos(pos);
    plink_[pos - 1] = 0;
    links_[stamp_at_[pos - 1]].parent = {};
}

bool Block::has_child_link(std::uint32_t pos, unsigned slot) const {
    check_pos(pos);
    return (slot == 0 ? clink1_ : clink2_)[pos - 1] != 0;
}

Position Block::child_target(std::uint32_t pos, unsigned slot) const {
    if (!has_child_link(pos, slot)) throw usage_error("entry has no child link");
    return links_[stamp_at_[pos - 1]].child[slot];
}

void Block::set_child_link(std::uint32_t pos, unsigned slot, Position target) {
    check_pos(pos);
    (slot == 0 ? clink1_ : clink2_)[pos - 1] = 0x80;
    links_[stamp_at_[pos - 1]].child[slot] = target;
}

void Block::clear_child_link(std::uint32_t pos, unsigned slot) {
    check_pos(pos);
    (slot == 0 ? clink1_ : clink2_)[pos - 1] = 0;
    links_[stamp_at_[pos - 1]].child[slot] = {};
}

void Block::clear_child_links_for(unsigned f) {
    for (std::uint32_t p = 1; p <= size_; ++p) {
        if (c1_[p - 1] == f) clear_child_link(p, 0);
        if (c2_[p - 1] == f) clear_child_link(p, 1);
    }
}

void Block::clear_parent_links() {
    for (std::uint32_t p = 1; p <= size_; ++p) clear_parent_link(p);
}

std::optional<std::uint32_t> Block::last_parent_link(std::uint32_t pos) const {
    check_pos(pos);
    for (std::uint32_t w = (pos - 1) / 8 + 1; w-- > 0;) {
        std::uint64_t m = pk::load(&plink_[w * 8]) & pk::first_lanes(std::min<std::uint32_t>(8, pos - w * 8));
        ++word_reads_;
        if (m) return w * 8 + pk::last_lane(m) + 1;
    }
    return std::nullopt;
}

std::optional<std::uint32_t> Block::last_child_link(std::uint32_t pos, unsigned f) const {
    check_pos(pos);
    for (std::uint32_t w = (pos - 1) / 8 + 1; w-- > 0;) {
        std::uint64_t m = (pk::eq(pk::load(&c1_[w * 8]), f) & pk::load(&clink1_[w * 8])) |
                          (pk::eq(pk::load(&c2_[w * 8]), f) & pk::load(&clink2_[w * 8]));
        m &= pk::first_lanes(std::min<std::uint32_t>(8, pos - w * 8));
        ++word_reads_;
        if (m) return w * 8 + pk::last_lane(m) + 1;
    }
    return std::nullopt;
}

}  // namespace stab
