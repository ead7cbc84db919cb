#pragma once

// Order maintenance over a sequence of blocks: every live handle carries an
// integer label and labels increase along the list. Insertion between two
// adjacent labels redistributes the smallest enclosing aligned label range
// whose density is under its threshold (list labeling with range
// redistribution). Per-child mark sets answer "latest earlier block holding
// an element of child f".

#include <algorithm>
#include <cassert>
#include <compare>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "stab/core_types.hpp"

namespace stab {

struct BlockHandle {
    std::uint32_t index = UINT32_MAX;
    std::uint32_t gen = 0;

    bool valid() const { return index != UINT32_MAX; }
    friend bool operator==(const BlockHandle&, const BlockHandle&) = default;
};

struct Relabel {
    BlockHandle handle;
    std::uint64_t old_label;
    std::uint64_t new_label;
};

struct LabelStats {
    std::uint64_t insertions = 0;
    std::uint64_t relabel_touches = 0;
    std::uint64_t redistributions = 0;
};

template <class T>
class LabeledList {
public:
    static constexpr unsigned kDefaultLabelBits = 32;

    explicit LabeledList(unsigned width = 0, unsigned label_bits = kDefaultLabelBits)
        : bits_(label_bits), marks_(width) {
        if (label_bits < 2 || label_bits > 62) throw usage_error("label bits out of range");
    }

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    unsigned width() const { return static_cast<unsigned>(marks_.size()); }
    std::uint64_t universe() const { return std::uint64_t{1} << bits_; }
    const LabelStats& stats() const { return stats_; }

    /// Changes the number of child indices; all marks are dropped.
    void reset_width(unsigned width) { marks_.assign(width, {}); }

    /// Inserts `value` right after `after` (or at the front when `after` is
    /// empty). Labels of other blocks that had to move are appended to
    /// `relabeled` when given.
    BlockHandle insert_after(std::optional<BlockHandle> after, T value,
                             std::vector<Relabel>* relabeled = nullptr) {
        std::uint32_t prev = kNil, next = head_;
        if (after) {
            check(*after);
            prev = after->index;
            next = slots_[prev].next;
        }
        const std::uint32_t idx = allocate(std::move(value));
        Slot& s = slots_[idx];
        s.prev = prev;
        s.next = next;
        if (prev != kNil) slots_[prev].next = idx; else head_ = idx;
        if (next != kNil) slots_[next].prev = idx; else tail_ = idx;
        ++size_;
        ++stats_.insertions;

        const std::uint64_t lo = prev == kNil ? 0 : slots_[prev].label + 1;
        const std::uint64_t hi = next == kNil ? universe() : slots_[next].label;
        if (hi > lo) {
            s.label = lo + (hi - lo) / 2;
            by_label_[s.label] = idx;
        } else {
            redistribute(idx, relabeled);
        }
        return {idx, s.gen};
    }

    void remove(BlockHandle h) {
        check(h);
        Slot& s = slots_[h.index];
        for (auto& m : marks_) erase_mark(m, h.index);
        if (s.prev != kNil) slots_[s.prev].next = s.next; else head_ = s.next;
        if (s.next != kNil) slots_[s.next].prev = s.prev; else tail_ = s.prev;
        by_label_.erase(s.label);
        s.live = false;
        ++s.gen;
        s.value = T{};
        free_.push_back(h.index);
        --size_;
    }

    void clear() {
        slots_.clear();
        free_.clear();
        by_label_.clear();
        for (auto& m : marks_) m.clear();
        head_ = tail_ = kNil;
        size_ = 0;
    }

    std::strong_ordering compare(BlockHandle a, BlockHandle b) const {
        check(a);
        check(b);
        return slots_[a.index].label <=> slots_[b.index].label;
    }

    std::uint64_t label(BlockHandle h) const {
        check(h);
        return slots_[h.index].label;
    }

    T& operator[](BlockHandle h) {
        check(h);
        return slots_[h.index].value;
    }
    const T& operator[](BlockHandle h) const {
        check(h);
        return slots_[h.index].value;
    }

    bool is_live(BlockHandle h) const {
        return h.index < slots_.size() && slots_[h.index].live && slots_[h.index].gen == h.gen;
    }

    std::optional<BlockHandle> front() const { return handle_of(head_); }
    std::optional<BlockHandle> back() const { return handle_of(tail_); }
    std::optional<BlockHandle> next(BlockHandle h) const {
        check(h);
        return handle_of(slots_[h.index].next);
    }
    std::optional<BlockHandle> prev(BlockHandle h) const {
        check(h);
        return handle_of(slots_[h.index].prev);
    }

    std::optional<BlockHandle> find_label(std::uint64_t label) const {
        auto it = by_label_.find(label);
        if (it == by_label_.end()) return std::nullopt;
        return handle_of(it->second);
    }

    std::vector<BlockHandle> handles() const {
        std::vector<BlockHandle> out;
        out.reserve(size_);
        for (std::uint32_t i = head_; i != kNil; i = slots_[i].next) out.push_back({i, slots_[i].gen});
        return out;
    }

    // ---- per-child marks ---------------------------------------------------

    void mark(BlockHandle h, unsigned f) {
        check(h);
        auto& m = marks_at(f);
        auto it = std::lower_bound(m.begin(), m.end(), h.index, by_label());
        if (it != m.end() && *it == h.index) return;
        m.insert(it, h.index);
    }

    void unmark(BlockHandle h, unsigned f) {
        check(h);
        erase_mark(marks_at(f), h.index);
    }

    bool is_marked(BlockHandle h, unsigned f) const {
        check(h);
        const auto& m = marks_at(f);
        auto it = std::lower_bound(m.begin(), m.end(), h.index, by_label());
        return it != m.end() && *it == h.index;
    }

    /// Latest block strictly before `h` that is marked for child `f`.
    std::optional<BlockHandle> pred_marked(BlockHandle h, unsigned f) const {
        check(h);
        const auto& m = marks_at(f);
        auto it = std::lower_bound(m.begin(), m.end(), h.index, by_label());
        if (it == m.begin()) return std::nullopt;
        return handle_of(*std::prev(it));
    }

    std::size_t mark_count(unsigned f) const { return marks_at(f).size(); }

private:
    static constexpr std::uint32_t kNil = UINT32_MAX;

    struct Slot {
        std::uint64_t label = 0;
        std::uint32_t prev = kNil;
        std::uint32_t next = kNil;
        std::uint32_t gen = 0;
        bool live = false;
        T value{};
    };

    struct LabelLess {
        const std::vector<Slot>* slots;
        bool operator()(std::uint32_t a, std::uint32_t b) const {
            return (*slots)[a].label < (*slots)[b].label;
        }
    };
    LabelLess by_label() const { return {&slots_}; }

    void check(BlockHandle h) const {
        if (!is_live(h)) throw usage_error("stale block handle");
    }

    std::vector<std::uint32_t>& marks_at(unsigned f) {
        if (f < 1 || f > marks_.size()) throw usage_error("child index out of range");
        return marks_[f - 1];
    }
    const std::vector<std::uint32_t>& marks_at(unsigned f) const {
        if (f < 1 || f > marks_.size()) throw usage_error("child index out of range");
        return marks_[f - 1];
    }

    void erase_mark(std::vector<std::uint32_t>& m, std::uint32_t idx) {
        auto it = std::lower_bound(m.begin(), m.end(), idx, by_label());
        if (it != m.end() && *it == idx) m.erase(it);
    }

    std::optional<BlockHandle> handle_of(std::uint32_t idx) const {
        if (idx == kNil) return std::nullopt;
        return BlockHandle{idx, slots_[idx].gen};
    }

    std::uint32_t allocate(T value) {
        std::uint32_t idx;
        if (!free_.empty()) {
            idx = free_.back();
            free_.pop_back();
        } else {
            idx = static_cast<std::uint32_t>(slots_.size());
            slots_.emplace_back();
        }
        Slot& s = slots_[idx];
        s.live = true;
        s.value = std::move(value);
        s.prev = s.next = kNil;
        return idx;
    }

    // Density threshold for an aligned range of 2^i labels: between 1 (i=1)
    // and 1/2 (i=bits).
    bool fits(std::uint64_t count, unsigned i) const {
        const double tau = 1.0 - 0.5 * static_cast<double>(i) / static_cast<double>(bits_);
        return static_cast<double>(count) <= tau * static_cast<double>(std::uint64_t{1} << i);
    }

    // `fresh` is linked but unlabeled. Its neighbours' labels are adjacent.
    void redistribute(std::uint32_t fresh, std::vector<Relabel>* relabeled) {
        const std::uint32_t anchor = slots_[fresh].prev != kNil ? slots_[fresh].prev : slots_[fresh].next;
        const std::uint64_t a = slots_[anchor].label;
        for (unsigned i = 1; i <= bits_; ++i) {
            const std::uint64_t span = std::uint64_t{1} << i;
            const std::uint64_t base = a & ~(span - 1);
            std::uint32_t first = fresh, last = fresh;
            std::uint64_t count = 1;
            for (std::uint32_t p = slots_[fresh].prev; p != kNil && slots_[p].label >= base; p = slots_[p].prev) {
                first = p;
                ++count;
            }
            for (std::uint32_t p = slots_[fresh].next; p != kNil && slots_[p].label < base + span; p = slots_[p].next) {
                last = p;
                ++count;
            }
            if (!fits(count, i)) continue;
            // Proportional spread: a truncated step would pack the entries
            // to the left and overfill the sub-ranges there.
            std::uint64_t k = 0;
            for (std::uint32_t p = first;; p = slots_[p].next) {
                Slot& s = slots_[p];
                const std::uint64_t next_label =
                    base + static_cast<std::uint64_t>((static_cast<unsigned __int128>(2 * k + 1) * span) / (2 * count));
                ++k;
                if (p != fresh) {
                    by_label_.erase(s.label);
                    if (s.label != next_label) {
                        if (relabeled) relabeled->push_back({{p, s.gen}, s.label, next_label});
                        ++stats_.relabel_touches;
                    }
                }
                s.label = next_label;
                if (p == last) break;
            }
            for (std::uint32_t p = first;; p = slots_[p].next) {
                by_label_[slots_[p].label] = p;
                if (p == last) break;
            }
            ++stats_.redistributions;
            return;
        }
        throw std::length_error("label universe exhausted");
    }

    unsigned bits_;
    std::vector<Slot> slots_;
    std::vector<std::uint32_t> free_;
    std::uint32_t head_ = kNil;
    std::uint32_t tail_ = kNil;
    std::size_t size_ = 0;
    std::vector<std::vector<std::uint32_t>> marks_;
    std::unordered_map<std::uint64_t, std::uint32_t> by_label_;
    LabelStats stats_;
};

}  // namespace stab
