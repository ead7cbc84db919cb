#include "stab/succ_set.hpp"

#include <algorithm>
#include <bit>
#include <unordered_map>

#include "stab/core_types.hpp"

namespace stab {

struct SuccSet::Node {
    unsigned bits;
    bool empty = true;
    std::uint64_t mn = 0;
    std::uint64_t mx = 0;
    std::uint64_t word = 0;  // only for bits <= 6
    std::unique_ptr<Node> summary;
    std::unordered_map<std::uint64_t, std::unique_ptr<Node>> clusters;

    explicit Node(unsigned b) : bits(b) {}

    Node(const Node& o) : bits(o.bits), empty(o.empty), mn(o.mn), mx(o.mx), word(o.word) {
        if (o.summary) summary = std::make_unique<Node>(*o.summary);
        for (const auto& [k, c] : o.clusters) clusters.emplace(k, std::make_unique<Node>(*c));
    }

    bool leaf() const { return bits <= 6; }
    unsigned lo_bits() const { return bits / 2; }
    std::uint64_t high(std::uint64_t x) const { return x >> lo_bits(); }
    std::uint64_t low(std::uint64_t x) const { return x & ((std::uint64_t{1} << lo_bits()) - 1); }
    std::uint64_t index(std::uint64_t h, std::uint64_t l) const { return (h << lo_bits()) | l; }
    std::uint64_t hi_universe() const { return std::uint64_t{1} << (bits - lo_bits()); }

    bool is_empty() const { return leaf() ? word == 0 : empty; }
    std::uint64_t min_elem() const {
        return leaf() ? static_cast<std::uint64_t>(std::countr_zero(word)) : mn;
    }
    std::uint64_t max_elem() const {
        return leaf() ? static_cast<std::uint64_t>(63 - std::countl_zero(word)) : mx;
    }

    bool insert(std::uint64_t x) {
        if (leaf()) {
            const std::uint64_t bit = std::uint64_t{1} << x;
            if (word & bit) return false;
            word |= bit;
            return true;
        }
        if (empty) {
            empty = false;
            mn = mx = x;
            return true;
        }
        if (x == mn) return false;
        if (x < mn) std::swap(x, mn);
        const std::uint64_t h = high(x), l = low(x);
        auto& c = clusters[h];
        bool inserted;
        if (!c) {
            c = std::make_unique<Node>(lo_bits());
            if (!summary) summary = std::make_unique<Node>(bits - lo_bits());
            summary->insert(h);
            inserted = c->insert(l);
        } else {
            inserted = c->insert(l);
        }
        if (x > mx) mx = x;
        return inserted;
    }

    bool contains(std::uint64_t x) const {
        if (leaf()) return (word >> x) & 1U;
        if (empty) return false;
        if (x == mn || x == mx) return true;
        auto it = clusters.find(high(x));
        return it != clusters.end() && it->second->contains(low(x));
    }

    bool erase(std::uint64_t x) {
        if (leaf()) {
            const std::uint64_t bit = std::uint64_t{1} << x;
            if (!(word & bit)) return false;
            word &= ~bit;
            return true;
        }
        if (empty) return false;
        if (mn == mx) {
            if (x != mn) return false;
            empty = true;
            return true;
        }
        if (x == mn) {
            const std::uint64_t first = summary->min_elem();
            x = index(first, clusters.at(first)->min_elem());
            mn = x;
        }
        const std::uint64_t h = high(x);
        auto it = clusters.find(h);
        if (it == clusters.end() || !it->second->erase(low(x))) return false;
        if (it->second->is_empty()) {
            clusters.erase(it);
            summary->erase(h);
            if (x == mx) {
                if (summary->is_empty()) {
                    mx = mn;
                } else {
                    const std::uint64_t last = summary->max_elem();
                    mx = index(last, clusters.at(last)->max_elem());
                }
            }
        } else if (x == mx) {
            mx = index(h, it->second->max_elem());
        }
        return true;
    }

    std::optional<std::uint64_t> pred(std::uint64_t x) const {
        if (leaf()) {
            const std::uint64_t m = x >= 63 ? word : word & ((std::uint64_t{2} << x) - 1);
            if (!m) return std::nullopt;
            return static_cast<std::uint64_t>(63 - std::countl_zero(m));
        }
        if (empty || x < mn) return std::nullopt;
        if (x >= mx) return mx;
        const std::uint64_t h = high(x), l = low(x);
        auto it = clusters.find(h);
        if (it != clusters.end() && it->second->min_elem() <= l)
            return index(h, *it->second->pred(l));
        if (h > 0 && summary) {
            if (auto ph = summary->pred(h - 1)) return index(*ph, clusters.at(*ph)->max_elem());
        }
        return mn;
    }

    std::optional<std::uint64_t> succ(std::uint64_t x) const {
        if (leaf()) {
            if (x > 63) return std::nullopt;
            const std::uint64_t m = word & ~((std::uint64_t{1} << x) - 1);
            if (!m) return std::nullopt;
            return static_cast<std::uint64_t>(std::countr_zero(m));
        }
        if (empty || x > mx) return std::nullopt;
        if (x <= mn) return mn;
        const std::uint64_t h = high(x), l = low(x);
        auto it = clusters.find(h);
        if (it != clusters.end() && l <= it->second->max_elem())
            return index(h, *it->second->succ(l));
        if (h + 1 < hi_universe() && summary) {
            if (auto sh = summary->succ(h + 1)) return index(*sh, clusters.at(*sh)->min_elem());
        }
        return std::nullopt;
    }

    void collect(std::uint64_t base, std::vector<std::uint64_t>& out) const {
        if (leaf()) {
            for (std::uint64_t w = word; w; w &= w - 1)
                out.push_back(base + static_cast<std::uint64_t>(std::countr_zero(w)));
            return;
        }
        if (empty) return;
        out.push_back(base + mn);
        if (!summary) return;
        std::vector<std::uint64_t> hs;
        summary->collect(0, hs);
        for (auto h : hs) clusters.at(h)->collect(base + index(h, 0), out);
    }
};

SuccSet::SuccSet(unsigned universe_bits) : bits_(universe_bits) {
    if (universe_bits < 1 || universe_bits > 63) throw usage_error("universe bits out of range");
}

SuccSet::SuccSet(const SuccSet& o)
    : bits_(o.bits_), root_(o.root_ ? std::make_unique<Node>(*o.root_) : nullptr), small_(o.small_), size_(o.size_) {}

SuccSet& SuccSet::operator=(const SuccSet& o) {
    if (this != &o) {
        bits_ = o.bits_;
        root_ = o.root_ ? std::make_unique<Node>(*o.root_) : nullptr;
        small_ = o.small_;
        size_ = o.size_;
    }
    return *this;
}

SuccSet::SuccSet(SuccSet&&) noexcept = default;
SuccSet& SuccSet::operator=(SuccSet&&) noexcept = default;
SuccSet::~SuccSet() = default;

void SuccSet::check(std::uint64_t x) const {
    if (x >= universe()) throw usage_error("element outside universe");
}

bool SuccSet::insert(std::uint64_t x) {
    check(x);
    if (!root_) {
        auto it = std::lower_bound(small_.begin(), small_.end(), x);
        if (it != small_.end() && *it == x) return false;
        small_.insert(it, x);
        ++size_;
        if (small_.size() > kSmallMax) {
            root_ = std::make_unique<Node>(bits_);
            for (auto e : small_) root_->insert(e);
            small_.clear();
            small_.shrink_to_fit();
        }
        return true;
    }
    const bool inserted = root_->insert(x);
    size_ += inserted;
    return inserted;
}

void SuccSet::erase(std::uint64_t x) {
    check(x);
    if (!root_) {
        auto it = std::lower_bound(small_.begin(), small_.end(), x);
        if (it == small_.end() || *it != x) throw usage_error("erase of absent element");
        small_.erase(it);
        --size_;
        return;
    }
    if (!root_->erase(x)) throw usage_error("erase of absent element");
    if (--size_ == 0) root_.reset();
}

bool SuccSet::contains(std::uint64_t x) const {
    if (x >= universe()) return false;
    if (!root_) return std::binary_search(small_.begin(), small_.end(), x);
    return root_->contains(x);
}

std::optional<std::uint64_t> SuccSet::pred(std::uint64_t x) const {
    if (x >= universe()) x = universe() - 1;
    if (!root_) {
        auto it = std::upper_bound(small_.begin(), small_.end(), x);
        if (it == small_.begin()) return std::nullopt;
        return *std::prev(it);
    }
    return root_->pred(x);
}

std::optional<std::uint64_t> SuccSet::succ(std::uint64_t x) const {
    if (x >= universe()) return std::nullopt;
    if (!root_) {
        auto it = std::lower_bound(small_.begin(), small_.end(), x);
        if (it == small_.end()) return std::nullopt;
        return *it;
    }
    return root_->succ(x);
}

std::optional<std::uint64_t> SuccSet::max() const {
    ++extreme_probes_;
    if (size_ == 0) return std::nullopt;
    return root_ ? root_->max_elem() : small_.back();
}

std::optional<std::uint64_t> SuccSet::min() const {
    ++extreme_probes_;
    if (size_ == 0) return std::nullopt;
    return root_ ? root_->min_elem() : small_.front();
}

std::vector<std::uint64_t> SuccSet::elements() const {
    if (!root_) return small_;
    std::vector<std::uint64_t> out;
    out.reserve(size_);
    root_->collect(0, out);
    return out;
}

void SuccSet::grow(unsigned universe_bits) {
    if (universe_bits < bits_) throw usage_error("grow cannot shrink the universe");
    bits_ = universe_bits;
    if (!root_) return;
    auto elems = elements();
    root_ = std::make_unique<Node>(bits_);
    for (auto e : elems) root_->insert(e);
}

}  // namespace stab
