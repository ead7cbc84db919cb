#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace stab {

/// Dynamic subset of [0, 2^bits) with predecessor/successor in O(log log U)
/// and O(1) minimum/maximum. A van Emde Boas tree: the minimum of every
/// node is kept out of its clusters, clusters are allocated lazily and
/// universes of at most 64 collapse into a single word. Sets that never
/// held more than kSmallMax elements live in a sorted array instead.
class SuccSet {
public:
    explicit SuccSet(unsigned universe_bits = 32);
    SuccSet(const SuccSet& other);
    SuccSet& operator=(const SuccSet& other);
    SuccSet(SuccSet&&) noexcept;
    SuccSet& operator=(SuccSet&&) noexcept;
    ~SuccSet();

    /// Returns false if `x` was already present.
    bool insert(std::uint64_t x);
    /// Throws usage_error if `x` is absent.
    void erase(std::uint64_t x);
    bool contains(std::uint64_t x) const;

    /// Largest element <= x.
    std::optional<std::uint64_t> pred(std::uint64_t x) const;
    /// Smallest element >= x.
    std::optional<std::uint64_t> succ(std::uint64_t x) const;
    std::optional<std::uint64_t> max() const;
    std::optional<std::uint64_t> min() const;

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    unsigned universe_bits() const { return bits_; }
    std::uint64_t universe() const { return std::uint64_t{1} << bits_; }

    /// Re-creates the structure over a larger universe, keeping the elements.
    void grow(unsigned universe_bits);
    std::vector<std::uint64_t> elements() const;

    /// Number of node inspections performed by max()/min(); one per call.
    std::uint64_t extreme_probes() const { return extreme_probes_; }

    struct Node;
    static constexpr std::size_t kSmallMax = 32;

private:
    void check(std::uint64_t x) const;

    unsigned bits_;
    std::unique_ptr<Node> root_;  // null while the array form is in use
    std::vector<std::uint64_t> small_;
    std::size_t size_ = 0;
    mutable std::uint64_t extreme_probes_ = 0;
};

}  // namespace stab
