#pragma once

// Dynamic stabbing-count. Uses the same base tree and the same node sets as
// StabMax, but each internal node only keeps how many live intervals cover
// each run of children, and each leaf keeps a small rank table.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stab/base_tree.hpp"
#include "stab/core_types.hpp"

namespace stab {

/// Per-node counter: A[f] is the number of intervals covering child f as of
/// the last local rebuild; recent updates sit in small per-pair deltas.
class CountNode {
public:
    CountNode() = default;
    CountNode(unsigned width, unsigned threshold);

    /// Replaces the true pair counts (row-major over l <= r) and rebuilds.
    void assign(const std::vector<std::uint64_t>& pair_counts);
    /// Adds delta to |S_lr|; rebuilds once `threshold` updates accumulated.
    void update(unsigned l, unsigned r, int delta);
    std::uint64_t count(unsigned f) const;
    void rebuild();

    unsigned width() const { return width_; }
    unsigned threshold() const { return threshold_; }
    unsigned pending() const { return updates_; }
    std::uint64_t base(unsigned f) const { return a_.at(f - 1); }
    int delta(unsigned l, unsigned r) const { return m_[pair_index(l, r)]; }
    std::uint64_t pair_count(unsigned l, unsigned r) const { return sizes_[pair_index(l, r)]; }
    std::uint64_t rebuilds() const { return rebuilds_; }

private:
    std::size_t pair_index(unsigned l, unsigned r) const;

    unsigned width_ = 0;
    unsigned threshold_ = 1;
    unsigned updates_ = 0;
    std::vector<std::uint64_t> sizes_;  // true |S_lr|
    std::vector<std::uint64_t> a_;
    std::vector<int> m_;
    std::vector<std::uint32_t> touched_;  // pair indices with nonzero delta
    std::uint64_t rebuilds_ = 0;
};

/// Leaf table: sorted distinct endpoints E and the stabbed count for every
/// rank region (before E[0], at E[0], between E[0] and E[1], ...).
class LeafCounter {
public:
    void build(const std::vector<Range>& members);
    std::uint64_t count(Coord x) const;
    const std::vector<Coord>& endpoints() const { return e_; }

private:
    std::vector<Coord> e_;
    std::vector<std::uint64_t> c_{0};
};

struct SumStats {
    std::uint64_t queries = 0;
    std::uint64_t nodes_visited = 0;
    std::uint64_t max_nodes_per_query = 0;
    std::uint64_t local_rebuilds = 0;
    std::uint64_t node_splits = 0;
    std::uint64_t rebuilds = 0;
};

class StabSum {
public:
    explicit StabSum(TreeParams params = {});

    void insert(const Interval& s);
    void erase(IntervalId id);
    bool contains_id(IntervalId id) const { return live_.count(id) != 0; }
    std::uint64_t count(Coord x);

    void global_rebuild();

    std::size_t size() const { return live_.size(); }
    unsigned height() const { return tree_.height(); }
    unsigned phi() const { return tree_.phi(); }
    unsigned delta_threshold() const { return threshold_; }
    const BaseTree& tree() const { return tree_; }
    const SumStats& stats() const { return stats_; }
    const RebuildSchedule& schedule() const { return schedule_; }
    const CountNode& count_node(NodeId u) const { return nodes_.at(u).cn; }

    /// Checks held sets, CountNode identities and leaf tables; empty when all hold.
    std::vector<std::string> audit() const;

private:
    struct NodeData {
        std::unordered_set<std::uint32_t> held;  // live uids whose list would include this node
        CountNode cn;
        LeafCounter leaf;
    };

    void ensure_nodes();
    void rebuild_node(NodeId u);
    void refresh_leaf(NodeId u);
    void split_node(NodeId u);
    void rebuild_from(std::vector<Interval> live);

    TreeParams params_;
    BaseTree tree_;
    unsigned threshold_ = 1;
    std::vector<NodeData> nodes_;
    std::vector<Interval> recs_;  // by uid
    std::unordered_map<IntervalId, std::uint32_t> live_;
    RebuildSchedule schedule_;
    SumStats stats_;
};

}  // namespace stab
