#pragma once

// Dynamic stabbing-max over prioritized intervals, optionally refined by up
// to three small bounded coordinates per interval ((1,g)-stabbing).
//
// Every base-tree node u keeps Comp(u): the intervals whose endpoint search
// paths pass through u, in priority order, split into blocks that carry
// labels from an order-maintenance list. An entry records which children
// also hold the interval (its identifier) and which run of children l..r it
// covers inside u (its tag). A query walks from the leaf of x to the root
// and carries the position of the best interval found so far; positions are
// translated between levels through sparse cross-level links plus in-block
// rank/select, and compared by block label, then in-block position.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stab/base_tree.hpp"
#include "stab/block.hpp"
#include "stab/core_types.hpp"
#include "stab/max_index.hpp"
#include "stab/order_labels.hpp"
#include "stab/succ_set.hpp"

namespace stab {

using Box = std::array<std::uint8_t, kMaxBoundedDims>;

/// An interval with its bounded box, for bulk construction.
struct BoxedInterval {
    Interval s;
    Box lo{}, hi{};
};

struct StabMaxParams {
    TreeParams tree;
    unsigned bounded_dims = 0;
    /// Exclusive bound on bounded coordinates (at most 128).
    unsigned beta = 128;

    void validate() const;
};

struct StabStats {
    std::uint64_t queries = 0;
    std::uint64_t nodes_visited = 0;
    std::uint64_t max_nodes_per_query = 0;
    std::uint64_t block_probes = 0;
    std::uint64_t max_probes_per_node = 0;
    std::uint64_t block_insertions = 0;
    std::uint64_t relabels = 0;
    std::uint64_t block_splits = 0;
    std::uint64_t node_splits = 0;
    std::uint64_t rebuilds = 0;
    /// Largest block count of any single node list seen so far.
    std::uint64_t max_blocks = 0;
};

class StabMax {
public:
    explicit StabMax(StabMaxParams params = {});

    StabMax(const StabMax&) = delete;
    StabMax& operator=(const StabMax&) = delete;
    StabMax(StabMax&&) noexcept;
    StabMax& operator=(StabMax&&) noexcept;
    ~StabMax();

    /// `lo`/`hi` give the bounded box, one byte per bounded dimension.
    void insert(const Interval& s, std::span<const std::uint8_t> lo = {}, std::span<const std::uint8_t> hi = {});
    void erase(IntervalId id);
    /// Replaces the contents with `items` in one bulk construction; same
    /// checks as insert().
    void build(const std::vector<BoxedInterval>& items);
    bool contains_id(IntervalId id) const { return live_.count(id) != 0; }
    MaybeHit query(Coord x, std::span<const std::uint8_t> h = {});

    void global_rebuild();

    std::size_t size() const { return live_.size(); }
    unsigned height() const { return tree_.height(); }
    unsigned phi() const { return tree_.phi(); }
    std::uint32_t block_capacity() const { return block_max_; }
    const BaseTree& tree() const { return tree_; }
    const StabStats& stats() const { return stats_; }
    const RebuildSchedule& schedule() const { return schedule_; }
    /// Nodes visited by the most recent query.
    unsigned last_query_nodes() const { return last_nodes_; }

    std::size_t total_entries() const;
    std::size_t dead_entries() const;

    // Cross-level navigation, exposed for tests. Positions name entries of
    // the node's list.
    Position nav_up(NodeId u, Position p);
    Position nav_down(NodeId u, Position p, unsigned f);
    std::optional<Position> child_pred(NodeId u, Position p, unsigned f);
    /// Interval stored at a position of u's list.
    IntervalId id_at(NodeId u, Position p) const;
    /// Every entry of u's list in order.
    std::vector<Position> positions(NodeId u) const;

    /// Checks every structural invariant; empty when all hold.
    std::vector<std::string> audit() const;

private:
    struct Record {
        Interval s;
        Box lo{}, hi{};
        bool live = false;
    };
    struct NodeState;

    using OrderKey = std::tuple<Priority, IntervalId, std::uint32_t>;

    NodeState& st(NodeId u);
    const NodeState& st(NodeId u) const;
    OrderKey order_key(std::uint32_t uid) const;
    std::uint32_t in_block(NodeId u, Position p) const;
    std::optional<Position> prev_position(NodeId u, Position p) const;
    bool before(NodeId u, Position a, Position b) const;
    std::uint32_t uid_at(NodeId u, Position p) const;
    Tag tag_for(NodeId u, const Record& r) const;
    Identifier ident_for(NodeId u, const Record& r) const;
    bool box_holds(const Record& r, std::span<const std::uint8_t> h) const;

    Position insert_entry(NodeId u, std::optional<Position> after, std::uint32_t uid, Tag tag);
    void split_block(NodeId u, BlockHandle b);
    void apply_relabels(NodeId u, const std::vector<Relabel>& rel);
    void refresh_key(NodeId u, TagKey k);
    void add_label(NodeId u, TagKey k, BlockHandle b);
    void drop_label(NodeId u, TagKey k, BlockHandle b);
    void link(NodeId parent, Position pp, unsigned f, NodeId child, Position cp);
    void attach_child(NodeId w, Position pw, unsigned f, NodeId v, Position pv);

    void handle_splits(NodeId leaf);
    void split_node(NodeId u);
    void build_list(NodeId u, const std::vector<std::uint32_t>& uids);
    std::vector<unsigned> recompute_in_place(NodeId w, unsigned k);
    void rebuild_summaries(NodeId u);
    void relink_all(NodeId w);
    void relink_children(NodeId w, const std::vector<unsigned>& only);
    void ensure_states();
    void rebuild_from(std::vector<Record> live);

    std::optional<Position> leaf_scan(NodeId leaf, Coord x, std::span<const std::uint8_t> h);
    void note_probes(std::uint64_t n);

    StabMaxParams params_;
    BaseTree tree_;
    std::uint32_t block_max_ = 8;
    std::vector<NodeState> states_;
    std::vector<Record> recs_;
    std::unordered_map<IntervalId, std::uint32_t> live_;
    std::vector<Position> root_pos_;  // by uid, live or dead
    std::map<OrderKey, std::uint32_t> order_;  // every uid since the last rebuild
    RebuildSchedule schedule_;
    StabStats stats_;
    unsigned last_nodes_ = 0;
    std::uint64_t probe_acc_ = 0;
};

}  // namespace stab
