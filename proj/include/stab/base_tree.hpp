#pragma once

// Weight-balanced base tree over interval endpoints. Leaves hold endpoint
// slots; every node owns a closed coordinate range, siblings' ranges share
// only their boundary coordinates, and the root spans the whole coordinate
// line. A node at level l splits once its weight (endpoint slots below it)
// exceeds 2*phi^(l+1); a split never changes the ranges of other nodes.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stab/core_types.hpp"

namespace stab {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = UINT32_MAX;

struct TreeParams {
    /// Branching and leaf parameter; 0 derives max(2, ceil(log2(n)^epsilon)).
    unsigned fanout = 0;
    double epsilon = 0.125;
    /// Block capacity; 0 derives max(8, ceil(2*log2(n)^3)).
    std::uint32_t block_max = 0;

    unsigned resolved_fanout(std::size_t n_hat) const;
    std::uint32_t resolved_block_max(std::size_t n_hat) const;
    void validate() const;
};

/// Largest fanout a node can reach under the split discipline for `phi`.
unsigned max_children(unsigned phi);

struct EndpointSlot {
    Coord x = 0;
    std::uint32_t uid = 0;
    friend auto operator<=>(const EndpointSlot&, const EndpointSlot&) = default;
};

struct TreeNode {
    unsigned level = 0;
    NodeId parent = kNoNode;
    std::vector<NodeId> children;
    Range range{kMinCoord, kMaxCoord};
    std::uint64_t weight = 0;
    std::vector<EndpointSlot> slots;  // leaves only

    bool leaf() const { return level == 0; }
};

/// One node whose compact list holds an interval, as produced by assign().
struct NodeAssign {
    NodeId node = kNoNode;
    int parent = -1;            // index into the assignment vector
    unsigned child_index = 0;   // 1-based position under the parent node
    unsigned l = 0, r = 0;      // covered children, 0/0 when none
    unsigned children[2] = {0, 0};  // children that also hold the interval

    bool covers_children() const { return l != 0; }
};

struct SplitEvent {
    NodeId parent = kNoNode;  // node that gained a child
    unsigned k = 0;           // 1-based index of `left` in parent
    NodeId left = kNoNode;    // keeps the split node's id
    NodeId right = kNoNode;   // new node
    bool new_root = false;    // parent was created by this split
};

/// Global rebuild after ceil(n_hat/2) deletions.
struct RebuildSchedule {
    std::size_t n_hat = 0;
    std::size_t deletions = 0;

    bool due() const { return deletions > 0 && deletions >= (n_hat + 1) / 2; }
    void record_deletion() { ++deletions; }
    void reset(std::size_t live) {
        n_hat = live;
        deletions = 0;
    }
};

class BaseTree {
public:
    explicit BaseTree(unsigned phi = 8);

    /// Bulk build over sorted endpoint slots.
    void build(std::vector<EndpointSlot> sorted_slots);

    unsigned phi() const { return phi_; }
    NodeId root() const { return root_; }
    unsigned height() const { return nodes_[root_].level + 1; }
    const TreeNode& node(NodeId id) const { return nodes_.at(id); }
    std::size_t node_count() const { return nodes_.size(); }
    std::uint64_t total_weight() const { return nodes_[root_].weight; }

    /// 1-based index of `child` under its parent.
    unsigned child_index(NodeId child) const;
    NodeId child(NodeId u, unsigned f) const { return nodes_.at(u).children.at(f - 1); }
    /// Child of u whose range receives x (last child with lo <= x).
    unsigned route(NodeId u, Coord x) const;

    NodeId locate(Coord x) const;
    /// Nodes from the root down to the leaf receiving x.
    std::vector<NodeId> path(Coord x) const;

    /// Every node whose list holds [left, right], parents before children.
    std::vector<NodeAssign> assign(Coord left, Coord right) const;
    /// Children of u fully inside [left, right] as a 1-based range (0/0 if none).
    std::pair<unsigned, unsigned> covered_children(NodeId u, Coord left, Coord right) const;
    /// Children of u that hold [left, right]; u must hold it.
    std::pair<unsigned, unsigned> path_children(NodeId u, Coord left, Coord right) const;
    bool holds(NodeId u, Coord left, Coord right) const;

    NodeId insert_slot(EndpointSlot slot);
    /// Overweight nodes on the path from `leaf` to the root, bottom-up.
    std::vector<NodeId> split_check(NodeId leaf) const;
    bool overweight(NodeId u) const;
    SplitEvent split(NodeId u);

    std::uint64_t nominal_weight(unsigned level) const;
    std::uint64_t split_threshold(unsigned level) const { return 2 * nominal_weight(level); }

    std::vector<NodeId> leaves() const;
    /// Checks range partition, weights and the weight-balance band.
    std::vector<std::string> audit() const;

private:
    NodeId make_node(unsigned level);
    NodeId build_level(const std::vector<EndpointSlot>& slots, std::size_t begin, std::size_t end,
                       unsigned level, NodeId parent);

    unsigned phi_;
    std::vector<TreeNode> nodes_;
    NodeId root_ = kNoNode;
};

}  // namespace stab
