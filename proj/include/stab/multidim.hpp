#pragma once

// (d,g)-stabbing over rectangles with d unbounded and g bounded coordinates.
// Layout of a rectangle or query point: dims[0..d) unbounded, then g bounded
// coordinates in [0, beta). For d = 1 this is StabMax with bounded boxes.
// For d > 1 a base tree is built on the last unbounded coordinate; every
// internal node u owns a (d-1, g+1) structure holding the rectangles of u's
// list that cover a run of u's children, with that coordinate replaced by
// the covered child range l..r. A query at u asks with the child index f
// that leads towards the point.

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stab/base_tree.hpp"
#include "stab/core_types.hpp"
#include "stab/stab_max.hpp"

namespace stab {

struct MultiParams {
    unsigned d = 2;
    unsigned g = 0;
    unsigned beta = 8;
    TreeParams tree{8, 0.125, 0};

    void validate() const;
};

class MultiStab {
public:
    explicit MultiStab(MultiParams params = {});
    MultiStab(MultiStab&&) noexcept;
    MultiStab& operator=(MultiStab&&) noexcept;
    ~MultiStab();

    /// Replaces the contents with `items` in one bulk construction.
    void build(std::vector<Rectangle> items);
    void insert(const Rectangle& s);
    void erase(IntervalId id);
    bool contains_id(IntervalId id) const { return live_.count(id) != 0; }
    MaybeHit query(const QueryPoint& q);

    std::size_t size() const { return live_.size(); }
    const MultiParams& params() const { return params_; }
    /// Height of the tree on the last unbounded coordinate.
    unsigned height() const;
    /// Nodes visited by the last query, summed over every level of nesting.
    std::uint64_t last_query_visits() const { return last_visits_; }
    std::uint64_t rebuilds() const { return rebuilds_; }

    std::vector<std::string> audit() const;

private:
    unsigned inner_beta() const;
    Rectangle reduce(const Rectangle& s, unsigned l, unsigned r) const;
    void rebuild_node(NodeId u);
    void split_node(NodeId u);
    void build_from(std::vector<Rectangle> live);
    void check_rect(const Rectangle& s) const;

    MultiParams params_;
    std::unique_ptr<StabMax> flat_;  // d == 1

    // d > 1
    BaseTree tree_;
    std::vector<std::unordered_set<std::uint32_t>> held_;
    std::vector<std::unique_ptr<MultiStab>> inner_;
    RebuildSchedule schedule_;
    std::uint64_t rebuilds_ = 0;

    std::vector<Rectangle> recs_;  // by uid
    std::unordered_map<IntervalId, std::uint32_t> live_;
    std::uint64_t last_visits_ = 0;
};

}  // namespace stab
