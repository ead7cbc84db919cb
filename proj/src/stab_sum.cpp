#include "stab/stab_sum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stab {

// ---- CountNode -------------------------------------------------------------

CountNode::CountNode(unsigned width, unsigned threshold)
    : width_(width), threshold_(std::max(1u, threshold)) {
    const std::size_t pairs = static_cast<std::size_t>(width) * (width + 1) / 2;
    sizes_.assign(pairs, 0);
    m_.assign(pairs, 0);
    a_.assign(width, 0);
}

std::size_t CountNode::pair_index(unsigned l, unsigned r) const {
    if (l < 1 || l > r || r > width_) throw usage_error("child range out of bounds");
    return static_cast<std::size_t>(l - 1) * width_ - static_cast<std::size_t>(l - 1) * (l - 2) / 2 + (r - l);
}

void CountNode::assign(const std::vector<std::uint64_t>& pair_counts) {
    if (pair_counts.size() != sizes_.size()) throw usage_error("pair count arity mismatch");
    sizes_ = pair_counts;
    rebuild();
}

void CountNode::update(unsigned l, unsigned r, int delta) {
    const std::size_t k = pair_index(l, r);
    if (delta < 0 && sizes_[k] < static_cast<std::uint64_t>(-delta)) throw usage_error("pair count would go negative");
    sizes_[k] = static_cast<std::uint64_t>(static_cast<std::int64_t>(sizes_[k]) + delta);
    if (m_[k] == 0) touched_.push_back(static_cast<std::uint32_t>(k));
    m_[k] += delta;
    if (++updates_ >= threshold_) rebuild();
}

std::uint64_t CountNode::count(unsigned f) const {
    if (f < 1 || f > width_) throw usage_error("query child index out of range");
    std::int64_t total = static_cast<std::int64_t>(a_[f - 1]);
    for (std::uint32_t k : touched_) {
        // Decode the pair back from its index; touched_ stays tiny.
        unsigned l = 1;
        std::size_t start = 0;
        while (start + (width_ - l + 1) <= k) {
            start += width_ - l + 1;
            ++l;
        }
        const unsigned r = l + static_cast<unsigned>(k - start);
        if (l <= f && f <= r) total += m_[k];
    }
    return static_cast<std::uint64_t>(total);
}

void CountNode::rebuild() {
    std::fill(a_.begin(), a_.end(), 0);
    std::vector<std::int64_t> diff(width_ + 1, 0);
    std::size_t k = 0;
    for (unsigned l = 1; l <= width_; ++l)
        for (unsigned r = l; r <= width_; ++r, ++k) {
            diff[l - 1] += static_cast<std::int64_t>(sizes_[k]);
            diff[r] -= static_cast<std::int64_t>(sizes_[k]);
        }
    std::int64_t run = 0;
    for (unsigned f = 0; f < width_; ++f) {
        run += diff[f];
        a_[f] = static_cast<std::uint64_t>(run);
    }
    for (std::uint32_t t : touched_) m_[t] = 0;
    touched_.clear();
    updates_ = 0;
    ++rebuilds_;
}

// ---- LeafCounter -----------------------------------------------------------

void LeafCounter::build(const std::vector<Range>& members) {
    e_.clear();
    for (const Range& r : members) {
        e_.push_back(r.lo);
        e_.push_back(r.hi);
    }
    std::sort(e_.begin(), e_.end());
    e_.erase(std::unique(e_.begin(), e_.end()), e_.end());
    // Region 2i+1 is the point E[i]; region 2i is the gap just before it.
    std::vector<std::int64_t> diff(2 * e_.size() + 2, 0);
    auto rank = [&](Coord x) { return static_cast<std::size_t>(std::lower_bound(e_.begin(), e_.end(), x) - e_.begin()); };
    for (const Range& r : members) {
        ++diff[2 * rank(r.lo) + 1];
        --diff[2 * rank(r.hi) + 2];
    }
    c_.assign(2 * e_.size() + 1, 0);
    std::int64_t run = 0;
    for (std::size_t i = 0; i < c_.size(); ++i) {
        run += diff[i];
        c_[i] = static_cast<std::uint64_t>(run);
    }
}

std::uint64_t LeafCounter::count(Coord x) const {
    const auto it = std::lower_bound(e_.begin(), e_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - e_.begin());
    return (it != e_.end() && *it == x) ? c_[2 * i + 1] : c_[2 * i];
}

// ---- StabSum ---------------------------------------------------------------

StabSum::StabSum(TreeParams params) : params_(params) {
    params_.validate();
    rebuild_from({});
    stats_.rebuilds = 0;
}

void StabSum::ensure_nodes() {
    if (nodes_.size() < tree_.node_count()) nodes_.resize(tree_.node_count());
}

void StabSum::rebuild_node(NodeId u) {
    NodeData& d = nodes_[u];
    const TreeNode& node = tree_.node(u);
    if (node.leaf()) {
        d.cn = CountNode();
        refresh_leaf(u);
        return;
    }
    const unsigned width = static_cast<unsigned>(node.children.size());
    d.cn = CountNode(width, threshold_);
    std::vector<std::uint64_t> pairs(static_cast<std::size_t>(width) * (width + 1) / 2, 0);
    for (std::uint32_t uid : d.held) {
        auto [l, r] = tree_.covered_children(u, recs_[uid].left, recs_[uid].right);
        if (l == 0) continue;
        pairs[static_cast<std::size_t>(l - 1) * width - static_cast<std::size_t>(l - 1) * (l - 2) / 2 + (r - l)]++;
    }
    d.cn.assign(pairs);
    d.leaf = LeafCounter();
}

void StabSum::refresh_leaf(NodeId u) {
    std::vector<Range> members;
    members.reserve(nodes_[u].held.size());
    for (std::uint32_t uid : nodes_[u].held) members.push_back({recs_[uid].left, recs_[uid].right});
    nodes_[u].leaf.build(members);
}

void StabSum::insert(const Interval& s) {
    validate(s);
    if (live_.count(s.id)) throw usage_error("duplicate interval id");
    const auto uid = static_cast<std::uint32_t>(recs_.size());
    recs_.push_back(s);
    live_[s.id] = uid;

    for (const NodeAssign& a : tree_.assign(s.left, s.right)) {
        NodeData& d = nodes_[a.node];
        d.held.insert(uid);
        if (tree_.node(a.node).leaf())
            refresh_leaf(a.node);
        else if (a.covers_children()) {
            const auto before = d.cn.rebuilds();
            d.cn.update(a.l, a.r, +1);
            stats_.local_rebuilds += d.cn.rebuilds() - before;
        }
    }
    NodeId leaf = tree_.insert_slot({s.left, uid});
    for (;;) {
        const auto over = tree_.split_check(leaf);
        if (over.empty()) break;
        split_node(over.front());
    }
    leaf = tree_.insert_slot({s.right, uid});
    for (;;) {
        const auto over = tree_.split_check(leaf);
        if (over.empty()) break;
        split_node(over.front());
    }
}

void StabSum::split_node(NodeId u) {
    std::vector<std::uint32_t> all(nodes_[u].held.begin(), nodes_[u].held.end());
    const SplitEvent ev = tree_.split(u);
    ensure_nodes();
    ++stats_.node_splits;
    for (NodeId half : {ev.left, ev.right}) {
        nodes_[half].held.clear();
        for (std::uint32_t uid : all)
            if (tree_.holds(half, recs_[uid].left, recs_[uid].right)) nodes_[half].held.insert(uid);
        rebuild_node(half);
    }
    if (ev.new_root) nodes_[ev.parent].held.insert(all.begin(), all.end());
    rebuild_node(ev.parent);
}

void StabSum::erase(IntervalId id) {
    auto it = live_.find(id);
    if (it == live_.end()) throw usage_error("unknown interval id");
    const std::uint32_t uid = it->second;
    live_.erase(it);
    const Interval& s = recs_[uid];
    for (const NodeAssign& a : tree_.assign(s.left, s.right)) {
        NodeData& d = nodes_[a.node];
        d.held.erase(uid);
        if (tree_.node(a.node).leaf())
            refresh_leaf(a.node);
        else if (a.covers_children()) {
            const auto before = d.cn.rebuilds();
            d.cn.update(a.l, a.r, -1);
            stats_.local_rebuilds += d.cn.rebuilds() - before;
        }
    }
    schedule_.record_deletion();
    if (schedule_.due()) global_rebuild();
}

std::uint64_t StabSum::count(Coord x) {
    std::uint64_t total = 0;
    unsigned visited = 0;
    NodeId u = tree_.root();
    for (;;) {
        ++visited;
        const TreeNode& node = tree_.node(u);
        if (node.leaf()) {
            total += nodes_[u].leaf.count(x);
            break;
        }
        const unsigned f = tree_.route(u, x);
        total += nodes_[u].cn.count(f);
        u = node.children[f - 1];
    }
    ++stats_.queries;
    stats_.nodes_visited += visited;
    stats_.max_nodes_per_query = std::max<std::uint64_t>(stats_.max_nodes_per_query, visited);
    return total;
}

void StabSum::rebuild_from(std::vector<Interval> live) {
    std::sort(live.begin(), live.end(), [](const Interval& a, const Interval& b) { return a.id < b.id; });
    recs_ = std::move(live);
    live_.clear();
    std::vector<EndpointSlot> slots;
    slots.reserve(2 * recs_.size());
    for (std::uint32_t uid = 0; uid < recs_.size(); ++uid) {
        live_[recs_[uid].id] = uid;
        slots.push_back({recs_[uid].left, uid});
        slots.push_back({recs_[uid].right, uid});
    }
    std::sort(slots.begin(), slots.end());
    schedule_.reset(recs_.size());
    tree_ = BaseTree(params_.resolved_fanout(recs_.size()));
    const double lg = std::log2(static_cast<double>(std::max<std::size_t>(recs_.size(), 2)));
    threshold_ = std::max(1u, static_cast<unsigned>(std::ceil(std::pow(lg, params_.epsilon))));
    tree_.build(std::move(slots));
    nodes_.clear();
    ensure_nodes();
    for (std::uint32_t uid = 0; uid < recs_.size(); ++uid)
        for (const NodeAssign& a : tree_.assign(recs_[uid].left, recs_[uid].right)) nodes_[a.node].held.insert(uid);
    for (NodeId u = 0; u < tree_.node_count(); ++u) rebuild_node(u);
    ++stats_.rebuilds;
}

void StabSum::global_rebuild() {
    std::vector<Interval> live;
    live.reserve(live_.size());
    for (const auto& [id, uid] : live_) live.push_back(recs_[uid]);
    rebuild_from(std::move(live));
}

std::vector<std::string> StabSum::audit() const {
    std::vector<std::string> errs = tree_.audit();
    auto fail = [&](NodeId u, const std::string& what) {
        std::ostringstream os;
        os << "node " << u << ": " << what;
        errs.push_back(os.str());
    };
    std::vector<std::vector<std::uint32_t>> want(tree_.node_count());
    for (const auto& [id, uid] : live_)
        for (const NodeAssign& a : tree_.assign(recs_[uid].left, recs_[uid].right)) want[a.node].push_back(uid);
    for (NodeId u = 0; u < tree_.node_count(); ++u) {
        const NodeData& d = nodes_[u];
        const TreeNode& node = tree_.node(u);
        if (d.held.size() != want[u].size() ||
            !std::all_of(want[u].begin(), want[u].end(), [&](std::uint32_t x) { return d.held.count(x) != 0; }))
            fail(u, "held set differs from recomputed membership");
        if (node.leaf()) {
            // A recount stabs q when left <= q and not right < q.
            std::vector<Coord> lefts, rights;
            for (std::uint32_t uid : d.held) {
                lefts.push_back(recs_[uid].left);
                rights.push_back(recs_[uid].right);
            }
            std::sort(lefts.begin(), lefts.end());
            std::sort(rights.begin(), rights.end());
            for (Coord x : d.leaf.endpoints())
                for (Coord q : {x == kMinCoord ? x : x - 1, x, x == kMaxCoord ? x : x + 1}) {
                    const auto direct = static_cast<std::uint64_t>(
                        (std::upper_bound(lefts.begin(), lefts.end(), q) - lefts.begin()) -
                        (std::lower_bound(rights.begin(), rights.end(), q) - rights.begin()));
                    if (d.leaf.count(q) != direct) fail(u, "leaf table disagrees with a recount");
                }
            continue;
        }
        const unsigned width = static_cast<unsigned>(node.children.size());
        if (d.cn.width() != width) {
            fail(u, "count node width differs from fanout");
            continue;
        }
        // CountNode identity: base plus deltas equals a recount of covering intervals.
        std::vector<std::uint64_t> direct(width + 1, 0);
        for (std::uint32_t uid : d.held) {
            auto [l, r] = tree_.covered_children(u, recs_[uid].left, recs_[uid].right);
            for (unsigned f = l; l != 0 && f <= r; ++f) ++direct[f];
        }
        for (unsigned f = 1; f <= width; ++f)
            if (d.cn.count(f) != direct[f]) fail(u, "count node identity violated");
        for (unsigned l = 1; l <= width; ++l)
            for (unsigned r = l; r <= width; ++r)
                if (static_cast<unsigned>(std::abs(d.cn.delta(l, r))) > d.cn.threshold())
                    fail(u, "delta exceeds local rebuild threshold");
        if (errs.size() > 50) break;
    }
    return errs;
}

}  // namespace stab
