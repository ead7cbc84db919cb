#include "stab/base_tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stab {

namespace {

constexpr unsigned kMaxPhi = 32;

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > UINT64_MAX / 4 / a) return UINT64_MAX / 4;
    return a * b;
}

}  // namespace

unsigned TreeParams::resolved_fanout(std::size_t n_hat) const {
    if (fanout != 0) return fanout;
    const double lg = std::log2(static_cast<double>(std::max<std::size_t>(n_hat, 2)));
    const auto phi = static_cast<unsigned>(std::ceil(std::pow(lg, epsilon)));
    return std::clamp(phi, 2u, kMaxPhi);
}

std::uint32_t TreeParams::resolved_block_max(std::size_t n_hat) const {
    if (block_max != 0) return block_max;
    const double lg = std::log2(static_cast<double>(std::max<std::size_t>(n_hat, 2)));
    const double want = std::ceil(2.0 * lg * lg * lg);
    return static_cast<std::uint32_t>(std::clamp(want, 8.0, 1.0e6));
}

void TreeParams::validate() const {
    if (fanout != 0 && (fanout < 2 || fanout > kMaxPhi))
        throw usage_error("fanout must lie in [2, 32]");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw usage_error("epsilon must lie in (0, 1]");
    if (block_max != 0 && block_max < 4) throw usage_error("block capacity must be at least 4");
}

unsigned max_children(unsigned phi) {
    // Children of a level-l node weigh at least phi^(l-1)*(phi-1) while the
    // node itself stays at or below 2*phi^(l+1); one more for a pending split.
    const unsigned bound = (2 * phi * phi + phi - 2) / (phi - 1);
    return bound + 2;
}

BaseTree::BaseTree(unsigned phi) : phi_(phi) {
    if (phi < 2 || phi > kMaxPhi) throw usage_error("fanout must lie in [2, 32]");
    build({});
}

NodeId BaseTree::make_node(unsigned level) {
    nodes_.emplace_back();
    nodes_.back().level = level;
    return static_cast<NodeId>(nodes_.size() - 1);
}

std::uint64_t BaseTree::nominal_weight(unsigned level) const {
    std::uint64_t w = phi_;
    for (unsigned i = 0; i < level; ++i) w = sat_mul(w, phi_);
    return w;
}

void BaseTree::build(std::vector<EndpointSlot> slots) {
    if (!std::is_sorted(slots.begin(), slots.end())) std::sort(slots.begin(), slots.end());
    nodes_.clear();
    unsigned level = 0;
    while (slots.size() > split_threshold(level)) ++level;
    root_ = build_level(slots, 0, slots.size(), level, kNoNode);
    nodes_[root_].range = {kMinCoord, kMaxCoord};
    // Siblings share boundaries: the first child starts where its parent
    // does, every other child ends where the next one starts.
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const TreeNode& n = nodes_[stack.back()];
        stack.pop_back();
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            Range& g = nodes_[n.children[i]].range;
            if (i == 0) g.lo = n.range.lo;
            g.hi = i + 1 == n.children.size() ? n.range.hi : nodes_[n.children[i + 1]].range.lo;
            stack.push_back(n.children[i]);
        }
    }
}

NodeId BaseTree::build_level(const std::vector<EndpointSlot>& slots, std::size_t begin, std::size_t end,
                             unsigned level, NodeId parent) {
    const NodeId id = make_node(level);
    nodes_[id].parent = parent;
    nodes_[id].weight = end - begin;
    const Coord lo = begin < slots.size() && begin < end ? slots[begin].x : kMinCoord;
    nodes_[id].range = {lo, kMaxCoord};
    if (level == 0) {
        nodes_[id].slots.assign(slots.begin() + static_cast<std::ptrdiff_t>(begin),
                                slots.begin() + static_cast<std::ptrdiff_t>(end));
        return id;
    }
    const std::uint64_t w = end - begin;
    const std::uint64_t unit = nominal_weight(level - 1);
    const std::size_t c = static_cast<std::size_t>(std::max<std::uint64_t>(1, w / unit));
    std::vector<NodeId> kids;
    for (std::size_t i = 0; i < c; ++i) {
        const std::size_t b = begin + w * i / c;
        const std::size_t e = begin + w * (i + 1) / c;
        kids.push_back(build_level(slots, b, e, level - 1, id));
    }
    nodes_[id].children = std::move(kids);
    return id;
}

unsigned BaseTree::child_index(NodeId c) const {
    const NodeId p = nodes_.at(c).parent;
    if (p == kNoNode) throw usage_error("root has no child index");
    const auto& ch = nodes_[p].children;
    return static_cast<unsigned>(std::find(ch.begin(), ch.end(), c) - ch.begin()) + 1;
}

unsigned BaseTree::route(NodeId u, Coord x) const {
    const auto& ch = nodes_.at(u).children;
    auto it = std::upper_bound(ch.begin(), ch.end(), x,
                               [this](Coord v, NodeId c) { return v < nodes_[c].range.lo; });
    return static_cast<unsigned>(std::max<std::ptrdiff_t>(it - ch.begin(), 1));
}

NodeId BaseTree::locate(Coord x) const {
    NodeId u = root_;
    while (!nodes_[u].leaf()) u = child(u, route(u, x));
    return u;
}

std::vector<NodeId> BaseTree::path(Coord x) const {
    std::vector<NodeId> out{root_};
    while (!nodes_[out.back()].leaf()) out.push_back(child(out.back(), route(out.back(), x)));
    return out;
}

bool BaseTree::holds(NodeId u, Coord left, Coord right) const {
    if (u == root_) return true;
    const Range& g = nodes_.at(u).range;
    const bool on_left = g.lo < left && left <= g.hi;
    const bool on_right = g.lo <= right && right < g.hi;
    return on_left || on_right;
}

std::pair<unsigned, unsigned> BaseTree::covered_children(NodeId u, Coord left, Coord right) const {
    const auto& ch = nodes_.at(u).children;
    // Child ranges are sorted, so the covered ones form a contiguous run.
    auto first = std::lower_bound(ch.begin(), ch.end(), left,
                                  [this](NodeId c, Coord v) { return nodes_[c].range.lo < v; });
    auto last = std::upper_bound(first, ch.end(), right,
                                 [this](Coord v, NodeId c) { return v < nodes_[c].range.hi; });
    if (first == last) return {0, 0};
    return {static_cast<unsigned>(first - ch.begin()) + 1, static_cast<unsigned>(last - ch.begin())};
}

std::pair<unsigned, unsigned> BaseTree::path_children(NodeId u, Coord left, Coord right) const {
    const auto& ch = nodes_.at(u).children;
    if (ch.empty()) return {0, 0};
    // Left path: last child starting strictly before `left`.
    const unsigned pl = static_cast<unsigned>(
        std::lower_bound(ch.begin(), ch.end(), left, [this](NodeId c, Coord v) { return nodes_[c].range.lo < v; }) -
        ch.begin());
    unsigned pr = 0;
    const unsigned rc = route(u, right);
    if (right < nodes_[ch[rc - 1]].range.hi) pr = rc;
    if (pl == 0) return {pr, 0};
    if (pr == 0 || pr == pl) return {pl, 0};
    return {pl, pr};
}

std::vector<NodeAssign> BaseTree::assign(Coord left, Coord right) const {
    std::vector<NodeAssign> out;
    out.reserve(2 * height() + 2);
    NodeAssign a;
    a.node = root_;
    out.push_back(a);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const NodeId u = out[i].node;
        if (nodes_[u].leaf()) continue;
        auto [l, r] = covered_children(u, left, right);
        auto [c1, c2] = path_children(u, left, right);
        out[i].l = l;
        out[i].r = r;
        out[i].children[0] = c1;
        out[i].children[1] = c2;
        for (unsigned c : {c1, c2}) {
            if (c == 0) continue;
            NodeAssign b;
            b.node = child(u, c);
            b.parent = static_cast<int>(i);
            b.child_index = c;
            out.push_back(b);
        }
    }
    return out;
}

NodeId BaseTree::insert_slot(EndpointSlot slot) {
    const NodeId leaf = locate(slot.x);
    auto& s = nodes_[leaf].slots;
    s.insert(std::upper_bound(s.begin(), s.end(), slot), slot);
    for (NodeId u = leaf; u != kNoNode; u = nodes_[u].parent) ++nodes_[u].weight;
    return leaf;
}

bool BaseTree::overweight(NodeId u) const {
    const TreeNode& n = nodes_.at(u);
    return n.weight > split_threshold(n.level);
}

std::vector<NodeId> BaseTree::split_check(NodeId leaf) const {
    std::vector<NodeId> out;
    for (NodeId u = leaf; u != kNoNode; u = nodes_[u].parent)
        if (overweight(u)) out.push_back(u);
    return out;
}

SplitEvent BaseTree::split(NodeId u) {
    SplitEvent ev;
    if (nodes_.at(u).parent == kNoNode) {
        const NodeId r = make_node(nodes_[u].level + 1);
        nodes_[r].children = {u};
        nodes_[r].weight = nodes_[u].weight;
        nodes_[r].range = {kMinCoord, kMaxCoord};
        nodes_[u].parent = r;
        root_ = r;
        ev.new_root = true;
    }
    const NodeId v = make_node(nodes_[u].level);
    TreeNode& a = nodes_[u];
    TreeNode& b = nodes_[v];
    b.parent = a.parent;
    if (a.leaf()) {
        const std::size_t keep = a.slots.size() / 2;
        b.slots.assign(a.slots.begin() + static_cast<std::ptrdiff_t>(keep), a.slots.end());
        a.slots.resize(keep);
        b.range = {b.slots.front().x, a.range.hi};
        a.weight = a.slots.size();
        b.weight = b.slots.size();
    } else {
        // Child boundary closest to half the weight, one child at least per side.
        const std::uint64_t half = a.weight / 2;
        std::uint64_t acc = 0, best_gap = UINT64_MAX;
        std::size_t cut = 1;
        for (std::size_t i = 0; i + 1 < a.children.size(); ++i) {
            acc += nodes_[a.children[i]].weight;
            const std::uint64_t gap = acc > half ? acc - half : half - acc;
            if (gap < best_gap) {
                best_gap = gap;
                cut = i + 1;
            }
        }
        b.children.assign(a.children.begin() + static_cast<std::ptrdiff_t>(cut), a.children.end());
        a.children.resize(cut);
        b.weight = 0;
        for (NodeId c : b.children) {
            nodes_[c].parent = v;
            b.weight += nodes_[c].weight;
        }
        a.weight -= b.weight;
        b.range = {nodes_[b.children.front()].range.lo, a.range.hi};
    }
    a.range.hi = b.range.lo;
    ev.parent = a.parent;
    ev.left = u;
    ev.right = v;
    ev.k = child_index(u);
    auto& pc = nodes_[ev.parent].children;
    pc.insert(pc.begin() + ev.k, v);
    return ev;
}

std::vector<NodeId> BaseTree::leaves() const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        if (nodes_[u].leaf()) {
            out.push_back(u);
            continue;
        }
        const auto& ch = nodes_[u].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

std::vector<std::string> BaseTree::audit() const {
    std::vector<std::string> errs;
    auto fail = [&](NodeId u, const std::string& what) {
        std::ostringstream os;
        os << "node " << u << ": " << what;
        errs.push_back(os.str());
    };
    const TreeNode& rt = nodes_[root_];
    if (rt.range.lo != kMinCoord || rt.range.hi != kMaxCoord) fail(root_, "root range is not the full line");
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        const TreeNode& n = nodes_[u];
        if (n.range.lo > n.range.hi) fail(u, "empty range");
        if (u != root_) {
            const std::uint64_t nom = nominal_weight(n.level);
            if (n.weight < nom / 4 || n.weight > 4 * nom) fail(u, "weight outside balance band");
        }
        if (n.weight > split_threshold(n.level)) fail(u, "overweight");
        if (n.leaf()) {
            if (n.weight != n.slots.size()) fail(u, "leaf weight differs from slot count");
            for (const auto& s : n.slots)
                if (s.x < n.range.lo || s.x > n.range.hi) fail(u, "slot outside leaf range");
            if (!std::is_sorted(n.slots.begin(), n.slots.end())) fail(u, "slots unsorted");
            continue;
        }
        if (n.children.size() > max_children(phi_)) fail(u, "too many children");
        std::uint64_t w = 0;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            const TreeNode& c = nodes_[n.children[i]];
            w += c.weight;
            if (c.parent != u) fail(n.children[i], "parent pointer mismatch");
            if (c.level + 1 != n.level) fail(n.children[i], "level mismatch");
            const Coord want_lo = i == 0 ? n.range.lo : nodes_[n.children[i - 1]].range.hi;
            const Coord want_hi = i + 1 == n.children.size() ? n.range.hi : nodes_[n.children[i + 1]].range.lo;
            if (c.range.lo != want_lo || c.range.hi != want_hi) fail(n.children[i], "ranges do not tile parent");
            stack.push_back(n.children[i]);
        }
        if (w != n.weight) fail(u, "weight differs from children sum");
    }
    return errs;
}

}  // namespace stab
