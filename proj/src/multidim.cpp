#include "stab/multidim.hpp"

#include <algorithm>
#include <sstream>

namespace stab {

void MultiParams::validate() const {
    tree.validate();
    if (d < 1) throw usage_error("need at least one unbounded dimension");
    if (g + d - 1 > kMaxBoundedDims) throw usage_error("too many dimensions for the bounded lanes");
    if (beta < 1 || beta > 128) throw usage_error("bounded coordinate bound must lie in [1, 128]");
}

MultiStab::MultiStab(MultiParams params) : params_(params) {
    params_.validate();
    if (params_.d == 1) {
        StabMaxParams sp;
        sp.tree = params_.tree;
        sp.bounded_dims = params_.g;
        sp.beta = params_.beta;
        flat_ = std::make_unique<StabMax>(sp);
    } else {
        build_from({});
    }
}

void MultiStab::build(std::vector<Rectangle> items) {
    std::unordered_set<IntervalId> seen;
    for (const Rectangle& s : items) {
        check_rect(s);
        if (!seen.insert(s.id).second) throw usage_error("duplicate rectangle id");
    }
    if (!flat_) {
        build_from(std::move(items));
        return;
    }
    std::vector<BoxedInterval> flat;
    flat.reserve(items.size());
    live_.clear();
    for (const Rectangle& s : items) {
        BoxedInterval b{{s.id, s.dims[0].lo, s.dims[0].hi, s.priority}, {}, {}};
        for (unsigned i = 0; i < params_.g; ++i) {
            b.lo[i] = static_cast<std::uint8_t>(s.dims[1 + i].lo);
            b.hi[i] = static_cast<std::uint8_t>(s.dims[1 + i].hi);
        }
        flat.push_back(b);
        live_[s.id] = 0;
    }
    flat_->build(flat);
}

MultiStab::MultiStab(MultiStab&&) noexcept = default;
MultiStab& MultiStab::operator=(MultiStab&&) noexcept = default;
MultiStab::~MultiStab() = default;

unsigned MultiStab::height() const { return flat_ ? flat_->height() : tree_.height(); }

unsigned MultiStab::inner_beta() const {
    return std::min(128u, std::max(params_.beta, max_children(tree_.phi()) + 1));
}

void MultiStab::check_rect(const Rectangle& s) const {
    validate(s, params_.d + params_.g);
    for (unsigned i = params_.d; i < params_.d + params_.g; ++i)
        if (s.dims[i].lo < 0 || s.dims[i].hi >= static_cast<Coord>(params_.beta))
            throw usage_error("bounded coordinate out of range");
}

// Drops the last unbounded coordinate and appends the child range as a new
// bounded one.
Rectangle MultiStab::reduce(const Rectangle& s, unsigned l, unsigned r) const {
    Rectangle out;
    out.id = s.id;
    out.priority = s.priority;
    const unsigned k = params_.d - 1;
    for (unsigned i = 0; i < s.dims.size(); ++i)
        if (i != k) out.dims.push_back(s.dims[i]);
    out.dims.push_back({static_cast<Coord>(l), static_cast<Coord>(r)});
    return out;
}

void MultiStab::insert(const Rectangle& s) {
    check_rect(s);
    if (live_.count(s.id)) throw usage_error("duplicate rectangle id");
    if (flat_) {
        std::uint8_t lo[kMaxBoundedDims], hi[kMaxBoundedDims];
        for (unsigned i = 0; i < params_.g; ++i) {
            lo[i] = static_cast<std::uint8_t>(s.dims[1 + i].lo);
            hi[i] = static_cast<std::uint8_t>(s.dims[1 + i].hi);
        }
        flat_->insert({s.id, s.dims[0].lo, s.dims[0].hi, s.priority}, {lo, params_.g}, {hi, params_.g});
        live_[s.id] = 0;
        return;
    }
    const auto uid = static_cast<std::uint32_t>(recs_.size());
    recs_.push_back(s);
    live_[s.id] = uid;
    const Range& c = s.dims[params_.d - 1];
    for (const NodeAssign& a : tree_.assign(c.lo, c.hi)) {
        held_[a.node].insert(uid);
        if (a.covers_children()) inner_[a.node]->insert(reduce(s, a.l, a.r));
    }
    for (Coord x : {c.lo, c.hi}) {
        const NodeId leaf = tree_.insert_slot({x, uid});
        for (;;) {
            const auto over = tree_.split_check(leaf);
            if (over.empty()) break;
            split_node(over.front());
        }
    }
}

void MultiStab::erase(IntervalId id) {
    auto it = live_.find(id);
    if (it == live_.end()) throw usage_error("unknown rectangle id");
    if (flat_) {
        flat_->erase(id);
        live_.erase(it);
        return;
    }
    const std::uint32_t uid = it->second;
    live_.erase(it);
    const Range& c = recs_[uid].dims[params_.d - 1];
    for (const NodeAssign& a : tree_.assign(c.lo, c.hi)) {
        held_[a.node].erase(uid);
        if (a.covers_children()) inner_[a.node]->erase(id);
    }
    schedule_.record_deletion();
    if (schedule_.due()) {
        std::vector<Rectangle> live;
        live.reserve(live_.size());
        for (const auto& [rid, u] : live_) live.push_back(recs_[u]);
        build_from(std::move(live));
        ++rebuilds_;
    }
}

MaybeHit MultiStab::query(const QueryPoint& q) {
    if (q.coords.size() != params_.d + params_.g) throw usage_error("query dimension mismatch");
    last_visits_ = 0;
    for (unsigned i = params_.d; i < params_.d + params_.g; ++i)
        if (q.coords[i] < 0 || q.coords[i] >= static_cast<Coord>(params_.beta)) return std::nullopt;
    if (flat_) {
        std::uint8_t h[kMaxBoundedDims];
        for (unsigned i = 0; i < params_.g; ++i) h[i] = static_cast<std::uint8_t>(q.coords[1 + i]);
        const MaybeHit out = flat_->query(q.coords[0], {h, params_.g});
        last_visits_ = flat_->last_query_nodes();
        return out;
    }
    const unsigned k = params_.d - 1;
    MaybeHit best;
    auto offer = [&](const MaybeHit& h) {
        if (h && (!best || TotalOrderKey{h->priority, h->id} > TotalOrderKey{best->priority, best->id})) best = h;
    };
    std::uint64_t visits = 0;
    NodeId u = tree_.root();
    for (;;) {
        ++visits;
        const TreeNode& node = tree_.node(u);
        if (node.leaf()) {
            for (std::uint32_t uid : held_[u]) {
                const Rectangle& s = recs_[uid];
                if (rect_contains(s, q)) offer(Hit{s.id, s.priority});
            }
            break;
        }
        const unsigned f = tree_.route(u, q.coords[k]);
        QueryPoint sub;
        for (unsigned i = 0; i < q.coords.size(); ++i)
            if (i != k) sub.coords.push_back(q.coords[i]);
        sub.coords.push_back(f);
        offer(inner_[u]->query(sub));
        visits += inner_[u]->last_query_visits();
        u = node.children[f - 1];
    }
    last_visits_ = visits;
    return best;
}

void MultiStab::rebuild_node(NodeId u) {
    if (tree_.node(u).leaf()) {
        inner_[u].reset();
        return;
    }
    MultiParams ip = params_;
    ip.d = params_.d - 1;
    ip.g = params_.g + 1;
    ip.beta = inner_beta();
    inner_[u] = std::make_unique<MultiStab>(ip);
    const unsigned k = params_.d - 1;
    std::vector<Rectangle> reduced;
    for (std::uint32_t uid : held_[u]) {
        const Rectangle& s = recs_[uid];
        auto [l, r] = tree_.covered_children(u, s.dims[k].lo, s.dims[k].hi);
        if (l != 0) reduced.push_back(reduce(s, l, r));
    }
    inner_[u]->build(std::move(reduced));
}

void MultiStab::split_node(NodeId u) {
    std::vector<std::uint32_t> all(held_[u].begin(), held_[u].end());
    const SplitEvent ev = tree_.split(u);
    held_.resize(tree_.node_count());
    inner_.resize(tree_.node_count());
    const unsigned k = params_.d - 1;
    for (NodeId half : {ev.left, ev.right}) {
        held_[half].clear();
        for (std::uint32_t uid : all)
            if (tree_.holds(half, recs_[uid].dims[k].lo, recs_[uid].dims[k].hi)) held_[half].insert(uid);
        rebuild_node(half);
    }
    if (ev.new_root) held_[ev.parent].insert(all.begin(), all.end());
    rebuild_node(ev.parent);
}

void MultiStab::build_from(std::vector<Rectangle> live) {
    std::sort(live.begin(), live.end(), [](const Rectangle& a, const Rectangle& b) { return a.id < b.id; });
    recs_ = std::move(live);
    live_.clear();
    const unsigned k = params_.d - 1;
    std::vector<EndpointSlot> slots;
    slots.reserve(2 * recs_.size());
    for (std::uint32_t uid = 0; uid < recs_.size(); ++uid) {
        live_[recs_[uid].id] = uid;
        slots.push_back({recs_[uid].dims[k].lo, uid});
        slots.push_back({recs_[uid].dims[k].hi, uid});
    }
    std::sort(slots.begin(), slots.end());
    schedule_.reset(recs_.size());
    tree_ = BaseTree(params_.tree.resolved_fanout(recs_.size()));
    tree_.build(std::move(slots));
    held_.assign(tree_.node_count(), {});
    inner_.clear();
    inner_.resize(tree_.node_count());
    for (std::uint32_t uid = 0; uid < recs_.size(); ++uid)
        for (const NodeAssign& a : tree_.assign(recs_[uid].dims[k].lo, recs_[uid].dims[k].hi))
            held_[a.node].insert(uid);
    for (NodeId u = 0; u < tree_.node_count(); ++u) rebuild_node(u);
}

std::vector<std::string> MultiStab::audit() const {
    if (flat_) return flat_->audit();
    std::vector<std::string> errs = tree_.audit();
    auto fail = [&](NodeId u, const std::string& what) {
        std::ostringstream os;
        os << "d=" << params_.d << " node " << u << ": " << what;
        errs.push_back(os.str());
    };
    const unsigned k = params_.d - 1;
    std::vector<std::vector<std::uint32_t>> want(tree_.node_count());
    for (const auto& [id, uid] : live_)
        for (const NodeAssign& a : tree_.assign(recs_[uid].dims[k].lo, recs_[uid].dims[k].hi)) want[a.node].push_back(uid);
    for (NodeId u = 0; u < tree_.node_count(); ++u) {
        if (held_[u].size() != want[u].size() ||
            !std::all_of(want[u].begin(), want[u].end(), [&](std::uint32_t x) { return held_[u].count(x) != 0; }))
            fail(u, "held set differs from recomputed membership");
        if (tree_.node(u).leaf()) {
            if (inner_[u]) fail(u, "leaf owns a nested structure");
            continue;
        }
        if (!inner_[u]) {
            fail(u, "internal node lacks a nested structure");
            continue;
        }
        std::size_t covering = 0;
        for (std::uint32_t uid : held_[u]) {
            auto [l, r] = tree_.covered_children(u, recs_[uid].dims[k].lo, recs_[uid].dims[k].hi);
            if (l == 0) continue;
            ++covering;
            if (!inner_[u]->contains_id(recs_[uid].id)) fail(u, "covering rectangle missing from nested structure");
        }
        if (inner_[u]->size() != covering) fail(u, "nested structure holds extra rectangles");
        for (const std::string& e : inner_[u]->audit()) errs.push_back(e);
        if (errs.size() > 50) break;
    }
    return errs;
}

}  // namespace stab
