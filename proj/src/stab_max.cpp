#include "stab/stab_max.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace stab {

struct StabMax::NodeState {
    LabeledList<Block> comp;
    std::unordered_map<TagKey, SuccSet> d;  // tag key -> labels of blocks holding it
    MaxIndex m;
};

void StabMaxParams::validate() const {
    tree.validate();
    if (bounded_dims > kMaxBoundedDims) throw usage_error("at most three bounded dimensions");
    if (beta < 1 || beta > 128) throw usage_error("bounded coordinate bound must lie in [1, 128]");
}

StabMax::StabMax(StabMaxParams params) : params_(params) {
    params_.validate();
    rebuild_from({});
}

StabMax::StabMax(StabMax&&) noexcept = default;
StabMax& StabMax::operator=(StabMax&&) noexcept = default;
StabMax::~StabMax() = default;

StabMax::NodeState& StabMax::st(NodeId u) { return states_[u]; }
const StabMax::NodeState& StabMax::st(NodeId u) const { return states_[u]; }

StabMax::OrderKey StabMax::order_key(std::uint32_t uid) const {
    const Interval& s = recs_[uid].s;
    return {s.priority, s.id, uid};
}

std::uint32_t StabMax::in_block(NodeId u, Position p) const { return st(u).comp[p.block].pos_of_stamp(p.stamp); }

std::uint32_t StabMax::uid_at(NodeId u, Position p) const {
    const Block& b = st(u).comp[p.block];
    return b.uid(b.pos_of_stamp(p.stamp));
}

IntervalId StabMax::id_at(NodeId u, Position p) const { return recs_[uid_at(u, p)].s.id; }

bool StabMax::before(NodeId u, Position a, Position b) const {
    const auto& comp = st(u).comp;
    if (a.block == b.block) return in_block(u, a) < in_block(u, b);
    return comp.compare(a.block, b.block) == std::strong_ordering::less;
}

Tag StabMax::tag_for(NodeId u, const Record& r) const {
    if (!r.live || tree_.node(u).leaf()) return {};
    auto [l, rr] = tree_.covered_children(u, r.s.left, r.s.right);
    return {static_cast<std::uint8_t>(l), static_cast<std::uint8_t>(rr)};
}

Identifier StabMax::ident_for(NodeId u, const Record& r) const {
    if (tree_.node(u).leaf()) return {};
    auto [a, b] = tree_.path_children(u, r.s.left, r.s.right);
    return {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
}

bool StabMax::box_holds(const Record& r, std::span<const std::uint8_t> h) const {
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] < r.lo[i] || h[i] > r.hi[i]) return false;
    return true;
}

std::vector<Position> StabMax::positions(NodeId u) const {
    std::vector<Position> out;
    const auto& comp = st(u).comp;
    out.reserve(comp.size() * block_max_);
    for (BlockHandle h : comp.handles()) {
        const Block& b = comp[h];
        for (std::uint32_t p = 1; p <= b.size(); ++p) out.push_back({h, b.stamp_at(p)});
    }
    return out;
}

std::optional<Position> StabMax::prev_position(NodeId u, Position p) const {
    const auto& comp = st(u).comp;
    const std::uint32_t at = in_block(u, p);
    if (at > 1) return Position{p.block, comp[p.block].stamp_at(at - 1)};
    auto pb = comp.prev(p.block);
    if (!pb) return std::nullopt;
    return Position{*pb, comp[*pb].stamp_at(comp[*pb].size())};
}

// ---- summaries -------------------------------------------------------------

void StabMax::refresh_key(NodeId u, TagKey k) {
    NodeState& s = st(u);
    const unsigned l = tag_key_l(k), r = tag_key_r(k);
    const std::uint64_t box = tag_key_box(k);
    auto it = s.d.find(k);
    if (it == s.d.end() || it->second.empty()) {
        if (it != s.d.end()) s.d.erase(it);
        if (s.m.key(l, r, box)) s.m.clear(l, r, box);
        return;
    }
    const std::uint64_t top = *it->second.max();
    if (s.m.key(l, r, box) != top) s.m.set(l, r, top, box);
}

void StabMax::add_label(NodeId u, TagKey k, BlockHandle b) {
    NodeState& s = st(u);
    s.d.try_emplace(k).first->second.insert(s.comp.label(b));
    refresh_key(u, k);
}

void StabMax::drop_label(NodeId u, TagKey k, BlockHandle b) {
    NodeState& s = st(u);
    s.d.at(k).erase(s.comp.label(b));
    refresh_key(u, k);
}

void StabMax::apply_relabels(NodeId u, const std::vector<Relabel>& rel) {
    NodeState& s = st(u);
    stats_.relabels += rel.size();
    std::vector<TagKey> touched;
    // Erase every old label first: a new label may equal another block's old one.
    for (const Relabel& e : rel)
        for (const auto& [k, c] : s.comp[e.handle].tag_counts()) {
            s.d.at(k).erase(e.old_label);
            touched.push_back(k);
        }
    for (const Relabel& e : rel)
        for (const auto& [k, c] : s.comp[e.handle].tag_counts()) s.d[k].insert(e.new_label);
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (TagKey k : touched) refresh_key(u, k);
}

void StabMax::rebuild_summaries(NodeId u) {
    NodeState& s = st(u);
    const unsigned width = static_cast<unsigned>(tree_.node(u).children.size());
    s.d.clear();
    s.m.reset(width);
    s.comp.reset_width(width);
    for (BlockHandle h : s.comp.handles()) {
        const Block& b = s.comp[h];
        for (const auto& [k, c] : b.tag_counts()) s.d[k].insert(s.comp.label(h));
        for (unsigned f = 1; f <= width; ++f)
            if (b.count(f) > 0) s.comp.mark(h, f);
    }
    for (const auto& [k, set] : s.d) s.m.set(tag_key_l(k), tag_key_r(k), *set.max(), tag_key_box(k));
}

// ---- links and navigation --------------------------------------------------

void StabMax::link(NodeId parent, Position pp, unsigned f, NodeId child, Position cp) {
    Block& pb = st(parent).comp[pp.block];
    const std::uint32_t at = pb.pos_of_stamp(pp.stamp);
    pb.set_child_link(at, pb.ident(at).slot_of(f), cp);
    Block& cb = st(child).comp[cp.block];
    cb.set_parent_link(cb.pos_of_stamp(cp.stamp), pp);
}

Position StabMax::nav_up(NodeId u, Position p) {
    const NodeId w = tree_.node(u).parent;
    if (w == kNoNode) throw usage_error("root has no parent list");
    const unsigned f = tree_.child_index(u);
    const Block& b = st(u).comp[p.block];
    const std::uint32_t at = b.pos_of_stamp(p.stamp);
    const auto anchor = b.last_parent_link(at);
    if (!anchor) throw std::logic_error("block without a parent link");
    const Position a = b.parent_target(*anchor);
    const Block& pb = st(w).comp[a.block];
    const std::uint32_t k = pb.rank(f, pb.pos_of_stamp(a.stamp)) + (at - *anchor);
    probe_acc_ += 4;
    return {a.block, pb.stamp_at(pb.select(f, k))};
}

Position StabMax::nav_down(NodeId u, Position p, unsigned f) {
    const Block& b = st(u).comp[p.block];
    const std::uint32_t at = b.pos_of_stamp(p.stamp);
    if (!b.ident(at).has(f)) throw usage_error("entry is not held by that child");
    const auto anchor = b.last_child_link(at, f);
    if (!anchor) throw std::logic_error("block without a child link");
    const Position c = b.child_target(*anchor, b.ident(*anchor).slot_of(f));
    const std::uint32_t k = b.rank(f, at) - b.rank(f, *anchor);
    const Block& cb = st(tree_.child(u, f)).comp[c.block];
    probe_acc_ += 4;
    return {c.block, cb.stamp_at(cb.pos_of_stamp(c.stamp) + k)};
}

std::optional<Position> StabMax::child_pred(NodeId u, Position p, unsigned f) {
    const auto& comp = st(u).comp;
    const Block& b = comp[p.block];
    const std::uint32_t r = b.rank(f, b.pos_of_stamp(p.stamp));
    if (r > 0) return Position{p.block, b.stamp_at(b.select(f, r))};
    const auto pb = comp.pred_marked(p.block, f);
    if (!pb) return std::nullopt;
    const Block& q = comp[*pb];
    return Position{*pb, q.stamp_at(q.select(f, q.count(f)))};
}

// ---- insertion -------------------------------------------------------------

Position StabMax::insert_entry(NodeId u, std::optional<Position> after, std::uint32_t uid, Tag tag) {
    NodeState& s = st(u);
    BlockHandle b;
    std::uint32_t at = 0;
    if (after) {
        b = after->block;
        at = in_block(u, *after);
    } else if (s.comp.empty()) {
        b = s.comp.insert_after(std::nullopt, Block(block_max_, params_.bounded_dims));
        ++stats_.block_insertions;
    } else {
        b = *s.comp.front();
    }
    if (s.comp[b].full()) {
        split_block(u, b);
        if (after) {
            if (!s.comp[b].has_stamp(after->stamp)) b = *s.comp.next(b);
            at = s.comp[b].pos_of_stamp(after->stamp);
        }
    }
    const Record& r = recs_[uid];
    const unsigned g = params_.bounded_dims;
    Block& blk = s.comp[b];
    const Stamp t = blk.insert(at, {}, tag, uid, {r.lo.data(), g}, {r.hi.data(), g});
    if (tag.live()) {
        const TagKey k = blk.tag_key(at + 1);
        if (blk.tag_count(k) == 1) add_label(u, k, b);
    }
    return {b, t};
}

void StabMax::split_block(NodeId u, BlockHandle b) {
    NodeState& s = st(u);
    const bool is_root = u == tree_.root();
    const NodeId w = tree_.node(u).parent;
    const unsigned fu = is_root ? 0 : tree_.child_index(u);
    const unsigned width = static_cast<unsigned>(tree_.node(u).children.size());

    // Link targets for the new block's first entries, found before anything moves.
    std::optional<Position> up;
    std::vector<std::pair<unsigned, Position>> down;
    {
        const Block& blk = s.comp[b];
        const std::uint32_t keep = blk.size() / 2;
        if (!is_root) up = nav_up(u, {b, blk.stamp_at(keep + 1)});
        for (unsigned f = 1; f <= width; ++f) {
            const std::uint32_t rk = blk.rank(f, keep);
            if (rk < blk.count(f)) down.push_back({f, nav_down(u, {b, blk.stamp_at(blk.select(f, rk + 1))}, f)});
        }
    }

    std::vector<TagKey> keys;
    for (const auto& [k, c] : s.comp[b].tag_counts()) {
        keys.push_back(k);
        s.d.at(k).erase(s.comp.label(b));
    }
    Block upper = s.comp[b].split_off();
    std::vector<Relabel> rel;
    const BlockHandle h2 = s.comp.insert_after(b, std::move(upper), &rel);
    ++stats_.block_splits;
    ++stats_.block_insertions;
    // The split block's labels were taken out above; only the others move.
    rel.erase(std::remove_if(rel.begin(), rel.end(), [&](const Relabel& e) { return e.handle == b; }), rel.end());
    apply_relabels(u, rel);
    for (BlockHandle h : {b, h2})
        for (const auto& [k, c] : s.comp[h].tag_counts()) {
            s.d[k].insert(s.comp.label(h));
            keys.push_back(k);
        }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (TagKey k : keys) refresh_key(u, k);

    // Entries that moved keep their stamps; repoint whatever refers to them.
    Block& nb = s.comp[h2];
    for (std::uint32_t p = 1; p <= nb.size(); ++p) {
        const Stamp t = nb.stamp_at(p);
        if (is_root) root_pos_[nb.uid(p)] = {h2, t};
        if (nb.has_parent_link(p)) {
            const Position tp = nb.parent_target(p);
            Block& pb = st(w).comp[tp.block];
            const std::uint32_t at = pb.pos_of_stamp(tp.stamp);
            pb.set_child_link(at, pb.ident(at).slot_of(fu), {h2, t});
        }
        const Identifier id = nb.ident(p);
        for (unsigned slot = 0; slot < 2; ++slot) {
            if (!nb.has_child_link(p, slot)) continue;
            const Position tc = nb.child_target(p, slot);
            Block& cb = st(tree_.child(u, slot == 0 ? id.c1 : id.c2)).comp[tc.block];
            cb.set_parent_link(cb.pos_of_stamp(tc.stamp), {h2, t});
        }
    }
    if (up) link(w, *up, fu, u, {h2, nb.stamp_at(1)});
    for (const auto& [f, cp] : down) link(u, {h2, nb.stamp_at(nb.select(f, 1))}, f, tree_.child(u, f), cp);
    for (unsigned f = 1; f <= width; ++f) {
        if (s.comp[h2].count(f) > 0) s.comp.mark(h2, f);
        if (s.comp[b].count(f) == 0) s.comp.unmark(b, f);
    }
    stats_.max_blocks = std::max<std::uint64_t>(stats_.max_blocks, s.comp.size());
}

void StabMax::attach_child(NodeId w, Position pw, unsigned f, NodeId v, Position pv) {
    Block& pb = st(w).comp[pw.block];
    const std::uint32_t at = pb.pos_of_stamp(pw.stamp);
    Identifier id = pb.ident(at);
    (id.c1 == 0 ? id.c1 : id.c2) = static_cast<std::uint8_t>(f);
    pb.set_ident(at, id);
    st(w).comp.mark(pw.block, f);
    const bool first_f = pb.rank(f, at) == 1;
    const bool first_c = in_block(v, pv) == 1;
    if (first_f || first_c) link(w, pw, f, v, pv);
}

void StabMax::build(const std::vector<BoxedInterval>& items) {
    std::vector<Record> recs;
    recs.reserve(items.size());
    std::unordered_set<IntervalId> seen;
    for (const BoxedInterval& b : items) {
        validate(b.s);
        for (unsigned i = 0; i < params_.bounded_dims; ++i)
            if (b.lo[i] > b.hi[i] || b.hi[i] >= params_.beta) throw usage_error("bounded coordinate out of range");
        if (!seen.insert(b.s.id).second) throw usage_error("duplicate interval id");
        recs.push_back({b.s, b.lo, b.hi, true});
    }
    rebuild_from(std::move(recs));
}

void StabMax::insert(const Interval& s, std::span<const std::uint8_t> lo, std::span<const std::uint8_t> hi) {
    validate(s);
    const unsigned g = params_.bounded_dims;
    if (lo.size() != g || hi.size() != g) throw usage_error("bounded box arity mismatch");
    Record rec{s, {}, {}, true};
    for (unsigned i = 0; i < g; ++i) {
        if (lo[i] > hi[i] || hi[i] >= params_.beta) throw usage_error("bounded coordinate out of range");
        rec.lo[i] = lo[i];
        rec.hi[i] = hi[i];
    }
    if (live_.count(s.id)) throw usage_error("duplicate interval id");

    const auto uid = static_cast<std::uint32_t>(recs_.size());
    recs_.push_back(rec);
    live_[s.id] = uid;
    root_pos_.emplace_back();

    const auto as = tree_.assign(s.left, s.right);
    std::vector<Position> at(as.size());
    for (std::size_t i = 0; i < as.size(); ++i) {
        const NodeAssign& a = as[i];
        const Tag tag{static_cast<std::uint8_t>(a.l), static_cast<std::uint8_t>(a.r)};
        std::optional<Position> after;
        if (a.parent < 0) {
            auto it = order_.lower_bound(order_key(uid));
            if (it != order_.begin()) after = root_pos_[std::prev(it)->second];
        } else {
            // The new interval is not yet in the child, so the latest entry
            // before it that the child holds is its predecessor there.
            const NodeId w = as[a.parent].node;
            after = child_pred(w, at[a.parent], a.child_index);
            if (after) after = nav_down(w, *after, a.child_index);
        }
        at[i] = insert_entry(a.node, after, uid, tree_.node(a.node).leaf() ? Tag{} : tag);
        if (a.parent < 0) {
            root_pos_[uid] = at[i];
            order_.emplace(order_key(uid), uid);
        } else {
            attach_child(as[a.parent].node, at[a.parent], a.child_index, a.node, at[i]);
        }
    }

    for (Coord x : {s.left, s.right}) handle_splits(tree_.insert_slot({x, uid}));
}

// ---- deletion --------------------------------------------------------------

void StabMax::erase(IntervalId id) {
    auto it = live_.find(id);
    if (it == live_.end()) throw usage_error("unknown interval id");
    const std::uint32_t uid = it->second;
    live_.erase(it);
    recs_[uid].live = false;

    std::vector<std::pair<NodeId, Position>> todo{{tree_.root(), root_pos_[uid]}};
    while (!todo.empty()) {
        auto [u, p] = todo.back();
        todo.pop_back();
        Block& b = st(u).comp[p.block];
        const std::uint32_t at = b.pos_of_stamp(p.stamp);
        if (b.tag(at).live()) {
            const TagKey k = b.tag_key(at);
            b.set_tag(at, {});
            if (b.tag_count(k) == 0) drop_label(u, k, p.block);
        }
        const Identifier ident = st(u).comp[p.block].ident(at);
        for (unsigned c : {unsigned{ident.c1}, unsigned{ident.c2}})
            if (c != 0) todo.push_back({tree_.child(u, c), nav_down(u, p, c)});
    }

    schedule_.record_deletion();
    if (schedule_.due()) global_rebuild();
}

// ---- query -----------------------------------------------------------------

void StabMax::note_probes(std::uint64_t n) {
    stats_.block_probes += n;
    stats_.max_probes_per_node = std::max(stats_.max_probes_per_node, n);
}

std::optional<Position> StabMax::leaf_scan(NodeId leaf, Coord x, std::span<const std::uint8_t> h) {
    const auto& comp = st(leaf).comp;
    std::uint64_t touched = 0;
    std::optional<Position> found;
    for (auto hb = comp.back(); hb && !found; hb = comp.prev(*hb)) {
        ++touched;
        const Block& b = comp[*hb];
        for (std::uint32_t p = b.size(); p >= 1; --p) {
            const Record& r = recs_[b.uid(p)];
            if (r.live && contains(r.s, x) && box_holds(r, h)) {
                found = Position{*hb, b.stamp_at(p)};
                break;
            }
        }
    }
    note_probes(touched);
    return found;
}

MaybeHit StabMax::query(Coord x, std::span<const std::uint8_t> h) {
    if (h.size() != params_.bounded_dims) throw usage_error("query box arity mismatch");
    for (std::uint8_t c : h)
        if (c >= 128) throw usage_error("bounded query coordinate out of range");
    const auto path = tree_.path(x);
    ++stats_.queries;
    std::optional<Position> best = leaf_scan(path.back(), x, h);
    for (std::size_t i = path.size() - 1; i-- > 0;) {
        const NodeId u = path[i];
        probe_acc_ = 0;
        if (best) best = nav_up(path[i + 1], *best);
        const unsigned f = tree_.route(u, x);
        const NodeState& s = st(u);
        const auto cover = s.m.query_cover(f, h);
        ++probe_acc_;
        if (cover) {
            const BlockHandle hb = *s.comp.find_label(cover->key);
            const Block& b = s.comp[hb];
            const auto g = b.gmax(f, h);
            if (!g) throw std::logic_error("max index names a block without a covering entry");
            const Position cand{hb, b.stamp_at(*g)};
            probe_acc_ += best ? 2 : 1;
            if (!best || before(u, *best, cand)) best = cand;
        }
        note_probes(probe_acc_);
    }
    last_nodes_ = static_cast<unsigned>(path.size());
    stats_.nodes_visited += path.size();
    stats_.max_nodes_per_query = std::max<std::uint64_t>(stats_.max_nodes_per_query, path.size());
    if (!best) return std::nullopt;
    const Interval& s = recs_[uid_at(tree_.root(), *best)].s;
    return Hit{s.id, s.priority};
}

// ---- node splits and rebuilds ----------------------------------------------

void StabMax::ensure_states() {
    if (states_.size() < tree_.node_count()) states_.resize(tree_.node_count());
}

void StabMax::build_list(NodeId u, const std::vector<std::uint32_t>& uids) {
    NodeState& s = st(u);
    const unsigned width = static_cast<unsigned>(tree_.node(u).children.size());
    s.comp = LabeledList<Block>(width);
    const bool is_root = u == tree_.root();
    const unsigned g = params_.bounded_dims;
    const std::size_t cap = std::max<std::uint32_t>(1, block_max_ / 2);
    const std::size_t nb = (uids.size() + cap - 1) / cap;
    std::optional<BlockHandle> last;
    std::size_t i = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        const std::size_t end = uids.size() * (k + 1) / nb;
        Block b(block_max_, g);
        std::uint32_t at = 0;
        for (; i < end; ++i) {
            const Record& r = recs_[uids[i]];
            b.insert(at++, ident_for(u, r), tag_for(u, r), uids[i], {r.lo.data(), g}, {r.hi.data(), g});
        }
        last = s.comp.insert_after(last, std::move(b));
        ++stats_.block_insertions;
        if (is_root) {
            const Block& placed = s.comp[*last];
            for (std::uint32_t p = 1; p <= placed.size(); ++p) root_pos_[placed.uid(p)] = {*last, placed.stamp_at(p)};
        }
    }
    stats_.max_blocks = std::max<std::uint64_t>(stats_.max_blocks, s.comp.size());
    rebuild_summaries(u);
}

// Child k of w was just split into k and k+1. Indices past k shift by one;
// only entries that touched child k need their identifier and tag again.
// Returns the children whose links must be rebuilt: k, k+1 and every child
// named by an identifier that changed. Changed entries lose their links.
std::vector<unsigned> StabMax::recompute_in_place(NodeId w, unsigned k) {
    NodeState& s = st(w);
    std::vector<unsigned> dirty{k, k + 1};
    for (BlockHandle h : s.comp.handles()) {
        Block& b = s.comp[h];
        b.shift_children(k);
        for (std::uint32_t p = 1; p <= b.size(); ++p) {
            const Identifier old = b.ident(p);
            const Tag t = b.tag(p);
            if (old.c1 != k && old.c2 != k && !(t.live() && t.l <= k && k <= t.r)) continue;
            const Record& r = recs_[b.uid(p)];
            const Identifier now = ident_for(w, r);
            if (!(now == old)) {
                b.clear_child_link(p, 0);
                b.clear_child_link(p, 1);
                for (unsigned c : {unsigned{old.c1}, unsigned{old.c2}, unsigned{now.c1}, unsigned{now.c2}})
                    if (c != 0) dirty.push_back(c);
                b.set_ident(p, now);
            }
            b.set_tag(p, tag_for(w, r));
        }
    }
    rebuild_summaries(w);
    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    return dirty;
}

void StabMax::relink_all(NodeId w) {
    if (tree_.node(w).leaf()) return;
    std::vector<unsigned> all(tree_.node(w).children.size());
    for (unsigned f = 1; f <= all.size(); ++f) all[f - 1] = f;
    relink_children(w, all);
}

// Rebuilds the links between w and each child in `only` (sorted).
void StabMax::relink_children(NodeId w, const std::vector<unsigned>& only) {
    NodeState& s = st(w);
    const unsigned width = static_cast<unsigned>(tree_.node(w).children.size());
    std::vector<char> want(width + 1, 0);
    for (unsigned f : only) want.at(f) = 1;
    std::vector<std::vector<Position>> par(width + 1);
    for (BlockHandle h : s.comp.handles()) {
        Block& b = s.comp[h];
        for (std::uint32_t p = 1; p <= b.size(); ++p) {
            const Identifier id = b.ident(p);
            for (unsigned lane = 0; lane < 2; ++lane) {
                const unsigned c = lane == 0 ? id.c1 : id.c2;
                if (c == 0 || !want[c]) continue;
                b.clear_child_link(p, lane);
                par[c].push_back({h, b.stamp_at(p)});
            }
        }
    }
    for (unsigned f : only) {
        const NodeId c = tree_.child(w, f);
        auto& comp = st(c).comp;
        for (BlockHandle h : comp.handles()) comp[h].clear_parent_links();
        const auto kid = positions(c);
        if (kid.size() != par[f].size()) throw std::logic_error("identifiers disagree with child list");
        for (std::size_t i = 0; i < kid.size(); ++i) {
            const bool first_parent = i == 0 || !(par[f][i].block == par[f][i - 1].block);
            const bool first_child = i == 0 || !(kid[i].block == kid[i - 1].block);
            if (first_parent || first_child) link(w, par[f][i], f, c, kid[i]);
        }
    }
}

void StabMax::split_node(NodeId u) {
    std::vector<std::uint32_t> all;
    for (const Position& p : positions(u)) all.push_back(uid_at(u, p));
    const SplitEvent ev = tree_.split(u);
    ensure_states();
    ++stats_.node_splits;

    for (NodeId half : {ev.left, ev.right}) {
        std::vector<std::uint32_t> mine;
        for (std::uint32_t uid : all)
            if (tree_.holds(half, recs_[uid].s.left, recs_[uid].s.right)) mine.push_back(uid);
        build_list(half, mine);
        relink_all(half);
    }
    // The parent keeps its blocks; identifiers and tags change only because
    // child indices past the split shift and some intervals now cover u' or u''.
    if (ev.new_root) {
        build_list(ev.parent, all);
        relink_all(ev.parent);
    } else {
        relink_children(ev.parent, recompute_in_place(ev.parent, tree_.child_index(ev.left)));
    }
}

void StabMax::handle_splits(NodeId leaf) {
    for (;;) {
        const auto over = tree_.split_check(leaf);
        if (over.empty()) return;
        split_node(over.front());
    }
}

void StabMax::rebuild_from(std::vector<Record> live) {
    std::sort(live.begin(), live.end(), [](const Record& a, const Record& b) {
        return TotalOrderKey{a.s.priority, a.s.id} < TotalOrderKey{b.s.priority, b.s.id};
    });
    recs_ = std::move(live);
    live_.clear();
    order_.clear();
    root_pos_.assign(recs_.size(), {});
    std::vector<EndpointSlot> slots;
    slots.reserve(2 * recs_.size());
    for (std::uint32_t uid = 0; uid < recs_.size(); ++uid) {
        live_[recs_[uid].s.id] = uid;
        order_.emplace(order_key(uid), uid);
        slots.push_back({recs_[uid].s.left, uid});
        slots.push_back({recs_[uid].s.right, uid});
    }
    schedule_.reset(recs_.size());
    tree_ = BaseTree(params_.tree.resolved_fanout(recs_.size()));
    block_max_ = params_.tree.resolved_block_max(recs_.size());
    tree_.build(std::move(slots));

    std::vector<std::vector<std::uint32_t>> lists(tree_.node_count());
    for (std::uint32_t uid = 0; uid < recs_.size(); ++uid)
        for (const NodeAssign& a : tree_.assign(recs_[uid].s.left, recs_[uid].s.right)) lists[a.node].push_back(uid);
    states_.clear();
    ensure_states();
    for (NodeId u = 0; u < tree_.node_count(); ++u) build_list(u, lists[u]);
    for (NodeId u = 0; u < tree_.node_count(); ++u) relink_all(u);
}

void StabMax::global_rebuild() {
    std::vector<Record> live;
    live.reserve(live_.size());
    for (const auto& [id, uid] : live_) live.push_back(recs_[uid]);
    rebuild_from(std::move(live));
    ++stats_.rebuilds;
}

// ---- accounting and audit --------------------------------------------------

std::size_t StabMax::total_entries() const {
    std::size_t n = 0;
    for (NodeId u = 0; u < tree_.node_count(); ++u)
        for (BlockHandle h : st(u).comp.handles()) n += st(u).comp[h].size();
    return n;
}

std::size_t StabMax::dead_entries() const {
    std::size_t n = 0;
    for (NodeId u = 0; u < tree_.node_count(); ++u)
        for (BlockHandle h : st(u).comp.handles()) {
            const Block& b = st(u).comp[h];
            for (std::uint32_t p = 1; p <= b.size(); ++p) n += !recs_[b.uid(p)].live;
        }
    return n;
}

std::vector<std::string> StabMax::audit() const {
    std::vector<std::string> errs = tree_.audit();
    auto fail = [&](NodeId u, const std::string& what) {
        std::ostringstream os;
        os << "list " << u << ": " << what;
        errs.push_back(os.str());
    };
    auto same_ident = [](Identifier a, Identifier b) {
        return (a.c1 == b.c1 && a.c2 == b.c2) || (a.c1 == b.c2 && a.c2 == b.c1);
    };
    // Does not call the navigation helpers (they count probes); walks links directly.
    auto* self = const_cast<StabMax*>(this);
    const std::uint64_t saved_probes = self->probe_acc_;

    std::size_t entries = 0, dead = 0;
    for (NodeId u = 0; u < tree_.node_count(); ++u) {
        const NodeState& s = st(u);
        const TreeNode& node = tree_.node(u);
        const unsigned width = static_cast<unsigned>(node.children.size());
        const bool is_root = u == tree_.root();
        const auto hs = s.comp.handles();
        std::optional<OrderKey> prev_key;
        std::unordered_map<TagKey, std::vector<std::uint64_t>> want_d;
        for (std::size_t bi = 0; bi < hs.size(); ++bi) {
            const Block& b = s.comp[hs[bi]];
            if (bi > 0 && !(s.comp.label(hs[bi - 1]) < s.comp.label(hs[bi]))) fail(u, "labels not increasing");
            if (b.size() > block_max_ || (hs.size() > 1 && b.size() < block_max_ / 4)) fail(u, "block fill out of bounds");
            if (b.size() == 0) fail(u, "empty block");
            if (b.size() > 0 && !is_root && !b.has_parent_link(1)) fail(u, "block start lacks a parent link");
            for (unsigned f = 1; f <= width; ++f) {
                const bool has = b.count(f) > 0;
                if (has != s.comp.is_marked(hs[bi], f)) fail(u, "mark disagrees with block contents");
                if (has) {
                    const std::uint32_t q = b.select(f, 1);
                    if (!b.has_child_link(q, b.ident(q).slot_of(f))) fail(u, "first child entry lacks a link");
                }
            }
            for (const auto& [k, c] : b.tag_counts()) want_d[k].push_back(s.comp.label(hs[bi]));
            for (std::uint32_t p = 1; p <= b.size(); ++p) {
                const std::uint32_t uid = b.uid(p);
                const Record& r = recs_[uid];
                ++entries;
                dead += !r.live;
                const OrderKey key = order_key(uid);
                if (prev_key && !(*prev_key < key)) fail(u, "entries out of priority order");
                prev_key = key;
                if (!tree_.holds(u, r.s.left, r.s.right)) fail(u, "entry not held by node");
                if (!same_ident(b.ident(p), ident_for(u, r))) fail(u, "identifier mismatch");
                if (!(b.tag(p) == tag_for(u, r))) fail(u, "tag mismatch");
                if (is_root && !(root_pos_[uid] == Position{hs[bi], b.stamp_at(p)})) fail(u, "root table mismatch");
                if (b.has_parent_link(p)) {
                    const Position t = b.parent_target(p);
                    const NodeState& ps = st(node.parent);
                    if (!ps.comp.is_live(t.block) || !ps.comp[t.block].has_stamp(t.stamp)) {
                        fail(u, "dangling parent link");
                    } else {
                        const Block& pb = ps.comp[t.block];
                        const std::uint32_t at = pb.pos_of_stamp(t.stamp);
                        const unsigned fu = tree_.child_index(u);
                        if (pb.uid(at) != uid) fail(u, "parent link names another interval");
                        else if (!pb.ident(at).has(fu) || !pb.has_child_link(at, pb.ident(at).slot_of(fu)) ||
                                 !(pb.child_target(at, pb.ident(at).slot_of(fu)) == Position{hs[bi], b.stamp_at(p)}))
                            fail(u, "parent link not mirrored");
                    }
                }
                const Identifier id = b.ident(p);
                for (unsigned slot = 0; slot < 2; ++slot) {
                    if (!b.has_child_link(p, slot)) continue;
                    const unsigned f = slot == 0 ? id.c1 : id.c2;
                    if (f == 0) {
                        fail(u, "child link on an empty lane");
                        continue;
                    }
                    const Position t = b.child_target(p, slot);
                    const NodeState& cs = st(tree_.child(u, f));
                    if (!cs.comp.is_live(t.block) || !cs.comp[t.block].has_stamp(t.stamp) ||
                        cs.comp[t.block].uid(cs.comp[t.block].pos_of_stamp(t.stamp)) != uid)
                        fail(u, "dangling child link");
                }
            }
        }
        // Summaries.
        if (want_d.size() != s.d.size()) fail(u, "successor sets disagree with tags");
        for (auto& [k, labels] : want_d) {
            auto it = s.d.find(k);
            std::sort(labels.begin(), labels.end());
            if (it == s.d.end() || it->second.elements() != labels) {
                fail(u, "successor set contents wrong");
                continue;
            }
            if (s.m.key(tag_key_l(k), tag_key_r(k), tag_key_box(k)) != labels.back()) fail(u, "max index entry stale");
        }
        if (s.m.size() != want_d.size()) fail(u, "max index has extra entries");
        // Children hold exactly the entries whose identifiers name them, in the same order.
        std::vector<std::vector<std::uint32_t>> mine(width + 1);
        for (const Position& p : self->positions(u)) {
            const Block& b = s.comp[p.block];
            const std::uint32_t at = b.pos_of_stamp(p.stamp);
            const Identifier id = b.ident(at);
            if (id.c1 != 0 && id.c1 <= width) mine[id.c1].push_back(b.uid(at));
            if (id.c2 != 0 && id.c2 <= width && id.c2 != id.c1) mine[id.c2].push_back(b.uid(at));
        }
        for (unsigned f = 1; f <= width; ++f) {
            std::vector<std::uint32_t> theirs;
            const NodeId c = tree_.child(u, f);
            for (const Position& p : self->positions(c)) theirs.push_back(uid_at(c, p));
            if (mine[f] != theirs) fail(u, "child list differs from identifiers");
        }
        if (errs.size() > 50) break;
    }
    if (errs.empty()) {
        // Navigation is invertible. Every block's first and last entry are
        // checked plus every 8th entry; the links themselves were checked above.
        for (NodeId u = 0; u < tree_.node_count() && errs.empty(); ++u) {
            if (u == tree_.root()) continue;
            const NodeId w = tree_.node(u).parent;
            const unsigned f = tree_.child_index(u);
            const auto all = self->positions(u);
            for (std::size_t i = 0; i < all.size(); ++i) {
                const Position& p = all[i];
                const bool edge = i == 0 || i + 1 == all.size() || !(all[i - 1].block == p.block) ||
                                  !(all[i + 1].block == p.block);
                if (!edge && i % 8 != 0) continue;
                const Position up = self->nav_up(u, p);
                if (uid_at(w, up) != uid_at(u, p) || !(self->nav_down(w, up, f) == p)) {
                    fail(u, "navigation is not invertible");
                    break;
                }
            }
        }
    }
    self->probe_acc_ = saved_probes;
    if (positions(tree_.root()).size() != order_.size())
        errs.push_back("root list misses intervals");
    if (2 * dead > entries) errs.push_back("more than half the entries are dead");
    return errs;
}

}  // namespace stab
