#include "stab/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "stab/multidim.hpp"
#include "stab/oracle.hpp"
#include "stab/stab_max.hpp"
#include "stab/stab_sum.hpp"

namespace stab::harness {

// ---- trace format ----------------------------------------------------------

ParseError::ParseError(std::size_t line, const std::string& what)
    : usage_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

template <class T>
T parse_num(const std::string& tok, std::size_t line) {
    T v{};
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ParseError(line, "bad number '" + tok + "'");
    return v;
}

}  // namespace

std::vector<Op> parse_trace(std::istream& in) {
    std::vector<Op> ops;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        std::istringstream ls(text);
        std::vector<std::string> t;
        for (std::string w; ls >> w;) t.push_back(w);
        if (t.empty() || t[0][0] == '#') continue;
        auto need = [&](std::size_t n) {
            if (t.size() != n) throw ParseError(line, "expected " + std::to_string(n - 1) + " fields after " + t[0]);
        };
        Op op;
        const std::string& k = t[0];
        if (k == "I") {
            need(5);
            op.kind = OpKind::Insert;
            op.id = parse_num<IntervalId>(t[1], line);
            op.left = parse_num<Coord>(t[2], line);
            op.right = parse_num<Coord>(t[3], line);
            op.priority = parse_num<Priority>(t[4], line);
            if (op.left > op.right) throw ParseError(line, "left endpoint exceeds right");
        } else if (k == "D") {
            need(2);
            op.kind = OpKind::Delete;
            op.id = parse_num<IntervalId>(t[1], line);
        } else if (k == "Q" || k == "S") {
            need(2);
            op.kind = k == "Q" ? OpKind::Query : OpKind::Count;
            op.x = parse_num<Coord>(t[1], line);
        } else if (k == "IR") {
            if (t.size() < 3) throw ParseError(line, "IR needs an id and a dimension");
            op.kind = OpKind::InsertRect;
            op.id = parse_num<IntervalId>(t[1], line);
            const auto d = parse_num<unsigned>(t[2], line);
            if (d == 0 || d > 8) throw ParseError(line, "dimension must lie in [1, 8]");
            need(4 + 2 * static_cast<std::size_t>(d));
            for (unsigned i = 0; i < d; ++i) {
                const Coord lo = parse_num<Coord>(t[3 + 2 * i], line);
                const Coord hi = parse_num<Coord>(t[4 + 2 * i], line);
                if (lo > hi) throw ParseError(line, "rectangle side with lo > hi");
                op.dims.push_back({lo, hi});
            }
            op.priority = parse_num<Priority>(t.back(), line);
        } else if (k == "QP") {
            if (t.size() < 2) throw ParseError(line, "QP needs coordinates");
            op.kind = OpKind::QueryPoint;
            for (std::size_t i = 1; i < t.size(); ++i) op.point.push_back(parse_num<Coord>(t[i], line));
        } else {
            throw ParseError(line, "unknown operation '" + k + "'");
        }
        ops.push_back(std::move(op));
    }
    return ops;
}

std::string format_op(const Op& op) {
    std::ostringstream os;
    switch (op.kind) {
        case OpKind::Insert: os << "I " << op.id << ' ' << op.left << ' ' << op.right << ' ' << op.priority; break;
        case OpKind::Delete: os << "D " << op.id; break;
        case OpKind::Query: os << "Q " << op.x; break;
        case OpKind::Count: os << "S " << op.x; break;
        case OpKind::InsertRect:
            os << "IR " << op.id << ' ' << op.dims.size();
            for (const Range& r : op.dims) os << ' ' << r.lo << ' ' << r.hi;
            os << ' ' << op.priority;
            break;
        case OpKind::QueryPoint:
            os << "QP";
            for (Coord c : op.point) os << ' ' << c;
            break;
    }
    return os.str();
}

void write_trace(std::ostream& out, const std::vector<Op>& ops) {
    for (const Op& op : ops) out << format_op(op) << '\n';
}

std::string format_hit(const MaybeHit& h) {
    if (!h) return "-";
    return std::to_string(h->id) + ' ' + std::to_string(h->priority);
}

// ---- runners ---------------------------------------------------------------

struct Runner::Impl {
    EngineConfig cfg;
    StabMax sm;
    StabSum ss;
    std::unique_ptr<MultiStab> md;

    explicit Impl(const EngineConfig& c) : cfg(c), sm(max_params(c)), ss(c.tree) {}

    static StabMaxParams max_params(const EngineConfig& c) {
        StabMaxParams p;
        p.tree = c.tree;
        return p;
    }

    bool known(IntervalId id) const {
        return sm.contains_id(id) || ss.contains_id(id) || (md && md->contains_id(id));
    }
};

Runner::Runner(EngineConfig cfg) : impl_(std::make_unique<Impl>(cfg)) {}
Runner::Runner(Runner&&) noexcept = default;
Runner::~Runner() = default;

std::optional<std::string> Runner::apply(const Op& op) {
    Impl& s = *impl_;
    switch (op.kind) {
        case OpKind::Insert: {
            if (s.known(op.id)) throw usage_error("duplicate id " + std::to_string(op.id));
            const Interval iv{op.id, op.left, op.right, op.priority};
            if (s.cfg.with_max) s.sm.insert(iv);
            if (s.cfg.with_count) s.ss.insert(iv);
            return std::nullopt;
        }
        case OpKind::Delete:
            if (s.sm.contains_id(op.id) || s.ss.contains_id(op.id)) {
                if (s.cfg.with_max) s.sm.erase(op.id);
                if (s.cfg.with_count) s.ss.erase(op.id);
            } else if (s.md && s.md->contains_id(op.id)) {
                s.md->erase(op.id);
            } else {
                throw usage_error("unknown id " + std::to_string(op.id));
            }
            return std::nullopt;
        case OpKind::Query: {
            if (!s.cfg.with_max) throw usage_error("max queries are disabled");
            MaybeHit h = s.sm.query(op.x);
            if (s.cfg.inject_fault && h && h->id % 7 == 3) h.reset();
            return format_hit(h);
        }
        case OpKind::Count:
            if (!s.cfg.with_count) throw usage_error("count queries are disabled");
            return std::to_string(s.ss.count(op.x));
        case OpKind::InsertRect: {
            if (s.known(op.id)) throw usage_error("duplicate id " + std::to_string(op.id));
            if (!s.md) {
                if (op.dims.size() <= s.cfg.bounded) throw usage_error("rectangle needs an unbounded dimension");
                MultiParams mp;
                mp.d = static_cast<unsigned>(op.dims.size()) - s.cfg.bounded;
                mp.g = s.cfg.bounded;
                mp.beta = s.cfg.beta;
                mp.tree = s.cfg.tree;
                s.md = std::make_unique<MultiStab>(mp);
            }
            s.md->insert(Rectangle{op.id, op.dims, op.priority});
            return std::nullopt;
        }
        case OpKind::QueryPoint: {
            if (!s.md) return format_hit(std::nullopt);
            MaybeHit h = s.md->query(QueryPoint{op.point});
            if (s.cfg.inject_fault && h && h->id % 7 == 3) h.reset();
            return format_hit(h);
        }
    }
    return std::nullopt;
}

std::vector<std::string> Runner::audit() const {
    std::vector<std::string> out;
    if (impl_->cfg.with_max) out = impl_->sm.audit();
    if (impl_->cfg.with_count)
        for (auto& e : impl_->ss.audit()) out.push_back("sum: " + e);
    if (impl_->md)
        for (auto& e : impl_->md->audit()) out.push_back("multi: " + e);
    return out;
}

struct OracleRunner::Impl {
    unsigned bounded = 0;
    oracle::FlatSet ivs;
    oracle::FlatRects rects;
    std::unordered_set<IntervalId> rect_ids;
    std::size_t rect_dim = 0;
};

OracleRunner::OracleRunner(unsigned bounded) : impl_(std::make_unique<Impl>()) { impl_->bounded = bounded; }
OracleRunner::OracleRunner(OracleRunner&&) noexcept = default;
OracleRunner::~OracleRunner() = default;

std::optional<std::string> OracleRunner::apply(const Op& op) {
    Impl& s = *impl_;
    switch (op.kind) {
        case OpKind::Insert:
            if (s.rect_ids.count(op.id)) throw usage_error("duplicate id " + std::to_string(op.id));
            s.ivs.insert({op.id, op.left, op.right, op.priority});
            return std::nullopt;
        case OpKind::Delete:
            if (s.rect_ids.erase(op.id))
                s.rects.erase(op.id);
            else
                s.ivs.erase(op.id);
            return std::nullopt;
        case OpKind::Query: return format_hit(s.ivs.max(op.x));
        case OpKind::Count: return std::to_string(s.ivs.count(op.x));
        case OpKind::InsertRect: {
            if (s.rect_ids.count(op.id)) throw usage_error("duplicate id " + std::to_string(op.id));
            if (s.ivs.contains(op.id)) throw usage_error("duplicate id " + std::to_string(op.id));
            if (s.rect_dim == 0) s.rect_dim = op.dims.size();
            if (op.dims.size() != s.rect_dim) throw usage_error("rectangle dimension mismatch");
            s.rects.insert(Rectangle{op.id, op.dims, op.priority});
            s.rect_ids.insert(op.id);
            return std::nullopt;
        }
        case OpKind::QueryPoint:
            if (s.rect_dim != 0 && op.point.size() != s.rect_dim) throw usage_error("query dimension mismatch");
            return format_hit(oracle::o_max_dd(s.rects.items(), QueryPoint{op.point}));
    }
    return std::nullopt;
}

std::vector<std::string> run_trace(const std::vector<Op>& ops, const EngineConfig& cfg) {
    Runner r(cfg);
    std::vector<std::string> out;
    for (const Op& op : ops)
        if (auto line = r.apply(op)) out.push_back(std::move(*line));
    return out;
}

std::vector<std::string> run_oracle(const std::vector<Op>& ops, unsigned bounded) {
    OracleRunner r(bounded);
    std::vector<std::string> out;
    for (const Op& op : ops)
        if (auto line = r.apply(op)) out.push_back(std::move(*line));
    return out;
}

// ---- workloads -------------------------------------------------------------

Dist parse_dist(const std::string& name) {
    if (name == "uniform") return Dist::Uniform;
    if (name == "nested") return Dist::Nested;
    if (name == "clustered") return Dist::Clustered;
    if (name == "churn") return Dist::Churn;
    throw usage_error("unknown distribution '" + name + "'");
}

std::string dist_name(Dist d) {
    switch (d) {
        case Dist::Uniform: return "uniform";
        case Dist::Nested: return "nested";
        case Dist::Clustered: return "clustered";
        case Dist::Churn: return "churn";
    }
    return "?";
}

namespace {

constexpr Coord kUniverse = 1'000'000;

class Workload {
public:
    explicit Workload(const WorkloadSpec& spec) : spec_(spec), rng_(spec.seed) {
        for (auto& c : centers_) c = kUniverse / 4 + pick(kUniverse / 2);
        for (auto& h : hotspots_) h = pick(kUniverse);
    }

    std::vector<Op> run() {
        std::vector<Op> ops;
        ops.reserve(spec_.ops);
        for (std::size_t i = 0; i < spec_.ops; ++i) {
            unsigned ins = spec_.pct_insert, del = spec_.pct_delete;
            if (spec_.dist == Dist::Churn) {
                // Alternating phases average out to the requested mix.
                const unsigned shift = std::min({20u, ins, del});
                if ((i / 500) % 2 == 0) {
                    ins += shift;
                    del -= shift;
                } else {
                    ins -= shift;
                    del += shift;
                }
            }
            const unsigned r = static_cast<unsigned>(rng_() % 100);
            if (r < ins || (r < ins + del && live_.empty()))
                ops.push_back(insert());
            else if (r < ins + del)
                ops.push_back(erase());
            else
                ops.push_back(query());
        }
        return ops;
    }

private:
    Coord pick(Coord n) { return static_cast<Coord>(rng_() % static_cast<std::uint64_t>(n)); }
    bool rects() const { return spec_.dims > 1 || spec_.bounded > 0; }

    Range side() {
        Coord a = 0, b = 0;
        switch (spec_.dist) {
            case Dist::Uniform:
                a = pick(kUniverse);
                b = pick(kUniverse);
                break;
            case Dist::Nested: {
                // Families of nested intervals around a few centers.
                const Coord c = centers_[rng_() % centers_.size()];
                const unsigned depth = static_cast<unsigned>(rng_() % 400);
                depth_ = depth;
                const auto radius = static_cast<Coord>(static_cast<double>(kUniverse / 4) * std::pow(0.985, depth));
                a = c - radius - pick(3);
                b = c + radius + pick(3);
                break;
            }
            case Dist::Clustered: {
                const Coord h1 = hotspots_[rng_() % hotspots_.size()];
                const Coord h2 = rng_() % 5 == 0 ? hotspots_[rng_() % hotspots_.size()] : h1;
                a = h1 + pick(101) - 50;
                b = h2 + pick(101) - 50;
                break;
            }
            case Dist::Churn:
                a = pick(kUniverse);
                b = a + pick(20000);
                break;
        }
        if (a > b) std::swap(a, b);
        return {a, b};
    }

    Priority priority() {
        switch (spec_.dist) {
            case Dist::Nested:
                return rng_() % 10 < 7 ? Priority{depth_} * 1000 + rng_() % 1000 : rng_() % (1u << 20);
            case Dist::Clustered: return rng_() % 16;  // heavy ties: inserts pile up at a few list positions
            default: return rng_() % (1u << 20);
        }
    }

    Coord point() {
        if (!endpoints_.empty() && rng_() % 10 < 3) {
            const Coord e = endpoints_[rng_() % endpoints_.size()];
            return e + static_cast<Coord>(rng_() % 3) - 1;
        }
        switch (spec_.dist) {
            case Dist::Nested:
                if (rng_() % 2 == 0) return centers_[rng_() % centers_.size()] + pick(2001) - 1000;
                break;
            case Dist::Clustered: return hotspots_[rng_() % hotspots_.size()] + pick(141) - 70;
            default: break;
        }
        return pick(kUniverse + 20) - 10;
    }

    void remember(Coord x) {
        if (endpoints_.size() < 4096)
            endpoints_.push_back(x);
        else
            endpoints_[rng_() % endpoints_.size()] = x;
    }

    Op insert() {
        Op op;
        op.id = next_id_++;
        if (rects()) {
            op.kind = OpKind::InsertRect;
            for (unsigned i = 0; i < spec_.dims; ++i) {
                op.dims.push_back(side());
                remember(op.dims.back().lo);
            }
            for (unsigned i = 0; i < spec_.bounded; ++i) {
                Coord a = pick(spec_.beta), b = pick(spec_.beta);
                op.dims.push_back({std::min(a, b), std::max(a, b)});
            }
        } else {
            op.kind = OpKind::Insert;
            const Range r = side();
            op.left = r.lo;
            op.right = r.hi;
            remember(r.lo);
            remember(r.hi);
        }
        op.priority = priority();
        live_.push_back(op.id);
        return op;
    }

    Op erase() {
        std::size_t k = rng_() % live_.size();
        if (spec_.dist == Dist::Churn && rng_() % 2 == 0) {
            const std::size_t recent = std::min<std::size_t>(16, live_.size());
            k = live_.size() - 1 - rng_() % recent;
        }
        Op op;
        op.kind = OpKind::Delete;
        op.id = live_[k];
        live_[k] = live_.back();
        live_.pop_back();
        return op;
    }

    Op query() {
        Op op;
        if (rects()) {
            op.kind = OpKind::QueryPoint;
            for (unsigned i = 0; i < spec_.dims; ++i) op.point.push_back(point());
            for (unsigned i = 0; i < spec_.bounded; ++i) op.point.push_back(pick(spec_.beta));
            return op;
        }
        switch (spec_.queries) {
            case QueryMix::Max: op.kind = OpKind::Query; break;
            case QueryMix::Count: op.kind = OpKind::Count; break;
            case QueryMix::Both: op.kind = rng_() % 2 ? OpKind::Query : OpKind::Count; break;
        }
        op.x = point();
        return op;
    }

    WorkloadSpec spec_;
    std::mt19937_64 rng_;
    std::vector<IntervalId> live_;
    std::vector<Coord> endpoints_;
    std::array<Coord, 16> centers_{};
    std::array<Coord, 8> hotspots_{};
    unsigned depth_ = 0;
    IntervalId next_id_ = 1;
};

}  // namespace

std::vector<Op> generate(const WorkloadSpec& spec) {
    if (spec.dims < 1) throw usage_error("need at least one unbounded dimension");
    if (spec.pct_insert + spec.pct_delete > 100) throw usage_error("operation mix exceeds 100%");
    if (spec.bounded > 0 && spec.beta < 1) throw usage_error("beta must be positive");
    return Workload(spec).run();
}

// ---- differential runs -----------------------------------------------------

DiffResult diff(const std::vector<Op>& ops, const EngineConfig& cfg, DiffOptions opt) {
    using clock = std::chrono::steady_clock;
    DiffResult res;
    Runner sut(cfg);
    OracleRunner ref(cfg.bounded);
    auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
    for (std::size_t i = 0; i < ops.size(); ++i) {
        auto t0 = clock::now();
        std::optional<std::string> got;
        std::string error;
        try {
            got = sut.apply(ops[i]);
        } catch (const std::exception& e) {
            error = std::string("error: ") + e.what();
        }
        auto t1 = clock::now();
        const auto want = ref.apply(ops[i]);
        auto t2 = clock::now();
        res.structure_seconds += secs(t0, t1);
        res.oracle_seconds += secs(t1, t2);
        if (!error.empty() || got != want) {
            res.ok = false;
            res.first_bad = i;
            res.expected = want.value_or("(no output)");
            res.got = error.empty() ? got.value_or("(no output)") : error;
            return res;
        }
        if (want) ++res.queries;
        if (opt.audit_every != 0 && (i + 1) % opt.audit_every == 0) {
            auto a0 = clock::now();
            auto errs = sut.audit();
            res.audit_seconds += secs(a0, clock::now());
            ++res.audits;
            if (!errs.empty()) {
                res.ok = false;
                res.first_bad = i;
                res.expected = "clean audit";
                res.got = errs.front();
                res.audit_errors = std::move(errs);
                return res;
            }
        }
    }
    return res;
}

std::vector<Op> minimize(std::vector<Op> ops, const std::function<bool(const std::vector<Op>&)>& fails,
                         std::size_t budget) {
    auto without = [](const std::vector<Op>& src, std::size_t from, std::size_t to) {
        std::unordered_set<IntervalId> gone;
        for (std::size_t i = from; i < to; ++i)
            if (src[i].kind == OpKind::Insert || src[i].kind == OpKind::InsertRect) gone.insert(src[i].id);
        std::vector<Op> out;
        out.reserve(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (i >= from && i < to) continue;
            if (src[i].kind == OpKind::Delete && gone.count(src[i].id)) continue;
            out.push_back(src[i]);
        }
        return out;
    };
    std::size_t spent = 0;
    for (std::size_t chunk = std::max<std::size_t>(1, ops.size() / 2); spent < budget; chunk /= 2) {
        for (std::size_t start = 0; start < ops.size() && spent < budget;) {
            auto cand = without(ops, start, std::min(ops.size(), start + chunk));
            ++spent;
            if (!cand.empty() && fails(cand))
                ops = std::move(cand);
            else
                start += chunk;
        }
        if (chunk == 1) break;
    }
    return ops;
}

// ---- benchmark -------------------------------------------------------------

BenchRow bench_one(std::size_t n, std::size_t queries, const EngineConfig& cfg, std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    StabMaxParams p;
    p.tree = cfg.tree;
    StabMax sm(p);
    std::mt19937_64 rng(seed);
    std::vector<Interval> ivs(n);
    for (std::size_t i = 0; i < n; ++i) {
        Coord a = static_cast<Coord>(rng() % kUniverse), b = static_cast<Coord>(rng() % kUniverse);
        ivs[i] = {i + 1, std::min(a, b), std::max(a, b), rng() % (1u << 20)};
    }
    std::vector<Coord> xs(queries);
    for (auto& x : xs) x = static_cast<Coord>(rng() % kUniverse);

    auto ns = [](clock::time_point a, clock::time_point b, std::size_t k) {
        return k == 0 ? 0.0 : std::chrono::duration<double, std::nano>(b - a).count() / static_cast<double>(k);
    };
    BenchRow row;
    row.n = n;
    auto t0 = clock::now();
    for (const Interval& iv : ivs) sm.insert(iv);
    auto t1 = clock::now();
    row.ns_insert = ns(t0, t1, n);

    const StabStats before = sm.stats();
    std::uint64_t sink = 0;
    t0 = clock::now();
    for (Coord x : xs)
        if (auto h = sm.query(x)) sink += h->id;
    t1 = clock::now();
    row.ns_query = ns(t0, t1, queries);
    const StabStats& after = sm.stats();
    const std::uint64_t visits = after.nodes_visited - before.nodes_visited;
    row.height = sm.height();
    row.nodes_per_query = queries ? static_cast<double>(visits) / static_cast<double>(queries) : 0.0;
    row.probes_per_node =
        visits ? static_cast<double>(after.block_probes - before.block_probes) / static_cast<double>(visits) : 0.0;

    const std::size_t dels = n / 4;
    t0 = clock::now();
    for (std::size_t i = 0; i < dels; ++i) sm.erase(ivs[i * 4].id);
    t1 = clock::now();
    row.ns_delete = ns(t0, t1, dels);
    row.relabels = sm.stats().relabels;
    row.splits = sm.stats().node_splits;
    row.rebuilds = sm.stats().rebuilds;
    (void)sink;
    return row;
}

void write_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
    out << "n,dim,height,nodes_per_query,probes_per_node,relabels,splits,rebuilds,ns_insert,ns_delete,ns_query\n";
    for (const BenchRow& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%u,%u,%.3f,%.3f,%llu,%llu,%llu,%.1f,%.1f,%.1f\n", r.n, r.dim, r.height,
                      r.nodes_per_query, r.probes_per_node, static_cast<unsigned long long>(r.relabels),
                      static_cast<unsigned long long>(r.splits), static_cast<unsigned long long>(r.rebuilds),
                      r.ns_insert, r.ns_delete, r.ns_query);
        out << buf;
    }
}

}  // namespace stab::harness
