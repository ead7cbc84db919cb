// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Expected answers always come from the brute-force oracles.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stab/block.hpp"
#include "stab/harness.hpp"
#include "stab/max_index.hpp"
#include "stab/oracle.hpp"
#include "stab/order_labels.hpp"
#include "stab/stab_max.hpp"
#include "stab/stab_sum.hpp"
#include "stab/succ_set.hpp"

using namespace stab;
using namespace stab::harness;

namespace {

int failures = 0;

void report(int n, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %d [%s] %s: %s\n", n, pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

// Audit results gathered from every fuzz run.
struct AuditTally {
    std::size_t audits = 0;
    std::size_t runs = 0;
    std::vector<std::string> errors;

    void add(const DiffResult& r, const std::string& run) {
        audits += r.audits;
        ++runs;
        for (const std::string& e : r.audit_errors) errors.push_back(run + ": " + e);
    }
} tally;

constexpr Dist kDists[] = {Dist::Uniform, Dist::Nested, Dist::Clustered, Dist::Churn};

// ---- 1, 2: differential soundness in one dimension ----------------------------

void fuzz_1d(int crit, const char* name, QueryMix mix) {
    EngineConfig cfg;
    cfg.with_max = mix == QueryMix::Max;
    cfg.with_count = mix == QueryMix::Count;
    std::size_t queries = 0, bad_runs = 0;
    double run_s = 0, audit_s = 0;
    std::string first;
    for (Dist d : kDists)
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            WorkloadSpec w;
            w.ops = 200000;
            w.seed = seed;
            w.dist = d;
            w.queries = mix;
            const DiffResult r = diff(generate(w), cfg, {1000});
            const std::string tag = dist_name(d) + "/" + std::to_string(seed);
            tally.add(r, tag);
            queries += r.queries;
            run_s += r.structure_seconds + r.oracle_seconds;
            audit_s += r.audit_seconds;
            if (!r.ok) {
                ++bad_runs;
                if (first.empty())
                    first = fmt(" first divergence %s op %zu expected '%s' got '%s'", tag.c_str(), r.first_bad + 1,
                                r.expected.c_str(), r.got.c_str());
            }
        }
    const bool fast = crit != 1 || run_s < 120;
    report(crit, name, bad_runs == 0 && fast,
           fmt("20 runs x 2e5 ops, %zu queries, %zu diverging runs, %.1f s structure+oracle (audits %.1f s extra)%s",
               queries, bad_runs, run_s, audit_s, first.c_str()));
}

// ---- 3: multidimensional soundness ------------------------------------------

void fuzz_multi() {
    struct Shape {
        unsigned d, g, beta;
    };
    std::size_t queries = 0, bad = 0;
    std::string detail;
    for (Shape s : {Shape{2, 0, 8}, Shape{3, 0, 8}, Shape{1, 1, 8}}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            WorkloadSpec w;
            w.ops = 20000;
            w.seed = seed;
            w.dist = kDists[(seed - 1) % 4];
            w.dims = s.d;
            w.bounded = s.g;
            w.beta = s.beta;
            EngineConfig cfg;
            cfg.bounded = s.g;
            cfg.beta = s.beta;
            const DiffResult r = diff(generate(w), cfg, {1000});
            tally.add(r, fmt("d=%u g=%u seed %llu", s.d, s.g, static_cast<unsigned long long>(seed)));
            queries += r.queries;
            if (!r.ok) {
                ++bad;
                detail += fmt(" [d=%u g=%u seed %llu op %zu]", s.d, s.g, static_cast<unsigned long long>(seed),
                              r.first_bad + 1);
            }
        }
    }
    report(3, "multidimensional soundness", bad == 0,
           fmt("(2,0), (3,0), (1,1,beta=8) x 3 seeds x 2e4 ops, %zu queries, %zu diverging runs", queries, bad) +
               detail);
}

// ---- 4: query node budget ----------------------------------------------------

void node_budget() {
    bool ok = true;
    std::string detail;
    std::mt19937_64 rng(4);
    for (unsigned k = 10; k <= 18; ++k) {
        const std::size_t n = std::size_t{1} << k;
        StabMaxParams p;
        p.tree = TreeParams{8, 0.125, kDefaultBlockMax};
        StabMax sm(p);
        const Coord universe = 1 << 24;
        for (std::size_t i = 0; i < n; ++i) {
            Coord a = static_cast<Coord>(rng() % universe), b = static_cast<Coord>(rng() % universe);
            if (a > b) std::swap(a, b);
            sm.insert({i + 1, a, b, rng() % 1000000});
        }
        const unsigned bound = static_cast<unsigned>(std::ceil(std::log(n / 8.0) / std::log(8.0))) + 1;
        bool exact = true;
        for (int q = 0; q < 2000; ++q) {
            sm.query(static_cast<Coord>(rng() % universe));
            exact &= sm.last_query_nodes() == sm.height();
        }
        const auto& st = sm.stats();
        const bool row = exact && sm.height() <= bound && st.max_probes_per_node <= 16;
        ok &= row;
        detail += fmt(" n=2^%u:h=%u/%u,probes<=%llu%s", k, sm.height(), bound,
                      static_cast<unsigned long long>(st.max_probes_per_node), row ? "" : "(!)");
    }
    report(4, "query node budget", ok, "phi=8, every query visits height nodes;" + detail);
}

// ---- 6: rebuild discipline ---------------------------------------------------

std::vector<std::string> grid_max(StabMax& sm, const std::vector<Coord>& grid) {
    std::vector<std::string> out;
    for (Coord x : grid) out.push_back(format_hit(sm.query(x)));
    return out;
}

std::vector<std::string> grid_oracle(const oracle::FlatSet& o, const std::vector<Coord>& grid) {
    std::vector<std::string> out;
    for (Coord x : grid) out.push_back(format_hit(o.max(x)));
    return out;
}

void rebuild_discipline() {
    StabMaxParams p;
    p.tree = TreeParams{8, 0.125, 64};
    StabMax sm(p);
    StabSum ss(p.tree);
    oracle::FlatSet o;
    std::mt19937_64 rng(6);
    const Coord universe = 100000;
    std::vector<Coord> grid;
    for (int i = 0; i < 1000; ++i) grid.push_back(i * universe / 1000 + 7);
    std::vector<IntervalId> live;
    IntervalId next = 1;
    std::size_t rebuilds = 0, timing_bad = 0, dead_bad = 0, grid_bad = 0, sum_bad = 0, manual_bad = 0;
    auto add = [&] {
        Coord a = static_cast<Coord>(rng() % universe), b = static_cast<Coord>(rng() % universe);
        if (a > b) std::swap(a, b);
        const Interval iv{next++, a, b, rng() % 500};
        sm.insert(iv);
        ss.insert(iv);
        o.insert(iv);
        live.push_back(iv.id);
    };
    for (int i = 0; i < 3000; ++i) add();
    for (int step = 0; step < 40000 && rebuilds < 12; ++step) {
        if (live.empty() || rng() % 100 < 35) {
            add();
            continue;
        }
        const std::size_t at = rng() % live.size();
        const IntervalId id = live[at];
        live[at] = live.back();
        live.pop_back();

        // With n_hat = 0 (nothing built yet) the first deletion is the earliest point.
        const std::size_t due_at = std::max<std::size_t>(1, (sm.schedule().n_hat + 1) / 2);
        const std::size_t since = sm.schedule().deletions;
        const auto before = sm.stats().rebuilds;
        const std::size_t sum_due = std::max<std::size_t>(1, (ss.schedule().n_hat + 1) / 2), sum_since = ss.schedule().deletions;
        const auto sum_before = ss.stats().rebuilds;
        sm.erase(id);
        ss.erase(id);
        o.erase(id);
        const bool fired = sm.stats().rebuilds != before;
        if (fired != (since + 1 == due_at)) ++timing_bad;
        if ((ss.stats().rebuilds != sum_before) != (sum_since + 1 == sum_due)) ++timing_bad;
        if (fired) {
            ++rebuilds;
            if (sm.dead_entries() != 0) ++dead_bad;
            if (grid_max(sm, grid) != grid_oracle(o, grid)) ++grid_bad;
            for (Coord x : grid)
                if (ss.count(x) != o.count(x)) {
                    ++sum_bad;
                    break;
                }
        }
        if (step % 5000 == 2500) {
            // A forced rebuild in the middle of a phase must not move any answer.
            const auto g0 = grid_max(sm, grid);
            sm.global_rebuild();
            if (grid_max(sm, grid) != g0 || sm.dead_entries() != 0) ++manual_bad;
        }
    }
    const bool ok = rebuilds >= 10 && timing_bad == 0 && dead_bad == 0 && grid_bad == 0 && sum_bad == 0 &&
                    manual_bad == 0;
    report(6, "rebuild discipline", ok,
           fmt("%zu automatic rebuilds; off-schedule %zu, dead after rebuild %zu, grid changes %zu (max) %zu (count), "
               "forced rebuild changes %zu",
               rebuilds, timing_bad, dead_bad, grid_bad, sum_bad, manual_bad));
}

// ---- 7: amortized relabeling -------------------------------------------------

void relabel_cost() {
    struct Row {
        std::string pattern;
        std::uint64_t insertions, blocks, touches;
        double c;
    };
    std::vector<Row> rows;
    const int n = 100000;
    auto finish = [&](const std::string& name, const LabeledList<int>& list) {
        const auto& s = list.stats();
        const double lg = std::log2(static_cast<double>(list.size()));
        const double per = static_cast<double>(s.relabel_touches) / static_cast<double>(s.insertions);
        rows.push_back({name, s.insertions, list.size(), s.relabel_touches, per / (lg * lg)});
    };
    std::mt19937_64 rng(7);
    {
        LabeledList<int> list;
        std::vector<BlockHandle> order{list.insert_after(std::nullopt, 0)};
        for (int i = 1; i < n; ++i) {
            const std::size_t at = rng() % order.size();
            order.insert(order.begin() + static_cast<std::ptrdiff_t>(at) + 1, list.insert_after(order[at], i));
        }
        finish("random", list);
    }
    {
        LabeledList<int> list;
        const BlockHandle head = list.insert_after(std::nullopt, 0);
        for (int i = 1; i < n; ++i) list.insert_after(head, i);
        finish("after_head", list);
    }
    {
        LabeledList<int> list;
        BlockHandle last = list.insert_after(std::nullopt, 0);
        for (int i = 1; i < n; ++i) last = list.insert_after(last, i);
        finish("append", list);
    }
    {
        // Always split the most recent gap: a zig-zag into one spot.
        LabeledList<int> list;
        BlockHandle a = list.insert_after(std::nullopt, 0);
        list.insert_after(a, 1);
        for (int i = 2; i < n; ++i) a = list.insert_after(a, i);
        finish("same_gap", list);
    }
    {
        // Block insertions performed by the stabbing structure itself.
        StabMaxParams p;
        p.tree = TreeParams{8, 0.125, 16};
        StabMax sm(p);
        std::mt19937_64 r2(71);
        IntervalId id = 1;
        while (sm.stats().block_insertions < static_cast<std::uint64_t>(n)) {
            Coord a = static_cast<Coord>(r2() % 1000000), b = static_cast<Coord>(r2() % 1000000);
            if (a > b) std::swap(a, b);
            sm.insert({id++, a, b, r2() % 100000});
        }
        const auto& s = sm.stats();
        const double lg = std::log2(static_cast<double>(std::max<std::uint64_t>(s.max_blocks, 2)));
        const double per = static_cast<double>(s.relabels) / static_cast<double>(s.block_insertions);
        rows.push_back({"structure", s.block_insertions, s.max_blocks, s.relabels, per / (lg * lg)});
    }
    const std::string path = "relabel_cost.csv";
    std::ofstream csv(path);
    csv << "pattern,insertions,blocks,relabel_touches,per_insertion,log2sq_blocks,C\n";
    double worst = 0;
    std::string detail;
    for (const Row& r : rows) {
        const double lg = std::log2(static_cast<double>(std::max<std::uint64_t>(r.blocks, 2)));
        const double per = static_cast<double>(r.touches) / static_cast<double>(r.insertions);
        csv << r.pattern << ',' << r.insertions << ',' << r.blocks << ',' << r.touches << ',' << per << ','
            << lg * lg << ',' << r.c << '\n';
        worst = std::max(worst, r.c);
        detail += fmt(" %s:C=%.3f", r.pattern.c_str(), r.c);
    }
    const bool enough = std::all_of(rows.begin(), rows.end(), [&](const Row& r) { return r.insertions >= 100000; });
    report(7, "amortized relabeling", enough && worst < 64,
           fmt("max C=%.3f over >=1e5 insertions per pattern, written to %s;", worst, path.c_str()) + detail);
}

// ---- 8: sub-structure oracles ------------------------------------------------

void substructures() {
    std::mt19937_64 rng(8);
    // Successor set against a sorted vector.
    std::size_t succ_bad = 0;
    {
        SuccSet s(20);
        std::vector<std::uint64_t> o;
        const std::uint64_t span = 3000;  // dense keys move sets across the small and large forms
        for (int i = 0; i < 100000; ++i) {
            const std::uint64_t x = (rng() % span) * 311;
            auto it = std::lower_bound(o.begin(), o.end(), x);
            const bool has = it != o.end() && *it == x;
            switch (rng() % 5) {
                case 0:
                case 1:
                    if (s.insert(x) == has) ++succ_bad;
                    if (!has) o.insert(it, x);
                    break;
                case 2:
                case 3:
                    if (has) {
                        s.erase(x);
                        o.erase(it);
                    }
                    break;
                default: {
                    const std::uint64_t q = rng() % (std::uint64_t{1} << 20);
                    auto up = std::upper_bound(o.begin(), o.end(), q);
                    const std::optional<std::uint64_t> pred =
                        up == o.begin() ? std::nullopt : std::optional<std::uint64_t>(*std::prev(up));
                    auto lo = std::lower_bound(o.begin(), o.end(), q);
                    const std::optional<std::uint64_t> succ =
                        lo == o.end() ? std::nullopt : std::optional<std::uint64_t>(*lo);
                    succ_bad += s.pred(q) != pred;
                    succ_bad += s.succ(q) != succ;
                    succ_bad += s.contains(q) != std::binary_search(o.begin(), o.end(), q);
                }
            }
            succ_bad += s.size() != o.size();
            if (!o.empty()) succ_bad += s.max() != o.back() || s.min() != o.front();
            else succ_bad += s.max().has_value();
        }
    }
    // Max index against a brute-force argmax over all present pairs.
    std::size_t mi_bad = 0;
    {
        const unsigned width = 16;
        MaxIndex m(width);
        std::map<std::tuple<unsigned, unsigned, std::uint64_t>, std::uint64_t> bf;
        for (int i = 0; i < 10000; ++i) {
            const unsigned l = 1 + static_cast<unsigned>(rng() % width);
            const unsigned r = l + static_cast<unsigned>(rng() % (width - l + 1));
            const std::uint64_t box = rng() % 2 ? 0 : (rng() % 4) | ((4 + rng() % 4) << 8);
            switch (rng() % 3) {
                case 0: {
                    const std::uint64_t k = rng() % 1000;
                    m.set(l, r, k, box);
                    bf[{l, r, box}] = k;
                    break;
                }
                case 1:
                    if (bf.erase({l, r, box})) m.clear(l, r, box);
                    break;
                default: {
                    const unsigned f = 1 + static_cast<unsigned>(rng() % width);
                    const std::uint8_t h[] = {static_cast<std::uint8_t>(rng() % 8)};
                    std::optional<MaxIndex::Cover> want;
                    for (const auto& [key, v] : bf) {
                        auto [a, b, x] = key;
                        if (a > f || f > b || !MaxIndex::box_covers(x, h)) continue;
                        if (!want || v > want->key) want = MaxIndex::Cover{a, b, x, v};
                    }
                    mi_bad += m.query_cover(f, h) != want;
                }
            }
        }
    }
    // Rank/select inverse laws on random blocks.
    std::size_t bs_bad = 0;
    for (int round = 0; round < 1000; ++round) {
        const std::uint32_t cap = 8 + static_cast<std::uint32_t>(rng() % 250);
        Block b(cap);
        std::vector<Identifier> shadow;
        const std::uint32_t n = 1 + static_cast<std::uint32_t>(rng() % cap);
        for (std::uint32_t i = 0; i < n; ++i) {
            Identifier id{static_cast<std::uint8_t>(rng() % 17), 0};
            if (id.c1 != 0 && rng() % 3 == 0) id.c2 = static_cast<std::uint8_t>(1 + rng() % 16);
            if (id.c2 == id.c1) id.c2 = 0;
            const std::uint32_t at = static_cast<std::uint32_t>(rng() % (shadow.size() + 1));
            b.insert(at, id, {});
            shadow.insert(shadow.begin() + at, id);
        }
        for (unsigned f = 1; f <= 16; ++f) {
            std::uint32_t seen = 0;
            for (std::uint32_t j = 0; j <= n; ++j) {
                if (j > 0) seen += shadow[j - 1].has(f);
                bs_bad += b.rank(f, j) != seen;
                // select(rank(j)) is the last f-entry at or before j.
                if (seen > 0) {
                    const std::uint32_t s = b.select(f, seen);
                    bs_bad += s > j || !shadow[s - 1].has(f);
                }
            }
            for (std::uint32_t k = 1; k <= b.count(f); ++k) bs_bad += b.rank(f, b.select(f, k)) != k;
            bs_bad += b.count(f) != seen;
        }
    }
    report(8, "sub-structure oracles", succ_bad == 0 && mi_bad == 0 && bs_bad == 0,
           fmt("successor set 1e5 ops: %zu mismatches; max index 1e4 ops: %zu; block rank/select on 1e3 blocks: %zu",
               succ_bad, mi_bad, bs_bad));
}

// ---- 9: golden traces --------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string joined(const std::vector<std::string>& lines) {
    std::string out;
    for (const std::string& l : lines) out += l + '\n';
    return out;
}

void golden() {
    namespace fs = std::filesystem;
    std::vector<fs::path> traces;
    for (const auto& e : fs::directory_iterator(STAB_GOLDEN_DIR))
        if (e.path().extension() == ".trace") traces.push_back(e.path());
    std::sort(traces.begin(), traces.end());
    std::size_t bad = 0;
    std::string detail;
    const TreeParams configs[] = {{4, 0.125, 8}, {8, 0.125, 16}, {kDefaultPhi, 0.125, kDefaultBlockMax}};
    for (const fs::path& t : traces) {
        std::ifstream in(t);
        const auto ops = parse_trace(in);
        fs::path exp = t;
        exp.replace_extension(".expected");
        const std::string want = slurp(exp);
        bool ok = !want.empty() && joined(run_oracle(ops)) == want;
        for (const TreeParams& tp : configs) {
            EngineConfig cfg;
            cfg.tree = tp;
            ok &= joined(run_trace(ops, cfg)) == want;
        }
        if (!ok) {
            ++bad;
            detail += " " + t.stem().string();
        }
    }
    report(9, "golden traces", traces.size() >= 10 && bad == 0,
           fmt("%zu traces replayed under 3 configurations, %zu mismatching", traces.size(), bad) + detail);
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    fuzz_1d(1, "1-D soundness", QueryMix::Max);
    fuzz_1d(2, "stabbing-sum soundness", QueryMix::Count);
    fuzz_multi();
    node_budget();
    {
        std::string detail = fmt("%zu audits over %zu fuzz runs, %zu failures", tally.audits, tally.runs,
                                 tally.errors.size());
        if (!tally.errors.empty()) detail += "; first: " + tally.errors.front();
        report(5, "invariant audits", tally.audits > 0 && tally.errors.empty(), detail);
    }
    rebuild_discipline();
    relabel_cost();
    substructures();
    golden();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%d criteria failed, %.1f s total\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
