#include "doctest.h"

#include <random>

#include "stab/oracle.hpp"
#include "stab/stab_max.hpp"

using namespace stab;

namespace {

StabMaxParams small(unsigned phi = 2, std::uint32_t block = 8) {
    StabMaxParams p;
    p.tree.fanout = phi;
    p.tree.block_max = block;
    return p;
}

void require_clean(const StabMax& sm) {
    auto errs = sm.audit();
    if (!errs.empty()) FAIL(errs.front());
}

}  // namespace

TEST_CASE("empty structure") {
    StabMax sm;
    const StabStats& st = sm.stats();
    CHECK(st.queries == 0);
    CHECK(st.nodes_visited == 0);
    CHECK(st.node_splits == 0);
    CHECK(st.rebuilds == 0);
    CHECK(st.relabels == 0);
    CHECK(sm.height() == 1);
    CHECK_FALSE(sm.query(0).has_value());
    CHECK(st.nodes_visited == sm.height());
    CHECK_FALSE(sm.query(kMinCoord).has_value());
    require_clean(sm);
}

TEST_CASE("small examples") {
    StabMax sm(small());
    sm.insert({1, 2, 9, 7});
    CHECK(sm.query(5) == Hit{1, 7});
    sm.erase(1);
    CHECK_FALSE(sm.query(5).has_value());
    CHECK(sm.stats().rebuilds == 1);

    StabMax a(small());
    a.insert({1, 1, 5, 3});
    a.insert({2, 2, 9, 7});
    CHECK(a.query(4) == Hit{2, 7});
    a.insert({3, 6, 8, 5});
    CHECK(a.query(7) == Hit{2, 7});
    CHECK_FALSE(a.query(10).has_value());
    a.erase(2);
    CHECK(a.query(4) == Hit{1, 3});
    CHECK(a.query(7) == Hit{3, 5});

    StabMax n(small());
    n.insert({1, 1, 10, 1});
    n.insert({2, 2, 9, 2});
    n.insert({3, 3, 8, 3});
    CHECK(n.query(5) == Hit{3, 3});
    require_clean(n);
}

TEST_CASE("errors") {
    StabMax sm(small());
    sm.insert({1, 0, 4, 1});
    CHECK_THROWS_AS(sm.insert({1, 2, 3, 1}), usage_error);
    CHECK_THROWS_AS(sm.insert({2, 5, 3, 1}), usage_error);
    CHECK_THROWS_AS(sm.erase(7), usage_error);
    const std::uint8_t h[] = {1};
    CHECK_THROWS_AS(sm.query(0, h), usage_error);
}

TEST_CASE("random workload matches the oracle with audits") {
    for (unsigned phi : {2u, 3u, 8u}) {
        for (std::uint32_t block : {8u, 16u}) {
            StabMax sm(small(phi, block));
            oracle::FlatSet o;
            std::mt19937_64 rng(phi * 100 + block);
            std::vector<IntervalId> ids;
            IntervalId next = 1;
            for (int i = 0; i < 3000; ++i) {
                const auto r = rng() % 100;
                if (r < 50 || ids.empty()) {
                    Coord a = static_cast<Coord>(rng() % 1000), b = static_cast<Coord>(rng() % 1000);
                    if (a > b) std::swap(a, b);
                    Interval s{next++, a, b, rng() % 500};
                    sm.insert(s);
                    o.insert(s);
                    ids.push_back(s.id);
                } else if (r < 70) {
                    const std::size_t k = rng() % ids.size();
                    sm.erase(ids[k]);
                    o.erase(ids[k]);
                    ids[k] = ids.back();
                    ids.pop_back();
                } else {
                    const Coord x = static_cast<Coord>(rng() % 1100) - 50;
                    REQUIRE(sm.query(x) == oracle::o_max(o.items(), x));
                }
                if (i % 250 == 0) require_clean(sm);
            }
            require_clean(sm);
            CHECK(sm.stats().node_splits > 0);
        }
    }
}
