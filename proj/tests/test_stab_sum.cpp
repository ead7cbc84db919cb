#include <random>
#include <vector>

#include "doctest.h"
#include "stab/oracle.hpp"
#include "stab/stab_sum.hpp"

using namespace stab;

TEST_CASE("count node: deltas then local rebuild") {
    CountNode cn(3, 100);
    // Singleton pairs give A = [2, 5, 4].
    std::vector<std::uint64_t> pairs(6, 0);
    pairs[0] = 2;  // (1,1)
    pairs[3] = 5;  // (2,2)
    pairs[5] = 4;  // (3,3)
    cn.assign(pairs);
    CHECK(cn.base(1) == 2);
    CHECK(cn.base(2) == 5);
    CHECK(cn.base(3) == 4);
    cn.update(1, 2, +1);
    CHECK(cn.count(2) == 6);
    CHECK(cn.count(1) == 3);
    CHECK(cn.count(3) == 4);
    CHECK(cn.base(2) == 5);
    cn.rebuild();
    CHECK(cn.base(1) == 3);
    CHECK(cn.base(2) == 6);
    CHECK(cn.base(3) == 4);
    CHECK(cn.count(2) == 6);
    CHECK(cn.delta(1, 2) == 0);
}

TEST_CASE("count node: rebuild with zero deltas keeps A") {
    CountNode cn(2, 4);
    cn.assign({1, 2, 3});
    CHECK(cn.base(1) == 3);
    CHECK(cn.base(2) == 5);
    cn.rebuild();
    CHECK(cn.base(1) == 3);
    CHECK(cn.base(2) == 5);
}

TEST_CASE("count node: threshold forces a local rebuild") {
    CountNode cn(4, 3);
    cn.update(2, 3, +1);
    cn.update(1, 4, +1);
    CHECK(cn.pending() == 2);
    CHECK(cn.base(2) == 0);
    cn.update(2, 2, +1);
    CHECK(cn.pending() == 0);
    CHECK(cn.delta(2, 3) == 0);
    CHECK(cn.base(2) == 3);
    CHECK(cn.base(3) == 2);
    CHECK_THROWS_AS(cn.update(3, 3, -1), usage_error);
    CHECK_THROWS_AS(cn.update(3, 2, 1), usage_error);
}

TEST_CASE("leaf counter") {
    LeafCounter lc;
    CHECK(lc.count(5) == 0);
    lc.build({{1, 5}, {3, 7}});
    CHECK(lc.count(4) == 2);
    CHECK(lc.count(0) == 0);
    CHECK(lc.count(1) == 1);
    CHECK(lc.count(5) == 2);
    CHECK(lc.count(6) == 1);
    CHECK(lc.count(7) == 1);
    CHECK(lc.count(8) == 0);
    lc.build({{2, 2}});
    CHECK(lc.count(2) == 1);
    CHECK(lc.count(1) == 0);
    CHECK(lc.count(3) == 0);
}

TEST_CASE("stab sum: small examples") {
    StabSum s;
    CHECK(s.count(0) == 0);
    s.insert({1, 1, 5, 0});
    CHECK(s.count(3) == 1);
    s.insert({2, 2, 9, 0});
    s.insert({3, 6, 8, 0});
    CHECK(s.count(4) == 2);
    CHECK(s.count(7) == 2);
    CHECK(s.count(10) == 0);
    CHECK_THROWS_AS(s.insert({2, 0, 1, 0}), usage_error);
    CHECK_THROWS_AS(s.insert({9, 5, 1, 0}), usage_error);
    CHECK_THROWS_AS(s.erase(42), usage_error);
    CHECK(s.audit().empty());

    StabSum many(TreeParams{4, 0.125, 0});
    for (IntervalId i = 1; i <= 300; ++i) many.insert({i, 0, 100, i});
    CHECK(many.count(50) == 300);
    CHECK(many.stats().nodes_visited == many.height());
    CHECK(many.audit().empty());
}

TEST_CASE("stab sum: insert then delete restores counts") {
    StabSum s(TreeParams{3, 0.125, 0});
    std::mt19937_64 rng(5);
    for (IntervalId i = 1; i <= 200; ++i) {
        Coord a = rng() % 1000, b = rng() % 1000;
        s.insert({i, std::min(a, b), std::max(a, b), 0});
    }
    std::vector<std::uint64_t> before;
    for (Coord x = -2; x <= 1002; x += 7) before.push_back(s.count(x));
    s.insert({999, 100, 700, 0});
    s.erase(999);
    std::size_t k = 0;
    for (Coord x = -2; x <= 1002; x += 7) CHECK(s.count(x) == before[k++]);
}

TEST_CASE("stab sum: random workload matches oracle") {
    for (unsigned phi : {2u, 3u, 8u}) {
        StabSum s(TreeParams{phi, 0.125, 0});
        oracle::FlatSet o;
        std::mt19937_64 rng(100 + phi);
        std::vector<IntervalId> ids;
        IntervalId next = 1;
        for (int op = 0; op < 3000; ++op) {
            const auto r = rng() % 100;
            if (r < 45 || ids.empty()) {
                Coord a = static_cast<Coord>(rng() % 500), b = static_cast<Coord>(rng() % 500);
                Interval iv{next++, std::min(a, b), std::max(a, b), 0};
                s.insert(iv);
                o.insert(iv);
                ids.push_back(iv.id);
            } else if (r < 70) {
                const std::size_t k = rng() % ids.size();
                s.erase(ids[k]);
                o.erase(ids[k]);
                ids[k] = ids.back();
                ids.pop_back();
            } else {
                const Coord x = static_cast<Coord>(rng() % 520) - 10;
                REQUIRE(s.count(x) == oracle::o_count(o.items(), x));
            }
            if (op % 250 == 0) {
                const auto errs = s.audit();
                REQUIRE_MESSAGE(errs.empty(), errs.front());
            }
        }
        CHECK(s.stats().rebuilds > 0);
        CHECK(s.stats().local_rebuilds > 0);
    }
}
