#include <random>
#include <vector>

#include "doctest.h"
#include "stab/multidim.hpp"
#include "stab/oracle.hpp"
#include "stab/stab_max.hpp"

using namespace stab;

namespace {

Rectangle rect(IntervalId id, std::vector<Range> dims, Priority p) { return Rectangle{id, std::move(dims), p}; }

// Mixed random workload against the linear-scan oracle.
void fuzz(MultiParams mp, unsigned ops, std::uint64_t seed, Coord span) {
    MultiStab ms(mp);
    oracle::FlatRects o;
    std::mt19937_64 rng(seed);
    std::vector<IntervalId> ids;
    IntervalId next = 1;
    const unsigned dim = mp.d + mp.g;
    auto coord = [&](unsigned i) -> Coord {
        return i < mp.d ? static_cast<Coord>(rng() % static_cast<std::uint64_t>(span))
                        : static_cast<Coord>(rng() % mp.beta);
    };
    for (unsigned op = 0; op < ops; ++op) {
        const auto r = rng() % 100;
        if (r < 45 || ids.empty()) {
            Rectangle s{next++, {}, rng() % 1000};
            for (unsigned i = 0; i < dim; ++i) {
                Coord a = coord(i), b = coord(i);
                s.dims.push_back({std::min(a, b), std::max(a, b)});
            }
            ms.insert(s);
            o.insert(s);
            ids.push_back(s.id);
        } else if (r < 70) {
            const std::size_t k = rng() % ids.size();
            ms.erase(ids[k]);
            o.erase(ids[k]);
            ids[k] = ids.back();
            ids.pop_back();
        } else {
            QueryPoint q;
            for (unsigned i = 0; i < dim; ++i) q.coords.push_back(coord(i));
            REQUIRE(ms.query(q) == oracle::o_max_dd(o.items(), q));
        }
        if (op % 500 == 499) {
            const auto errs = ms.audit();
            REQUIRE_MESSAGE(errs.empty(), errs.front());
        }
    }
}

}  // namespace

TEST_CASE("multidim: parameters") {
    CHECK_THROWS_AS(MultiStab(MultiParams{0, 0, 8, {}}), usage_error);
    CHECK_THROWS_AS(MultiStab(MultiParams{3, 2, 8, {}}), usage_error);
    CHECK_THROWS_AS(MultiStab(MultiParams{1, 1, 0, {}}), usage_error);
    CHECK_NOTHROW(MultiStab(MultiParams{3, 0, 8, {}}));
}

TEST_CASE("multidim: one 2-D rectangle") {
    MultiStab ms(MultiParams{2, 0, 8, {}});
    ms.insert(rect(1, {{0, 10}, {0, 10}}, 5));
    CHECK(ms.query({{5, 5}}) == Hit{1, 5});
    CHECK(ms.query({{11, 5}}) == std::nullopt);
    CHECK_THROWS_AS(ms.insert(rect(1, {{0, 1}, {0, 1}}, 1)), usage_error);
    CHECK_THROWS_AS(ms.insert(rect(2, {{0, 1}}, 1)), usage_error);
    CHECK_THROWS_AS(ms.query({{1}}), usage_error);
    CHECK_THROWS_AS(ms.erase(9), usage_error);
}

TEST_CASE("multidim: nested squares and deleting the winner") {
    MultiStab ms(MultiParams{2, 0, 8, TreeParams{4, 0.125, 0}});
    for (IntervalId i = 1; i <= 40; ++i) {
        const Coord r = 100 - static_cast<Coord>(i) * 2;
        ms.insert(rect(i, {{-r, r}, {-r, r}}, i));
    }
    CHECK(ms.query({{0, 0}}) == Hit{40, 40});
    CHECK(ms.query({{25, -25}}) == Hit{37, 37});
    CHECK(ms.query({{500, 0}}) == std::nullopt);
    ms.erase(40);
    CHECK(ms.query({{0, 0}}) == Hit{39, 39});
    CHECK(ms.audit().empty());
}

TEST_CASE("multidim: bounded coordinates") {
    MultiStab ms(MultiParams{1, 1, 8, TreeParams{3, 0.125, 8}});
    ms.insert(rect(1, {{0, 100}, {2, 5}}, 9));
    ms.insert(rect(2, {{0, 100}, {0, 7}}, 1));
    CHECK(ms.query({{50, 3}}) == Hit{1, 9});
    CHECK(ms.query({{50, 6}}) == Hit{2, 1});
    CHECK(ms.query({{50, 8}}) == std::nullopt);
    CHECK(ms.query({{50, -1}}) == std::nullopt);
    CHECK_THROWS_AS(ms.insert(rect(3, {{0, 1}, {0, 8}}, 1)), usage_error);
}

TEST_CASE("multidim: d=1, g=0 matches the 1-D structure") {
    MultiStab ms(MultiParams{1, 0, 8, TreeParams{4, 0.125, 16}});
    StabMaxParams sp;
    sp.tree = TreeParams{4, 0.125, 16};
    StabMax sm(sp);
    std::mt19937_64 rng(11);
    for (IntervalId i = 1; i <= 500; ++i) {
        Coord a = rng() % 2000, b = rng() % 2000;
        const Priority p = rng() % 100;
        ms.insert(rect(i, {{std::min(a, b), std::max(a, b)}}, p));
        sm.insert({i, std::min(a, b), std::max(a, b), p});
    }
    for (Coord x = -5; x < 2005; x += 3) REQUIRE(ms.query({{x}}) == sm.query(x));
}

TEST_CASE("multidim: visit counts grow with nesting depth") {
    MultiStab ms(MultiParams{2, 0, 8, TreeParams{4, 0.125, 0}});
    std::mt19937_64 rng(4);
    for (IntervalId i = 1; i <= 400; ++i) {
        Coord a = rng() % 1000, b = rng() % 1000, c = rng() % 1000, e = rng() % 1000;
        ms.insert(rect(i, {{std::min(a, b), std::max(a, b)}, {std::min(c, e), std::max(c, e)}}, i));
    }
    ms.query({{500, 500}});
    CHECK(ms.last_query_visits() >= ms.height());
    CHECK(ms.last_query_visits() <= 4ull * ms.height() * ms.height() + 4 * ms.height());
}

TEST_CASE("multidim: random workloads match the oracle") {
    fuzz(MultiParams{2, 0, 8, TreeParams{4, 0.125, 0}}, 3000, 1, 300);
    fuzz(MultiParams{3, 0, 8, TreeParams{4, 0.125, 0}}, 1500, 2, 100);
    fuzz(MultiParams{1, 1, 8, TreeParams{3, 0.125, 16}}, 3000, 3, 300);
    fuzz(MultiParams{2, 1, 4, TreeParams{2, 0.125, 0}}, 1500, 4, 200);
    fuzz(MultiParams{1, 2, 8, TreeParams{8, 0.125, 0}}, 2000, 5, 300);
}
