#include "doctest.h"

#include <map>
#include <random>

#include "stab/core_types.hpp"
#include "stab/max_index.hpp"

using namespace stab;

TEST_CASE("cover query picks the largest covering key") {
    MaxIndex m(3);
    CHECK_FALSE(m.query_cover(2).has_value());
    m.set(1, 2, 5);
    CHECK(m.query_cover(1)->l == 1);
    m.set(2, 3, 9);
    m.set(3, 3, 1);
    auto c = m.query_cover(2);
    REQUIRE(c);
    CHECK(c->l == 2);
    CHECK(c->r == 3);
    c = m.query_cover(1);
    CHECK((c->l == 1 && c->r == 2));
    m.set(2, 3, 0);
    c = m.query_cover(2);
    CHECK((c->l == 1 && c->r == 2));
    m.clear(3, 3);
    c = m.query_cover(2);
    CHECK((c->l == 1 && c->r == 2));
    m.clear(1, 2);
    m.clear(2, 3);
    CHECK_FALSE(m.query_cover(2).has_value());
    CHECK_THROWS_AS(m.clear(1, 1), usage_error);
    CHECK_THROWS_AS(m.set(2, 1, 0), usage_error);
    CHECK_THROWS_AS(m.query_cover(4), usage_error);
}

TEST_CASE("ties go to the smallest l then r") {
    MaxIndex m(4);
    m.set(2, 4, 7);
    m.set(1, 3, 7);
    m.set(1, 4, 7);
    auto c = m.query_cover(3);
    CHECK((c->l == 1 && c->r == 3));
}

TEST_CASE("random set/clear/query against brute force") {
    std::mt19937_64 rng(9);
    for (unsigned width : {1u, 3u, 8u, 17u}) {
        MaxIndex m(width);
        std::map<std::tuple<unsigned, unsigned, std::uint64_t>, std::uint64_t> bf;
        for (int i = 0; i < 10000; ++i) {
            const unsigned l = 1 + static_cast<unsigned>(rng() % width);
            const unsigned r = l + static_cast<unsigned>(rng() % (width - l + 1));
            const std::uint64_t box = rng() % 2 ? 0 : (rng() % 4) | ((4 + rng() % 4) << 8);
            const int op = static_cast<int>(rng() % 3);
            if (op == 0) {
                const std::uint64_t k = rng() % 50;
                m.set(l, r, k, box);
                bf[{l, r, box}] = k;
            } else if (op == 1) {
                if (bf.erase({l, r, box})) m.clear(l, r, box);
            } else {
                const unsigned f = 1 + static_cast<unsigned>(rng() % width);
                const std::uint8_t h[] = {static_cast<std::uint8_t>(rng() % 8)};
                std::optional<MaxIndex::Cover> want;
                for (const auto& [key, v] : bf) {
                    auto [a, b, x] = key;
                    if (a > f || f > b || !MaxIndex::box_covers(x, h)) continue;
                    // Map order is (l, r, box) ascending, so strict > keeps the first on ties.
                    if (!want || v > want->key) want = MaxIndex::Cover{a, b, x, v};
                }
                REQUIRE(m.query_cover(f, h) == want);
                REQUIRE(m.query_cover_by_key(f, h) == want);
            }
            REQUIRE(m.size() == bf.size());
        }
    }
}
