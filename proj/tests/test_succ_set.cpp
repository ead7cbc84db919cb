#include "doctest.h"

#include <random>
#include <set>

#include "stab/succ_set.hpp"

using namespace stab;

namespace {

std::optional<std::uint64_t> oracle_pred(const std::set<std::uint64_t>& s, std::uint64_t x) {
    auto it = s.upper_bound(x);
    if (it == s.begin()) return std::nullopt;
    return *std::prev(it);
}

std::optional<std::uint64_t> oracle_succ(const std::set<std::uint64_t>& s, std::uint64_t x) {
    auto it = s.lower_bound(x);
    if (it == s.end()) return std::nullopt;
    return *it;
}

}  // namespace

TEST_CASE("basic successor set") {
    SuccSet s;
    CHECK_FALSE(s.max().has_value());
    CHECK_FALSE(s.min().has_value());
    s.insert(3);
    s.insert(9);
    s.insert(14);
    CHECK(s.max() == 14u);
    CHECK_FALSE(s.insert(9));
    CHECK(s.size() == 3);
    CHECK(s.pred(10) == 9u);
    CHECK(s.succ(10) == 14u);
    CHECK_FALSE(s.pred(2).has_value());
    s.erase(14);
    CHECK(s.max() == 9u);
    s.erase(3);
    s.erase(9);
    CHECK_FALSE(s.max().has_value());
    CHECK_THROWS_AS(s.erase(9), std::invalid_argument);
    CHECK_THROWS_AS(s.insert(std::uint64_t{1} << 32), std::invalid_argument);
}

TEST_CASE("singleton extremes") {
    SuccSet s(8);
    s.insert(7);
    CHECK(s.max() == 7u);
    CHECK(s.min() == 7u);
}

TEST_CASE("extremes cost one probe") {
    SuccSet s;
    for (std::uint64_t x = 0; x < 1000; ++x) s.insert(x * 7919 % 100003);
    const auto before = s.extreme_probes();
    (void)s.max();
    (void)s.min();
    CHECK(s.extreme_probes() - before == 2);
}

TEST_CASE("differential against a sorted set") {
    for (unsigned bits : {6u, 13u, 32u}) {
        SuccSet s(bits);
        std::set<std::uint64_t> o;
        std::mt19937_64 rng(bits);
        const std::uint64_t u = std::uint64_t{1} << bits;
        const std::uint64_t span = bits == 32 ? 5000 : u;  // dense keys exercise deletions
        for (int i = 0; i < 40000; ++i) {
            const std::uint64_t x = (rng() % span) * (u / span);
            switch (rng() % 4) {
            case 0:
            case 1:
                CHECK(s.insert(x) == o.insert(x).second);
                break;
            case 2:
                if (o.count(x)) {
                    s.erase(x);
                    o.erase(x);
                }
                break;
            default: {
                const std::uint64_t q = rng() % u;
                REQUIRE(s.pred(q) == oracle_pred(o, q));
                REQUIRE(s.succ(q) == oracle_succ(o, q));
                REQUIRE(s.contains(q) == (o.count(q) > 0));
            }
            }
            REQUIRE(s.size() == o.size());
            if (!o.empty()) {
                REQUIRE(s.max() == *o.rbegin());
                REQUIRE(s.min() == *o.begin());
            }
        }
        auto el = s.elements();
        CHECK(std::vector<std::uint64_t>(o.begin(), o.end()) == el);
    }
}

TEST_CASE("grow keeps elements") {
    SuccSet s(8);
    s.insert(200);
    s.insert(5);
    s.grow(20);
    CHECK(s.universe_bits() == 20);
    s.insert(1u << 19);
    CHECK(s.elements() == std::vector<std::uint64_t>{5, 200, 1u << 19});
}
