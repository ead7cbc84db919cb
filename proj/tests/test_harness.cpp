#include <sstream>

#include "doctest.h"
#include "stab/harness.hpp"

using namespace stab;
using namespace stab::harness;

namespace {

std::vector<Op> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

}  // namespace

TEST_CASE("trace round trip") {
    const std::string text =
        "I 1 2 9 7\n"
        "I 2 -5 3 1\n"
        "Q 4\n"
        "S 2\n"
        "D 1\n"
        "IR 3 2 0 10 -4 4 5\n"
        "QP 1 2\n";
    const auto ops = parse("# comment\n\n" + text);
    REQUIRE(ops.size() == 7);
    CHECK(ops[0].kind == OpKind::Insert);
    CHECK(ops[1].left == -5);
    CHECK(ops[5].kind == OpKind::InsertRect);
    CHECK(ops[5].dims.size() == 2);
    CHECK(ops[5].dims[1].lo == -4);
    CHECK(ops[6].point == std::vector<Coord>{1, 2});
    std::ostringstream out;
    write_trace(out, ops);
    CHECK(out.str() == text);
}

TEST_CASE("malformed lines report their line number") {
    for (const char* bad : {"I 1 2 9 7\nQ\n", "I 1 2 9 7\nQ x\n", "I 1 2\nQ 4\n", "Z 1\n", "Q 4 5\n", "IR 1 2 0 1 5\n"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse(bad), ParseError);
    }
    try {
        parse("I 1 2 9 7\n\nQ\n");
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("replay examples") {
    CHECK(run_trace(parse("I 1 2 9 7\nQ 4\n"), {}) == std::vector<std::string>{"1 7"});
    CHECK(run_trace(parse("Q 4\n"), {}) == std::vector<std::string>{"-"});
    CHECK(run_trace(parse("I 1 1 5 0\nI 2 2 9 0\nI 3 6 8 0\nS 4\nS 7\nS 10\n"), {}) ==
          std::vector<std::string>{"2", "2", "0"});
    CHECK(format_hit(std::nullopt) == "-");
    CHECK(format_hit(Hit{4, 2}) == "4 2");
}

TEST_CASE("replay agrees with the oracle and is deterministic") {
    WorkloadSpec w;
    w.ops = 3000;
    w.queries = QueryMix::Both;
    for (Dist d : {Dist::Uniform, Dist::Nested, Dist::Clustered, Dist::Churn}) {
        w.dist = d;
        const auto ops = generate(w);
        CHECK(generate(w).size() == ops.size());
        const auto a = run_trace(ops, {});
        CHECK(a == run_trace(ops, {}));
        CHECK(a == run_oracle(ops));
    }
}

TEST_CASE("rectangle traces") {
    const auto ops = parse("IR 1 2 0 10 0 10 3\nIR 2 2 2 4 2 4 9\nQP 3 3\nQP 5 5\nD 2\nQP 3 3\nQP 11 0\n");
    const std::vector<std::string> want{"2 9", "1 3", "1 3", "-"};
    CHECK(run_trace(ops, {}) == want);
    CHECK(run_oracle(ops) == want);
}

TEST_CASE("unknown and duplicate ids are rejected") {
    Runner r;
    CHECK_THROWS_AS(r.apply(parse("D 5\n")[0]), usage_error);
    r.apply(parse("I 5 1 2 3\n")[0]);
    CHECK_THROWS_AS(r.apply(parse("I 5 1 2 3\n")[0]), usage_error);
}

TEST_CASE("diff passes clean runs and catches an injected fault") {
    WorkloadSpec w;
    w.ops = 4000;
    EngineConfig cfg;
    const auto ops = generate(w);
    const DiffResult ok = diff(ops, cfg, {500});
    CHECK(ok.ok);
    CHECK(ok.audits == 8);
    CHECK(ok.queries > 0);

    cfg.inject_fault = true;
    const DiffResult bad = diff(ops, cfg);
    REQUIRE_FALSE(bad.ok);
    auto fails = [&](const std::vector<Op>& t) { return !diff(t, cfg).ok; };
    std::vector<Op> prefix(ops.begin(), ops.begin() + static_cast<std::ptrdiff_t>(bad.first_bad) + 1);
    const auto small = minimize(prefix, fails);
    CHECK(fails(small));
    CHECK(small.size() <= 4);
    // The reproducer replays through the trace format.
    std::ostringstream out;
    write_trace(out, small);
    std::istringstream in(out.str());
    CHECK(fails(parse_trace(in)));
}

TEST_CASE("multidimensional workloads") {
    for (auto [dims, bounded] : {std::pair{2u, 0u}, std::pair{1u, 1u}, std::pair{3u, 0u}}) {
        WorkloadSpec w;
        w.ops = dims == 3 ? 600 : 1500;
        w.dims = dims;
        w.bounded = bounded;
        EngineConfig cfg;
        cfg.bounded = bounded;
        CAPTURE(dims);
        CHECK(diff(generate(w), cfg, {250}).ok);
    }
}

TEST_CASE("bench rows") {
    EngineConfig cfg;
    cfg.tree.fanout = 8;
    const BenchRow a = bench_one(1024, 500, cfg);
    const BenchRow b = bench_one(4096, 500, cfg);
    CHECK(a.n == 1024);
    CHECK(a.nodes_per_query == doctest::Approx(a.height));
    CHECK(b.height >= a.height);
    std::ostringstream out;
    write_csv(out, {a, b});
    const std::string csv = out.str();
    CHECK(csv.rfind("n,dim,height,nodes_per_query,probes_per_node,relabels,splits,rebuilds,ns_insert,ns_delete,ns_query\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("distribution names") {
    for (Dist d : {Dist::Uniform, Dist::Nested, Dist::Clustered, Dist::Churn}) CHECK(parse_dist(dist_name(d)) == d);
    CHECK_THROWS_AS(parse_dist("zipf"), usage_error);
}
