// Command-line front end: trace replay, differential runs against the
// oracle, and the benchmark table.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stab/harness.hpp"

using namespace stab;
using namespace stab::harness;

namespace {

constexpr int kExitDiverged = 1;
constexpr int kExitParse = 2;

struct Globals {
    unsigned phi = kDefaultPhi;
    std::uint32_t block_max = kDefaultBlockMax;
};

EngineConfig make_config(const Globals& g) {
    EngineConfig cfg;
    cfg.tree.fanout = g.phi;
    cfg.tree.block_max = g.block_max;
    return cfg;
}

int cmd_run(const Globals& g, const std::string& path, unsigned bounded, unsigned beta, bool use_oracle) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return kExitParse;
    }
    std::vector<Op> ops;
    try {
        ops = parse_trace(in);
    } catch (const ParseError& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kExitParse;
    }
    EngineConfig cfg = make_config(g);
    cfg.bounded = bounded;
    cfg.beta = beta;
    Runner runner(cfg);
    OracleRunner oracle(bounded);
    std::string out;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        try {
            if (auto line = use_oracle ? oracle.apply(ops[i]) : runner.apply(ops[i])) {
                out += *line;
                out += '\n';
            }
        } catch (const usage_error& e) {
            std::cout << out;
            std::cerr << "op " << i + 1 << ": " << e.what() << "\n";
            return kExitParse;
        }
    }
    std::cout << out;
    return 0;
}

struct DiffArgs {
    std::size_t ops = 100000;
    std::uint64_t seed = 1;
    std::string dist = "uniform";
    unsigned dims = 1;
    unsigned bounded = 0;
    unsigned beta = 8;
    std::string mix = "both";
    std::size_t audit_every = 1000;
    std::string repro = "stabctl_repro.trace";
    bool inject_fault = false;
};

int cmd_diff(const Globals& g, const DiffArgs& a) {
    WorkloadSpec spec;
    spec.ops = a.ops;
    spec.seed = a.seed;
    spec.dist = parse_dist(a.dist);
    spec.dims = a.dims;
    spec.bounded = a.bounded;
    spec.beta = a.beta;
    spec.queries = a.mix == "max" ? QueryMix::Max : a.mix == "count" ? QueryMix::Count : QueryMix::Both;
    EngineConfig cfg = make_config(g);
    cfg.bounded = a.bounded;
    cfg.beta = a.beta;
    cfg.inject_fault = a.inject_fault;

    const std::vector<Op> ops = generate(spec);
    const DiffResult r = diff(ops, cfg, {a.audit_every});
    std::printf("ops=%zu queries=%zu structure_s=%.3f oracle_s=%.3f audits=%zu\n", ops.size(), r.queries,
                r.structure_seconds, r.oracle_seconds, r.audits);
    if (r.ok) {
        std::printf("ok\n");
        return 0;
    }
    std::printf("diverged at op %zu: expected '%s' got '%s'\n", r.first_bad + 1, r.expected.c_str(), r.got.c_str());
    for (const std::string& e : r.audit_errors) std::printf("audit: %s\n", e.c_str());
    // An audit failure is chased with an audit after every op.
    const std::size_t every = r.audit_errors.empty() ? 0 : 1;
    auto fails = [&](const std::vector<Op>& t) { return !diff(t, cfg, {every}).ok; };
    // Only the prefix up to the failure matters.
    std::vector<Op> prefix(ops.begin(), ops.begin() + static_cast<std::ptrdiff_t>(r.first_bad) + 1);
    const std::vector<Op> small = minimize(std::move(prefix), fails);
    std::ofstream out(a.repro);
    if (!out) {
        std::fprintf(stderr, "cannot write %s\n", a.repro.c_str());
        return kExitDiverged;
    }
    write_trace(out, small);
    std::printf("reproducer: %s (%zu ops)\n", a.repro.c_str(), small.size());
    return kExitDiverged;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const auto caret = tok.find('^');
        if (caret != std::string::npos)
            out.push_back(static_cast<std::size_t>(1) << std::stoul(tok.substr(caret + 1)));
        else
            out.push_back(std::stoul(tok));
    }
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] < out[i - 1]) throw usage_error("sizes must ascend");
    return out;
}

int cmd_bench(const Globals& g, const std::string& sizes, std::size_t queries, const std::string& csv,
              std::uint64_t seed) {
    const auto list = parse_sizes(sizes);
    std::ofstream out(csv);
    if (!out) {
        std::cerr << "cannot write " << csv << "\n";
        return kExitParse;
    }
    std::vector<BenchRow> rows;
    const EngineConfig cfg = make_config(g);
    for (std::size_t n : list) {
        rows.push_back(bench_one(n, queries, cfg, seed));
        const BenchRow& b = rows.back();
        std::printf("n=%zu height=%u nodes/query=%.2f probes/node=%.2f\n", b.n, b.height, b.nodes_per_query,
                    b.probes_per_node);
    }
    write_csv(out, rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic interval stabbing: replay, differential runs and benchmarks"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--phi", g.phi, "Fan-out parameter (0 picks it from n)");
    app.add_option("--block-max", g.block_max, "Block capacity (0 picks it from n)");

    auto* run = app.add_subcommand("run", "Replay a trace and print one line per query");
    std::string trace;
    unsigned run_bounded = 0, run_beta = 8;
    run->add_option("--trace", trace, "Trace file")->required();
    run->add_option("--bounded", run_bounded, "Bounded coordinates at the end of each rectangle");
    run->add_option("--beta", run_beta, "Bound on the bounded coordinates");
    bool run_oracle_only = false;
    run->add_flag("--oracle", run_oracle_only, "Answer with the brute-force oracle instead");

    auto* dif = app.add_subcommand("diff", "Run a random workload through structure and oracle");
    DiffArgs da;
    dif->add_option("--ops", da.ops, "Number of operations");
    dif->add_option("--seed", da.seed, "Random seed");
    dif->add_option("--dist", da.dist, "Distribution")
        ->check(CLI::IsMember({"uniform", "nested", "clustered", "churn"}));
    dif->add_option("--dims", da.dims, "Unbounded dimensions");
    dif->add_option("--bounded", da.bounded, "Bounded dimensions");
    dif->add_option("--beta", da.beta, "Bound on the bounded coordinates");
    dif->add_option("--queries", da.mix, "1-D query mix")->check(CLI::IsMember({"max", "count", "both"}));
    dif->add_option("--audit-every", da.audit_every, "Audit period in ops (0 disables)");
    dif->add_option("--repro", da.repro, "Where to write the minimized reproducer");
    dif->add_flag("--inject-fault", da.inject_fault, "Corrupt some answers (testing the diff path)");

    auto* bench = app.add_subcommand("bench", "Measure the complexity counters and write CSV");
    std::string sizes = "2^10,2^11,2^12,2^13,2^14,2^15,2^16,2^17,2^18";
    std::size_t queries = 10000;
    std::string csv = "bench.csv";
    std::uint64_t bench_seed = 1;
    bench->add_option("--sizes", sizes, "Comma-separated sizes; 2^k is accepted");
    bench->add_option("--queries", queries, "Queries per size");
    bench->add_option("--csv", csv, "Output CSV path");
    bench->add_option("--seed", bench_seed, "Random seed");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(g, trace, run_bounded, run_beta, run_oracle_only);
        if (*dif) return cmd_diff(g, da);
        if (*bench) return cmd_bench(g, sizes, queries, csv, bench_seed);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
    return 0;
}
