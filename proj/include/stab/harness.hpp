#pragma once

// Trace format, workload generators, differential runs against the oracle,
// and the benchmark table behind the stabctl tool and the acceptance suite.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stab/base_tree.hpp"
#include "stab/core_types.hpp"

namespace stab::harness {

enum class OpKind { Insert, Delete, Query, Count, InsertRect, QueryPoint };

struct Op {
    OpKind kind = OpKind::Query;
    IntervalId id = 0;
    Coord left = 0, right = 0;  // Insert
    Priority priority = 0;      // Insert, InsertRect
    Coord x = 0;                // Query, Count
    std::vector<Range> dims;    // InsertRect
    std::vector<Coord> point;   // QueryPoint
};

class ParseError : public usage_error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Blank lines and lines starting with '#' are skipped.
std::vector<Op> parse_trace(std::istream& in);
std::string format_op(const Op& op);
void write_trace(std::ostream& out, const std::vector<Op>& ops);
/// "id priority", or "-" when there is no hit.
std::string format_hit(const MaybeHit& h);

inline constexpr unsigned kDefaultPhi = 16;
inline constexpr std::uint32_t kDefaultBlockMax = 256;

struct EngineConfig {
    TreeParams tree{kDefaultPhi, 0.125, kDefaultBlockMax};
    /// Bounded coordinates at the end of every rectangle.
    unsigned bounded = 0;
    unsigned beta = 8;
    /// Which 1-D structures to maintain; a trace that needs a disabled one
    /// is rejected.
    bool with_max = true;
    bool with_count = true;
    /// Test hook: corrupts some max answers so the diff path can be exercised.
    bool inject_fault = false;
};

/// Applies trace ops to the structures (StabMax and StabSum for intervals,
/// MultiStab for rectangles). apply() returns the output line of query ops.
class Runner {
public:
    explicit Runner(EngineConfig cfg = {});
    Runner(Runner&&) noexcept;
    ~Runner();

    std::optional<std::string> apply(const Op& op);
    std::vector<std::string> audit() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Same interface backed only by the flat oracle sets.
class OracleRunner {
public:
    explicit OracleRunner(unsigned bounded = 0);
    OracleRunner(OracleRunner&&) noexcept;
    ~OracleRunner();

    std::optional<std::string> apply(const Op& op);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Output lines of every query op, in order.
std::vector<std::string> run_trace(const std::vector<Op>& ops, const EngineConfig& cfg);
std::vector<std::string> run_oracle(const std::vector<Op>& ops, unsigned bounded = 0);

enum class Dist { Uniform, Nested, Clustered, Churn };
Dist parse_dist(const std::string& name);
std::string dist_name(Dist d);

enum class QueryMix { Max, Count, Both };

struct WorkloadSpec {
    std::size_t ops = 1000;
    std::uint64_t seed = 1;
    Dist dist = Dist::Uniform;
    /// Unbounded dimensions; 1 with no bounded ones gives I/D/Q/S traces.
    unsigned dims = 1;
    unsigned bounded = 0;
    unsigned beta = 8;
    QueryMix queries = QueryMix::Max;
    unsigned pct_insert = 45;
    unsigned pct_delete = 25;
};

std::vector<Op> generate(const WorkloadSpec& spec);

struct DiffResult {
    bool ok = true;
    std::size_t queries = 0;
    std::size_t first_bad = 0;  // index of the first diverging op
    std::string expected, got;
    double structure_seconds = 0, oracle_seconds = 0, audit_seconds = 0;
    std::size_t audits = 0;
    std::vector<std::string> audit_errors;
};

struct DiffOptions {
    /// Audit the structures every `audit_every` ops (0 disables).
    std::size_t audit_every = 0;
};

DiffResult diff(const std::vector<Op>& ops, const EngineConfig& cfg, DiffOptions opt = {});

/// Shrinks a failing trace while `fails` keeps returning true. Removing an
/// insert also removes the later delete of the same id.
std::vector<Op> minimize(std::vector<Op> ops, const std::function<bool(const std::vector<Op>&)>& fails,
                         std::size_t budget = 2000);

struct BenchRow {
    std::size_t n = 0;
    unsigned dim = 1;
    unsigned height = 0;
    double nodes_per_query = 0;
    double probes_per_node = 0;
    std::uint64_t relabels = 0;
    std::uint64_t splits = 0;
    std::uint64_t rebuilds = 0;
    double ns_insert = 0, ns_delete = 0, ns_query = 0;
};

BenchRow bench_one(std::size_t n, std::size_t queries, const EngineConfig& cfg, std::uint64_t seed = 1);
void write_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace stab::harness
