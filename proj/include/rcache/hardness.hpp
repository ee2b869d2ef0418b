#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rcache/core.hpp"
#include "rcache/rng.hpp"

namespace rcache {

// 3-CNF formulas for the balanced-satisfiability reduction. A clause holds
// exactly three distinct variables and is normalized so non-negated literals
// come first, giving one of the patterns TTT, TTF, TFF, FFF. The variable
// count n must be even (assignments are constrained to half true, half
// false).

struct CnfLiteral {
    int var = 0;  // 1-based variable index
    bool negated = false;
};

struct CnfClause {
    std::array<CnfLiteral, 3> lits;  // non-negated literals first

    // "TTT", "TTF", "TFF", or "FFF".
    std::string pattern() const;
};

struct CnfFormula {
    int n = 0;  // number of variables, even
    std::vector<CnfClause> clauses;

    int m() const { return static_cast<int>(clauses.size()); }
    // Number of clauses containing the variable (each clause's variables are
    // distinct, so this equals the variable's occurrence count).
    int degree(int var) const;
};

// Throws std::runtime_error if n is odd or non-positive, a clause has a
// repeated or out-of-range variable, or a clause is not normalized.
void validate_formula(const CnfFormula& phi);

// Parses DIMACS CNF text ("c" comments, "p cnf <n> <m>" header, clauses as
// zero-terminated integer lists, possibly spanning lines). Clauses are
// normalized to non-negated-first order, keeping the input order within each
// polarity group. Throws std::runtime_error naming the offending line for
// malformed input, clauses without exactly three distinct variables, counts
// that disagree with the header, or odd n.
CnfFormula parse_dimacs(const std::string& text);

// Uniformly random normalized formula: each clause samples three distinct
// variables and independent polarities. n must be even, n >= 3 to fit three
// distinct variables (so n >= 4 in practice).
CnfFormula random_formula(Rng& rng, int n, int m);

bool assignment_balanced(const CnfFormula& phi, const std::vector<bool>& x);
bool assignment_satisfies(const CnfFormula& phi, const std::vector<bool>& x);

// Exhaustive search over the C(n, n/2) balanced assignments, in
// lexicographic order of the true-set indicator; returns the first one that
// satisfies the formula, or nullopt. Guarded to n <= 20.
std::optional<std::vector<bool>> find_balanced_assignment(const CnfFormula& phi);

// Closed-form constants of the reduction.
int64_t hardness_c_prime(int64_t n, int64_t m);       // round-robin repetitions
int64_t hardness_miss_budget(int64_t n, int64_t m);   // target miss count C
int64_t hardness_trace_length(int64_t n, int64_t m);  // total request count

// The compiled caching instance. The trace has n + 4m + 3 agents: agents
// 1..n (one per variable) with unit reserves, the rest with zero reserves,
// and k = (3/2)n + 2 total slots (n/2 + 2 of them public). Requests are the
// concatenation VARIABLE(T), CLAUSE(1), ..., CLAUSE(m), VARIABLE(F), where
// each clause block embeds four round-robin occupier blocks and the variable
// blocks embed one or two. Every request carries a provenance pair (the
// enclosing top-level block plus a section tag) for debugging and auditing.
struct HardnessInstance {
    Trace trace;
    int64_t c_prime = 0;      // repetitions per occupier block
    int64_t miss_budget = 0;  // the decision threshold C on miss count

    // Per-request provenance, parallel to trace.requests.
    std::vector<std::string> gadget;  // "VARIABLE(T)", "CLAUSE(3,TFF)", ...
    std::vector<std::string> tag;     // section tag, e.g. "PUBLIC(2,4):r5:p1"

    // Top-level block decomposition: (name, request count), summing to the
    // trace length.
    std::vector<std::pair<std::string, int64_t>> toplevel_sizes;

    // One entry per occupier block, in request order: block index (1-based),
    // page width, request count (= c_prime * width), first request position.
    struct PublicGadget {
        int index = 0;
        int width = 0;
        int64_t size = 0;
        int64_t first = 0;
    };
    std::vector<PublicGadget> public_gadgets;
};

// Compiles the formula into its caching instance. Throws std::runtime_error
// on invalid formulas and std::logic_error if the generated layout fails its
// own closed-form size checks.
HardnessInstance generate_instance(const CnfFormula& phi);

// Writes the provenance sidecar: '#' header comments, then one line per
// request: "<index> <gadget> <tag>".
void write_provenance(std::ostream& os, const HardnessInstance& inst);

// The deterministic public-private play derived from a balanced satisfying
// assignment: true variables keep their pages congruent to 1 (mod 3) in
// their private slot; false variables do the same with 2 (mod 3); pages
// congruent to 0 (mod 3) are kept privately when their caching interval does
// not overlap the kept parity sequence and publicly otherwise; occupier
// pages are always kept publicly for their whole block. Placements are
// final (no relocations) and evictions target only pages with no pending
// planned hit, smallest page first.
struct SynthesizedStrategy {
    std::vector<PPAction> actions;  // one per miss, in request order
    PPRunResult replay;             // the verified run on the instance trace
    std::vector<int64_t> agent_hits;  // index 1..n: hits on that agent's pages
    int64_t public_hits = 0;          // hits on occupier-block pages
};

// Builds and replays the strategy. Throws std::runtime_error if the
// assignment has the wrong length, is not balanced, or does not satisfy the
// formula; throws std::logic_error if the replay deviates from the planned
// hit pattern (an internal consistency breach).
SynthesizedStrategy synthesize_strategy(const CnfFormula& phi, const std::vector<bool>& assignment);

}  // namespace rcache
