#pragma once

#include <cstdint>
#include <vector>

#include "rcache/core.hpp"

namespace rcache {

// Exhaustive-search size caps. The env var RCACHE_ORACLE_LIMITS can override
// the defaults with four comma-separated integers "pages,agents,k,T".
struct OracleLimits {
    int max_pages = 9;
    int max_agents = 3;
    int max_k = 5;
    int64_t max_t = 14;

    static OracleLimits from_env();
    void check(const Trace& trace) const;  // throws when the instance is larger
};

struct OracleResult {
    int64_t misses = 0;
    std::vector<ScheduleEntry> schedule;  // a witness achieving the minimum
    int64_t states_explored = 0;
};

// Exact minimum-miss solution of the reserves model by memoized search over
// canonical cache states (dummies of one agent are interchangeable, so they
// are tracked as counts). Evicting a filler dummy dominates every other
// choice, and evicting an agent's dummy dominates evicting that agent's real
// pages; both prunings are exact.
OracleResult solve_reserves_opt(const Trace& trace, const OracleLimits& limits = OracleLimits::from_env());

struct PPOracleResult {
    int64_t evictions = 0;    // model objective: removals + charged relocations
    int64_t misses = 0;       // misses along the eviction-minimizing witness
    int64_t min_misses = 0;   // separate miss-minimizing search
    int64_t states_explored = 0;
    // One action per miss along the eviction-minimizing witness, in request
    // order. Ties between equally cheap plays prefer actions that refill a
    // freed private slot (by the placed page or a relocation), so the witness
    // can be mirrored into the reserves model.
    std::vector<PPAction> witness_actions;
};

// Exact public-private optimum over strategies that, on each miss, evict at
// most one page, then relocate at most one public page into its agent's
// private slots, then place the requested page. Hits take no action.
PPOracleResult solve_pp_opt(const Trace& trace, const OracleLimits& limits = OracleLimits::from_env());

}  // namespace rcache
