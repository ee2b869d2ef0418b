#pragma once

#include <cstdint>
#include <vector>

#include "rcache/core.hpp"

namespace rcache {

// Farthest-in-future generalized to reserves: the cache is partitioned into
// sets N_i with |N_i| = k_i between requests (N_0 holds the rest). A request
// for agent i's page passes through N_i; the max-rank page of N_i spills to
// N_0 and on a miss the max-rank page of N_0 is evicted. Rank = next request
// time. Max-rank ties break dummy-first, then larger agent, then larger
// local id.
//
// With auditing enabled the run is compared step by step against an optimal
// eviction schedule through the potential
//     Phi = sum_i max_s [ n_i(s) - n*_i(s) ],
// decomposed into six sub-steps per request, each with its own bound on the
// potential change; the per-request inequality
//     d(ALG) + d(Phi) - 2 d(OPT) <= 0
// and Phi >= 0 are asserted throughout. Violations throw std::runtime_error.

struct AuditStep {
    int64_t t = 0;
    int64_t d_alg = 0;
    int64_t d_opt = 0;
    int64_t d_phi = 0;
    int64_t phi_after = 0;
};

struct OfflineOptions {
    bool audit = false;
    // Optimal schedule to audit against; required when audit is set.
    const std::vector<ScheduleEntry>* opt_schedule = nullptr;
};

struct OfflineResult {
    RunResult run;
    std::vector<AuditStep> audit;  // empty unless audited
};

OfflineResult run_offline(const Trace& trace, const OfflineOptions& options = {});

}  // namespace rcache
