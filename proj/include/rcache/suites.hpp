#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rcache/core.hpp"
#include "rcache/oracle.hpp"

namespace rcache {

// Randomized verification suites shared by the `verify` command and the
// acceptance gate. Each suite draws seeded instances, checks the properties
// its module promises against the exact oracle, and reports per-property
// failure counts. The instance for index i depends only on (seed, i), so
// multi-worker runs aggregate to identical reports.

struct SuiteOptions {
    // Randomized instance count; -1 selects the per-suite default the
    // published bounds were calibrated for (offline 500, fractional 300,
    // rounding 100, equivalence 500, hardness 50 random formulas). 0 skips
    // every check, including the fixed ones (vacuous pass).
    int64_t instances = -1;
    uint64_t seed = 1;
    // Size caps for both instance generation and the exact solvers.
    OracleLimits limits = OracleLimits::from_env();
    int workers = 1;

    // offline suite: additionally sweep every instance with at most
    // sweep_pages distinct pages and at most sweep_t requests, over every
    // agent split, cache size k <= min(max_k, pages + 1) and reserve vector.
    // 0 disables the sweep.
    int sweep_pages = 4;
    int64_t sweep_t = 6;

    // fractional suite: compare the event-driven integrator against a
    // fixed-step reference on this many pinned instances (0 disables; the
    // reference integrator is slow by construction).
    int fixedstep_instances = 20;
    double fixedstep_dalpha = 1e-6;
    double fixedstep_tol = 1e-4;

    // rounding suite: sampled-run seeds for the mean-versus-expectation
    // comparison on one pinned instance (0 disables).
    int sample_seeds = 1000;
};

struct PropertyStat {
    std::string name;
    int64_t checked = 0;
    int64_t failures = 0;
    std::string first_failure;  // lowest failing index, with detail
};

struct SuiteReport {
    std::string suite;
    int64_t instances = 0;  // randomized instances examined
    std::vector<PropertyStat> properties;
    // Lowest-index failing random trace, shrunk by greedy request deletion.
    std::optional<Trace> counterexample;
    std::string counterexample_note;

    int64_t failures() const;
    bool passed() const { return failures() == 0; }
    const PropertyStat* find(const std::string& name) const;
};

SuiteReport run_offline_suite(const SuiteOptions& opts);
SuiteReport run_fractional_suite(const SuiteOptions& opts);
SuiteReport run_rounding_suite(const SuiteOptions& opts);
SuiteReport run_equiv_suite(const SuiteOptions& opts);
SuiteReport run_hardness_suite(const SuiteOptions& opts);

// All five suites, in the order above.
std::vector<SuiteReport> run_all_suites(const SuiteOptions& opts);

// Deterministic, scheduling-independent per-instance seed derivation.
uint64_t mix_seed(uint64_t seed, uint64_t index);

// Public-private LRU as a miss-time strategy: fill a free private slot,
// then a free public slot, otherwise evict the least recently requested
// page among the public slots and the requester's private slots. Recency
// comes from the request sequence itself (strategies only see misses).
PPActionFn pp_lru_policy(const Trace& trace);

// Wraps a fixed per-miss action list (for example an oracle witness or a
// synthesized play) as a strategy; throws std::logic_error if the replay
// asks for more actions than the list holds.
PPActionFn scripted_pp_actions(std::vector<PPAction> actions);

// Greedy request-deletion shrink: repeatedly drops single requests as long
// as `fails` keeps reporting a failure. `fails` returns a description of
// the failure, or nullopt when the trace passes.
Trace minimize_counterexample(
    const Trace& start, const std::function<std::optional<std::string>(const Trace&)>& fails);

// Fixed-width stdout table and CSV rows (suite,property,checked,failures).
void print_suite_table(std::ostream& os, const std::vector<SuiteReport>& reports);
void write_suite_csv(std::ostream& os, const std::vector<SuiteReport>& reports);

}  // namespace rcache
