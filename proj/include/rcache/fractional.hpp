#pragma once

#include <map>
#include <set>
#include <vector>

#include "rcache/core.hpp"
#include "rcache/trace_io.hpp"

namespace rcache {

// Primal-dual fractional cache maintenance. Each page carries an eviction
// fraction x in [0,1] for its current inter-request interval; serving a
// request resets the fetched page's fraction to zero and grows the others
// until the total eviction mass outside the fetched page reaches n - k,
// subject to every agent keeping at least k_i units of cached mass.
struct FractionalOptions {
    // When true, integrate the growth with forward Euler steps of size
    // fixed_dalpha instead of jumping between closed-form events.
    bool fixed_step = false;
    double fixed_dalpha = 1e-6;
};

struct FractionalResult {
    std::vector<FractionalStepLine> lines;  // one entry per request
    double total_cost = 0.0;                // sum of per-step eviction mass
    double primal = 0.0;                    // final primal objective
    double dual = 0.0;                      // final dual objective
    double dual_violation = 0.0;            // max interval load ever seen
    // Eviction fractions per page and interval, in interval order. The
    // final (still open) interval's value is appended at the end of the run.
    std::map<Page, std::vector<double>> x_history;
    // Per step: the positive per-page eviction-mass growth, page-sorted, and
    // the fetched mass of the requested page (its fraction before the reset).
    // Mass conservation ties the two: the deltas of a step sum to the fetch.
    std::vector<std::vector<std::pair<Page, double>>> step_deltas;
    std::vector<double> fetch_amounts;
};

// Deterministic initial cache: each agent's reserve is filled with its
// lowest-numbered pages, then the public remainder takes the smallest
// remaining pages in page order. Throws std::invalid_argument when the
// trace universe cannot fill the cache (fewer than k pages overall or
// fewer than k_i pages for some agent).
std::set<Page> fractional_initial_cache(const Trace& trace);

FractionalResult run_fractional(const Trace& trace, const FractionalOptions& opts = {});

}  // namespace rcache
