#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "rcache/core.hpp"
#include "rcache/fractional.hpp"
#include "rcache/rng.hpp"

namespace rcache {

// One two-page marginal change: `gaining` picks up `eps` in-cache probability
// mass and `losing` gives the same amount up; every other page is untouched.
struct ElementaryMove {
    Page gaining;
    Page losing;
    double eps = 0.0;
};

// Splits one fractional step into elementary moves, pairing the requested
// page's fetched mass against each losing page's growth in page order.
// `losses` must be the per-page positive eviction-mass growth of the step;
// throws std::logic_error if the losses do not add up to `fetch_amount`
// within 1e-9 (mass conservation).
std::vector<ElementaryMove> decompose_step(const Page& fetched, double fetch_amount,
                                           const std::vector<std::pair<Page, double>>& losses);

// Per-move bookkeeping emitted by Distribution::apply_move. Masses refer to
// the phase accounting: eps1 = mass whose insertion grew a full state to
// k+1 pages, eps2 = mass whose eviction pushed an agent below its reserve,
// eps3 = mass whose size-repair transfer created a fresh reserve violation.
struct MoveStats {
    double eps = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double eps3 = 0.0;
    double cost = 0.0;  // expected evictions paid by the distribution
};

// Notification for every mass transfer the distribution performs: `delta`
// probability moves from the state `source` to `target`, where `source_mass`
// is the source's probability right before the transfer and `evicted` counts
// the pages of source missing from target. The coupled sampler listens here.
struct MassMoveEvent {
    const std::vector<Page>& source;
    const std::vector<Page>& target;
    double delta = 0.0;
    double source_mass = 0.0;
    int evicted = 0;
};
using MassMoveHook = std::function<void(const MassMoveEvent&)>;

// Explicit distribution over integral cache states. Keys are page-sorted
// cache contents of exactly k pages; values are probabilities in (0,1]
// summing to one. At step boundaries every support state satisfies all
// reserves and every page's in-cache probability matches the fractional
// solution's. Starts as a point mass on the deterministic initial cache.
class Distribution {
public:
    Distribution(const Trace& trace, size_t support_cap);
    // Builds an explicit support; states may be given unsorted. Validates
    // sizes, reserves, and that probabilities sum to one.
    Distribution(const ReserveConfig& cfg,
                 std::vector<std::pair<std::vector<Page>, double>> states, size_t support_cap);

    // Applies one elementary move in three repair stages: shift the two
    // marginals, restore every state to k pages, restore every reserve.
    // Returns the expected eviction cost, at most 4 * eps. Throws
    // std::logic_error when no valid repair matching exists or the support
    // cap is exceeded.
    MoveStats apply_move(const ElementaryMove& move);

    const std::map<std::vector<Page>, double>& support() const { return support_; }
    std::map<Page, double> marginals() const;
    double marginal(const Page& p) const;
    bool point_mass() const { return support_.size() == 1; }
    double entropy() const;

    // Step-boundary invariants: probabilities sum to one, every state holds
    // exactly k pages and satisfies all reserves. Throws on breach.
    void check_invariants() const;

    void set_hook(MassMoveHook hook) { hook_ = std::move(hook); }

private:
    struct Pick {
        std::vector<Page> state;
        double take = 0.0;
    };

    double shift(const std::vector<Page>& from, std::vector<Page> to, double delta);
    int deficit_agent(const std::vector<Page>& state) const;
    std::vector<Pick> select(double want,
                             const std::vector<std::function<bool(const std::vector<Page>&)>>& classes,
                             const char* stage) const;
    double phase_evict(const ElementaryMove& move, double* forced_deficit);
    double phase_insert(const Page& p, double want);
    void phase_repair_short();
    double phase_balance();
    void sweep_dust();
    void phase_repair_full();

    ReserveConfig cfg_;
    size_t support_cap_;
    std::map<std::vector<Page>, double> support_;
    std::vector<Page> universe_;
    MassMoveHook hook_;
    double move_cost_ = 0.0;
};

struct RoundingOptions {
    uint64_t seed = 0;
    size_t support_cap = 50000;
    bool sample = true;  // couple one integral run to the distribution
};

struct RoundingStepStats {
    int64_t t = 0;
    double expected_miss = 0.0;    // 1 - Pr[requested page cached] before the step
    double fractional_cost = 0.0;  // eviction mass of the fractional step
    double expected_cost = 0.0;    // eviction mass the distribution paid
    size_t support = 0;
    double entropy = 0.0;
    bool sampled_miss = false;
};

// One state change of the sampled integral run.
struct SampledOp {
    int64_t t = 0;
    std::optional<Page> evicted;
    std::optional<Page> fetched;
};

struct RoundingResult {
    std::vector<RoundingStepStats> steps;
    std::vector<MoveStats> moves;  // one entry per elementary move, in order
    double expected_cost = 0.0;    // total expected evictions
    double expected_misses = 0.0;  // total expected miss mass
    CostLedger sampled;            // misses and evictions of the sampled run
    std::vector<SampledOp> sampled_ops;
    uint64_t rng_draws = 0;  // zero whenever the distribution stays a point mass
    std::vector<std::pair<std::vector<Page>, double>> final_support;
};

// Replays a fractional transcript against the maintained distribution and,
// when opts.sample is set, one seed-coupled integral run. The fractional
// result must come from the same trace.
RoundingResult run_rounding(const Trace& trace, const FractionalResult& frac,
                            const RoundingOptions& opts);

}  // namespace rcache
