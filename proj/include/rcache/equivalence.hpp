#pragma once

#include <vector>

#include "rcache/core.hpp"

namespace rcache {

// Adapters between the two cache models. Both directions replay a strategy
// for one model while mirroring every step into the other model, so a
// strategy written against either model yields a feasible run in both.
//
// Mirroring a public-private strategy into the reserves model never adds
// evictions: the reserves run evicts exactly the page the inner strategy
// evicts, and evicts a dummy (which costs nothing real) whenever the inner
// strategy fills an empty slot. Mirroring a reserves strategy into the
// public-private model charges at most 2 per inner eviction: most steps map
// one-to-one, and only a cross-agent private eviction needs an extra
// relocation to keep the private slots consistent.

// Result of mirroring a public-private strategy into the reserves model.
struct AdaptedReservesRun {
    PPRunResult pp;  // the inner strategy's own run
    RunResult cr;    // the mirrored reserves run

    // Always equal to pp.removals: the mirror evicts a real page exactly at
    // the steps where the inner strategy removes one.
    int64_t real_evictions() const { return cr.ledger.evictions_real; }
};

// Runs `inner` on the trace in the public-private model and mirrors it into
// a reserves-model run over the same trace.
//
// Maintained step invariants (checked, violations throw std::logic_error):
//   - the reserves cache holds exactly the public-private content plus
//     dummies ("content equality");
//   - for every agent j, (agent-j dummies) + (private-j load) >= k_j, so a
//     later eviction mirroring stays feasible ("private coverage").
// The mirror picks the inner strategy's own victim on evicting steps. When
// the inner strategy fills an empty slot instead, the mirror evicts a dummy:
// a filler dummy when one remains; otherwise the requester's own dummy if
// the page went into a private slot, or the smallest dummy of an agent with
// spare private coverage if it went into a public slot. Both fallbacks are
// proven to exist by slot counting.
//
// The private-coverage invariant can only break if the inner strategy
// abandons a freed private slot (evicts from a private slot, then parks the
// requested page elsewhere without refilling the slot by a relocation). Such
// steps fall outside the slot-reuse discipline this adapter mirrors, and the
// replay reports them at the offending step.
AdaptedReservesRun adapt_pp_to_reserves(const Trace& trace, const PPActionFn& inner);

// Result of mirroring a completed reserves run into the public-private model.
struct AdaptedPublicPrivateRun {
    PPRunResult pp;  // the produced public-private run

    // Per step: evictions + relocations charged (0, 1, or 2), and the charge
    // beyond the inner step's real evictions (0 or 1).
    std::vector<int> charges;
    std::vector<int> extras;
};

// Mirrors a completed reserves-model run (as produced by replay_reserves,
// run_lru, run_offline, ...) into a public-private run over the same trace.
// The inner run is replayed and re-validated; a malformed or infeasible run
// throws std::runtime_error.
//
// Maintained step invariants (checked, violations throw std::logic_error):
//   - the public-private content equals the reserves cache's real pages;
//   - for every agent j, empty private-j slots == agent-j dummies in the
//     reserves cache, and empty public slots == filler dummies.
// Step mapping, for a miss on page p (agent i) where the inner run evicts v:
//   - v is agent i's own dummy   -> place p in the freed private slot; 0
//   - v is a filler dummy        -> place p in the freed public slot;  0
//   - v is agent j's dummy, j!=i -> relocate agent j's smallest-local-id
//                                   public page into private-j, place p in
//                                   the freed public slot;              1
//   - v is real, sits in public  -> evict v, place p in public;        1
//   - v is real, in private-i    -> evict v, place p in private-i;     1
//   - v is real, in private-j    -> evict v, relocate agent j's smallest
//                                   public page into private-j, place p
//                                   in the freed public slot;           2
// Every required relocation source is proven to exist by the inner run's
// reserve feasibility. Per-step charge is at most 2, and at most 1 beyond
// the inner step's real evictions; slots are never refilled except by a
// requested page.
AdaptedPublicPrivateRun adapt_reserves_to_pp(const Trace& trace, const RunResult& inner);

}  // namespace rcache
