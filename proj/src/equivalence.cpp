#include "rcache/equivalence.hpp"

#include <stdexcept>
#include <string>

namespace rcache {

namespace {

int count_agent_dummies(const ReserveCacheState& cr, int agent) {
    int n = 0;
    for (const Page& q : cr.pages())
        if (q.dummy && q.agent == agent) ++n;
    return n;
}

// Smallest-index dummy of the given agent still cached, if any. Cache pages
// are ordered by (agent, local_id), so the first match has the smallest index.
std::optional<Page> smallest_dummy(const ReserveCacheState& cr, int agent) {
    for (const Page& q : cr.pages()) {
        if (q.agent > agent) break;
        if (q.agent == agent && q.dummy) return q;
    }
    return std::nullopt;
}

// The agent's public-resident page with the smallest local id, if any.
std::optional<Page> smallest_public_page(const PublicPrivateState& pp, int agent) {
    for (const Page& q : pp.public_pages()) {
        if (q.agent > agent) break;
        if (q.agent == agent) return q;
    }
    return std::nullopt;
}

int64_t pp_total_load(const PublicPrivateState& pp) {
    int64_t total = pp.public_load();
    for (int j = 1; j <= pp.config().agent_count(); ++j) total += pp.private_load(j);
    return total;
}

// The two states hold the same real pages: every real page of the reserves
// cache is in the public-private state, and the counts match.
void check_content_equality(const ReserveCacheState& cr, const PublicPrivateState& pp,
                            int64_t t) {
    int64_t reals = 0;
    for (const Page& q : cr.pages()) {
        if (q.dummy) continue;
        ++reals;
        if (!pp.contains(q))
            throw std::logic_error("mirror drift at step " + std::to_string(t) + ": page " +
                                   to_string(q) +
                                   " is in the reserves cache but not the public-private cache");
    }
    if (reals != pp_total_load(pp))
        throw std::logic_error("mirror drift at step " + std::to_string(t) +
                               ": the models cache different numbers of real pages");
}

}  // namespace

AdaptedReservesRun adapt_pp_to_reserves(const Trace& trace, const PPActionFn& inner) {
    trace.validate();
    const ReserveConfig& cfg = trace.config;
    PublicPrivateState pp(cfg);
    ReserveCacheState cr(cfg);
    AdaptedReservesRun out;
    out.pp.steps.reserve(trace.requests.size());
    out.cr.steps.reserve(trace.requests.size());

    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page& p = trace.requests[t];
        PPStepRecord prec;
        prec.t = t;
        prec.fetched = p;
        StepRecord crec;
        crec.t = t;
        crec.fetched = p;

        if (pp.contains(p) != cr.contains(p))
            throw std::logic_error("mirror drift at step " + std::to_string(t) + ": page " +
                                   to_string(p) + " is cached in only one model");
        if (pp.contains(p)) {
            prec.hit = true;
            crec.hit = true;
        } else {
            out.pp.misses += 1;
            PPAction action = inner(t, p, pp);
            if (action.evict && *action.evict == p)
                throw std::runtime_error("inner strategy evicts the page it fetches: " +
                                         to_string(p));
            if (action.evict) {
                pp.remove(*action.evict);
                out.pp.removals += 1;
            }
            if (action.relocate) {
                pp.relocate_to_private(*action.relocate);
                out.pp.relocations += 1;
            }
            pp.place(p, action.place_private);
            prec.action = action;

            // Mirror: evict the same page; on evict-free steps consume a
            // dummy (filler first, then a provably safe agent dummy).
            Page victim;
            if (action.evict) {
                victim = *action.evict;
            } else if (std::optional<Page> filler = smallest_dummy(cr, 0)) {
                victim = *filler;
            } else if (action.place_private) {
                std::optional<Page> own = smallest_dummy(cr, p.agent);
                if (!own)
                    throw std::logic_error(
                        "mirror drift at step " + std::to_string(t) + ": no dummy of agent " +
                        std::to_string(p.agent) + " left to mirror a private placement");
                victim = *own;
            } else {
                // Public placement with no fillers left: slot counting
                // guarantees some agent has more dummies than its empty
                // private slots; taking one keeps every agent covered.
                std::optional<Page> spare;
                for (int j = 1; j <= cfg.agent_count() && !spare; ++j) {
                    if (count_agent_dummies(cr, j) + pp.private_load(j) >= cfg.reserve(j) + 1)
                        spare = smallest_dummy(cr, j);
                }
                if (!spare)
                    throw std::logic_error("mirror drift at step " + std::to_string(t) +
                                           ": no dummy with spare private coverage to mirror "
                                           "a public placement");
                victim = *spare;
            }

            if (!cr.can_evict(victim, p.agent))
                throw std::logic_error(
                    "step " + std::to_string(t) + ": mirroring the eviction of " +
                    to_string(victim) + " would break agent " + std::to_string(victim.agent) +
                    "'s reserve; the inner strategy abandoned a freed private slot (an "
                    "evicted private slot must be refilled by the placed page or a relocation)");
            cr.replace(victim, p);
            crec.evicted = victim;
            out.cr.ledger.misses += 1;
            out.cr.ledger.evictions_total += 1;
            if (victim.dummy)
                out.cr.ledger.evictions_dummy += 1;
            else
                out.cr.ledger.evictions_real += 1;
            out.cr.schedule.push_back(ScheduleEntry{t, victim, p});
        }

        pp.check_invariants();
        cr.check_invariants();
        check_content_equality(cr, pp, t);
        for (int j = 1; j <= cfg.agent_count(); ++j) {
            if (count_agent_dummies(cr, j) + pp.private_load(j) < cfg.reserve(j))
                throw std::logic_error(
                    "step " + std::to_string(t) + ": agent " + std::to_string(j) +
                    "'s private coverage dropped below its reserve; the inner strategy "
                    "abandoned a freed private slot");
        }

        out.pp.steps.push_back(prec);
        out.cr.steps.push_back(crec);
    }

    if (out.cr.ledger.evictions_real != out.pp.removals)
        throw std::logic_error("mirror accounting drift: real evictions differ from removals");
    return out;
}

AdaptedPublicPrivateRun adapt_reserves_to_pp(const Trace& trace, const RunResult& inner) {
    trace.validate();
    const ReserveConfig& cfg = trace.config;
    if (static_cast<int64_t>(inner.steps.size()) != trace.length())
        throw std::runtime_error("inner run has " + std::to_string(inner.steps.size()) +
                                 " steps for a trace of length " +
                                 std::to_string(trace.length()));

    ReserveCacheState cr(cfg);
    PublicPrivateState pp(cfg);
    AdaptedPublicPrivateRun out;
    out.pp.steps.reserve(trace.requests.size());
    out.charges.reserve(trace.requests.size());
    out.extras.reserve(trace.requests.size());

    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page& p = trace.requests[t];
        const StepRecord& in = inner.steps[t];
        if (in.fetched != p)
            throw std::runtime_error("inner run fetched " + to_string(in.fetched) + " at step " +
                                     std::to_string(t) + " but the trace requests " +
                                     to_string(p));
        if (in.hit != cr.contains(p))
            throw std::runtime_error("inner run records a " +
                                     std::string(in.hit ? "hit" : "miss") + " at step " +
                                     std::to_string(t) + " but page " + to_string(p) +
                                     (cr.contains(p) ? " is cached" : " is not cached"));

        PPStepRecord rec;
        rec.t = t;
        rec.fetched = p;
        int charge = 0;
        int extra = 0;

        if (in.hit) {
            if (in.evicted)
                throw std::runtime_error("inner run evicts on a hit at step " + std::to_string(t));
            if (!pp.contains(p))
                throw std::logic_error("mirror drift at step " + std::to_string(t) + ": page " +
                                       to_string(p) +
                                       " is cached in the reserves model only");
            rec.hit = true;
        } else {
            if (!in.evicted)
                throw std::runtime_error("inner run misses without evicting at step " +
                                         std::to_string(t));
            const Page v = *in.evicted;
            cr.replace(v, p);  // re-validates the inner run's feasibility

            PPAction action;
            if (v.dummy && v.agent == p.agent) {
                // The freed slot is a private slot of the requester.
                action.place_private = true;
            } else if (v.dummy && v.agent == 0) {
                // The freed slot is a public slot.
                action.place_private = false;
            } else if (v.dummy) {
                // A dummy of another agent: its empty private slot is taken
                // by relocating that agent's public page, freeing a public
                // slot for the requested page.
                std::optional<Page> source = smallest_public_page(pp, v.agent);
                if (!source)
                    throw std::logic_error(
                        "step " + std::to_string(t) + ": agent " + std::to_string(v.agent) +
                        " has no public page to relocate, contradicting the inner run's "
                        "reserve feasibility");
                action.relocate = source;
                action.place_private = false;
                charge = 1;
            } else if (pp.in_public(v)) {
                action.evict = v;
                action.place_private = false;
                charge = 1;
            } else if (v.agent == p.agent) {
                // v sits in the requester's private slots; reuse the slot.
                action.evict = v;
                action.place_private = true;
                charge = 1;
            } else {
                // v sits in another agent's private slots: evict it, refill
                // the slot by relocating that agent's public page, and place
                // the requested page into the freed public slot.
                std::optional<Page> source = smallest_public_page(pp, v.agent);
                if (!source)
                    throw std::logic_error(
                        "step " + std::to_string(t) + ": agent " + std::to_string(v.agent) +
                        " has no public page to relocate, contradicting the inner run's "
                        "reserve feasibility");
                action.evict = v;
                action.relocate = source;
                action.place_private = false;
                charge = 2;
            }

            if (action.evict) {
                pp.remove(*action.evict);
                out.pp.removals += 1;
            }
            if (action.relocate) {
                pp.relocate_to_private(*action.relocate);
                out.pp.relocations += 1;
            }
            pp.place(p, action.place_private);
            out.pp.misses += 1;
            rec.action = action;
            extra = charge - (v.dummy ? 0 : 1);
        }

        pp.check_invariants();
        cr.check_invariants();
        check_content_equality(cr, pp, t);
        for (int j = 1; j <= cfg.agent_count(); ++j) {
            if (count_agent_dummies(cr, j) != cfg.reserve(j) - pp.private_load(j))
                throw std::logic_error("mirror drift at step " + std::to_string(t) + ": agent " +
                                       std::to_string(j) +
                                       "'s dummies do not match its empty private slots");
        }
        if (count_agent_dummies(cr, 0) != cfg.public_slots() - pp.public_load())
            throw std::logic_error("mirror drift at step " + std::to_string(t) +
                                   ": filler dummies do not match empty public slots");
        if (charge < 0 || charge > 2 || extra < 0 || extra > 1)
            throw std::logic_error("step " + std::to_string(t) + ": charge " +
                                   std::to_string(charge) + " with extra " +
                                   std::to_string(extra) + " is out of range");

        out.charges.push_back(charge);
        out.extras.push_back(extra);
        out.pp.steps.push_back(rec);
    }

    return out;
}

}  // namespace rcache
