#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rcache/core.hpp"
#include "rcache/equivalence.hpp"
#include "rcache/generators.hpp"
#include "rcache/offline.hpp"
#include "rcache/oracle.hpp"
#include "rcache/rng.hpp"
#include "test_util.hpp"

using namespace rcache;

namespace {

// A public-private strategy that never evicts: fill the requester's private
// slots first, then the public slots. Only usable when everything fits.
PPAction fill_only(int64_t, const Page& p, const PublicPrivateState& s) {
    PPAction a;
    a.place_private = s.private_load(p.agent) < s.config().reserve(p.agent);
    if (!a.place_private && s.public_load() >= s.config().public_slots())
        throw std::runtime_error("fill_only needs an instance that fits in the cache");
    return a;
}

// Standalone LRU strategy over the public-private model, replicating the
// baseline's policy: fill free slots first, otherwise evict the
// least-recently-used page among the requester's private slots and the
// public slots, placing the request into the freed slot class. A strategy
// function only sees misses, so recency is precomputed from the trace.
class PpLru {
public:
    explicit PpLru(const Trace& trace) {
        for (int64_t t = 0; t < trace.length(); ++t)
            positions_[trace.requests[t]].push_back(t);
    }

    PPAction operator()(int64_t t, const Page& p, const PublicPrivateState& s) const {
        PPAction a;
        if (s.private_load(p.agent) < s.config().reserve(p.agent)) {
            a.place_private = true;
        } else if (s.public_load() < s.config().public_slots()) {
            a.place_private = false;
        } else {
            std::optional<Page> best;
            int64_t best_use = 0;
            auto consider = [&](const Page& q) {
                int64_t use = last_use_before(q, t);
                if (!best || use < best_use) {
                    best = q;
                    best_use = use;
                }
            };
            for (const Page& q : s.private_pages(p.agent)) consider(q);
            for (const Page& q : s.public_pages()) consider(q);
            REQUIRE(best.has_value());
            a.evict = *best;
            a.place_private = s.in_private(*best);
        }
        return a;
    }

private:
    std::map<Page, std::vector<int64_t>> positions_;

    int64_t last_use_before(const Page& q, int64_t t) const {
        auto it = positions_.find(q);
        if (it == positions_.end()) return -1;
        const std::vector<int64_t>& v = it->second;
        auto jt = std::lower_bound(v.begin(), v.end(), t);
        return jt == v.begin() ? -1 : *(jt - 1);
    }
};

// Draws a uniformly random feasible action that never abandons a freed
// private slot: an eviction from a private slot is always paired with the
// placed page or a relocation refilling that agent's private slots.
class RandomDisciplinedStrategy {
public:
    explicit RandomDisciplinedStrategy(uint64_t seed) : rng_(seed) {}

    PPAction operator()(int64_t, const Page& p, const PublicPrivateState& s) {
        const ReserveConfig& cfg = s.config();
        const bool priv_room = s.private_load(p.agent) < cfg.reserve(p.agent);
        const bool pub_room = s.public_load() < cfg.public_slots();
        std::vector<PPAction> opts;
        PPAction a;

        if (priv_room) {
            a = PPAction{};
            a.place_private = true;
            opts.push_back(a);
        }
        if (pub_room) opts.push_back(PPAction{});

        // Relocation without eviction: frees a public slot.
        for (const Page& r : s.public_pages()) {
            if (s.private_load(r.agent) >= cfg.reserve(r.agent)) continue;
            bool priv_room_after = (r.agent == p.agent)
                                       ? s.private_load(p.agent) + 1 < cfg.reserve(p.agent)
                                       : priv_room;
            a = PPAction{};
            a.relocate = r;
            opts.push_back(a);
            if (priv_room_after) {
                a.place_private = true;
                opts.push_back(a);
            }
        }

        // Evicting a public page frees a public slot and never strands one.
        for (const Page& q : s.public_pages()) {
            a = PPAction{};
            a.evict = q;
            opts.push_back(a);
            if (priv_room) {
                a.place_private = true;
                opts.push_back(a);
            }
        }

        // Evicting a private page: refill the slot with the request itself
        // (same agent) or with a relocated public page of that agent.
        for (int j = 1; j <= cfg.agent_count(); ++j) {
            for (const Page& q : s.private_pages(j)) {
                if (j == p.agent) {
                    a = PPAction{};
                    a.evict = q;
                    a.place_private = true;
                    opts.push_back(a);
                    continue;
                }
                for (const Page& r : s.public_pages()) {
                    if (r.agent != j) continue;
                    a = PPAction{};
                    a.evict = q;
                    a.relocate = r;
                    opts.push_back(a);
                    if (priv_room) {
                        a.place_private = true;
                        opts.push_back(a);
                    }
                    break;
                }
            }
        }

        REQUIRE(!opts.empty());
        return opts[static_cast<size_t>(rng_.uniform_int(0, static_cast<int64_t>(opts.size()) - 1))];
    }

private:
    Rng rng_;
};

// Replays the victims of a recorded schedule; used to script inner reserves
// runs step by step.
VictimFn scripted_victims(std::vector<Page> victims) {
    auto remaining = std::make_shared<std::vector<Page>>(std::move(victims));
    return [remaining](int64_t, const Page&, const ReserveCacheState&) {
        REQUIRE(!remaining->empty());
        Page v = remaining->front();
        remaining->erase(remaining->begin());
        return v;
    };
}

// Wraps a recorded action list as a strategy, consuming one action per miss.
PPActionFn scripted_actions(std::vector<PPAction> actions) {
    auto remaining = std::make_shared<std::vector<PPAction>>(std::move(actions));
    return [remaining](int64_t, const Page&, const PublicPrivateState&) {
        REQUIRE(!remaining->empty());
        PPAction a = remaining->front();
        remaining->erase(remaining->begin());
        return a;
    };
}

void check_adapted_reserves(const Trace& trace, const AdaptedReservesRun& ad) {
    CHECK(ad.pp.misses == ad.cr.ledger.misses);
    CHECK(ad.cr.ledger.evictions_real == ad.pp.removals);
    CHECK(ad.cr.ledger.evictions_total == ad.cr.ledger.misses);
    REQUIRE(ad.pp.steps.size() == ad.cr.steps.size());
    for (size_t t = 0; t < ad.pp.steps.size(); ++t) {
        CHECK(ad.pp.steps[t].hit == ad.cr.steps[t].hit);
        if (ad.pp.steps[t].hit) continue;
        const bool inner_evicted = ad.pp.steps[t].action.evict.has_value();
        REQUIRE(ad.cr.steps[t].evicted.has_value());
        CHECK(ad.cr.steps[t].evicted->dummy == !inner_evicted);
        if (inner_evicted) CHECK(*ad.cr.steps[t].evicted == *ad.pp.steps[t].action.evict);
    }
    // The produced schedule must be independently replayable.
    RunResult replay = replay_reserves_schedule(trace, ad.cr.schedule);
    CHECK(replay.ledger.misses == ad.cr.ledger.misses);
    CHECK(replay.ledger.evictions_real == ad.cr.ledger.evictions_real);
    CHECK(replay.ledger.evictions_dummy == ad.cr.ledger.evictions_dummy);
}

void check_adapted_pp(const Trace& trace, const RunResult& inner,
                      const AdaptedPublicPrivateRun& ad) {
    CHECK(ad.pp.misses == inner.ledger.misses);
    REQUIRE(ad.charges.size() == trace.requests.size());
    REQUIRE(ad.extras.size() == trace.requests.size());
    int64_t charge_sum = 0;
    int64_t extra_sum = 0;
    for (size_t t = 0; t < ad.charges.size(); ++t) {
        CHECK(ad.charges[t] >= 0);
        CHECK(ad.charges[t] <= 2);
        CHECK(ad.extras[t] >= 0);
        CHECK(ad.extras[t] <= 1);
        const StepRecord& in = inner.steps[t];
        int real = in.evicted && !in.evicted->dummy ? 1 : 0;
        CHECK(ad.charges[t] == real + ad.extras[t]);
        if (in.hit) CHECK(ad.charges[t] == 0);
        charge_sum += ad.charges[t];
        extra_sum += ad.extras[t];
    }
    CHECK(charge_sum == ad.pp.charged());
    CHECK(extra_sum == ad.pp.charged() - inner.ledger.evictions_real);
    CHECK(ad.pp.charged() <= 2 * inner.ledger.evictions_total);
}

}  // namespace

TEST_CASE("a never-evicting strategy mirrors to a run with no real evictions") {
    Trace trace = make_trace(4, {2}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 1}, {1, 3}});
    AdaptedReservesRun ad = adapt_pp_to_reserves(trace, fill_only);
    CHECK(ad.pp.misses == 4);
    CHECK(ad.pp.removals == 0);
    CHECK(ad.cr.ledger.misses == 4);
    CHECK(ad.cr.ledger.evictions_real == 0);
    CHECK(ad.cr.ledger.evictions_dummy == 4);
    CHECK(ad.cr.steps[4].hit);
    CHECK(ad.cr.steps[5].hit);
    // Fillers go first, then the requester's own dummies on private
    // placements and spare-covered dummies on public placements.
    CHECK(*ad.cr.steps[0].evicted == dummy_page(0, 0));
    CHECK(*ad.cr.steps[1].evicted == dummy_page(0, 1));
    CHECK(*ad.cr.steps[2].evicted == dummy_page(1, 0));
    CHECK(*ad.cr.steps[3].evicted == dummy_page(1, 1));
    check_adapted_reserves(trace, ad);
}

TEST_CASE("mirrored evictions reuse the inner strategy's victims one-to-one") {
    // Fill two private slots and one public slot, then force LRU evictions.
    Trace trace = make_trace(3, {2}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 4}, {1, 3}});
    AdaptedReservesRun ad = adapt_pp_to_reserves(trace, PpLru(trace));
    check_adapted_reserves(trace, ad);
    // t3 misses with a full cache; LRU among {0,1,2} is page 0 (private), so
    // the reserves run evicts the same page.
    CHECK_FALSE(ad.pp.steps[3].hit);
    CHECK(*ad.pp.steps[3].action.evict == real_page(1, 0));
    CHECK(*ad.cr.steps[3].evicted == real_page(1, 0));
    CHECK(ad.pp.removals == ad.cr.ledger.evictions_real);
    PPRunResult direct = run_pp_lru(trace);
    CHECK(direct.misses == ad.pp.misses);
    CHECK(direct.removals == ad.pp.removals);
}

TEST_CASE("pp-lru mirrors exactly on random instances") {
    Rng rng(20260816);
    RandomInstanceCaps caps;
    caps.max_agents = 3;
    caps.max_k = 6;
    caps.max_pages = 10;
    caps.max_t = 40;
    for (int trial = 0; trial < 60; ++trial) {
        Trace trace = random_instance(rng, caps);
        AdaptedReservesRun ad = adapt_pp_to_reserves(trace, PpLru(trace));
        check_adapted_reserves(trace, ad);
        PPRunResult direct = run_pp_lru(trace);
        CHECK(direct.misses == ad.pp.misses);
        CHECK(direct.removals == ad.pp.removals);
    }
}

TEST_CASE("random disciplined strategies mirror with equal evictions") {
    Rng rng(77);
    RandomInstanceCaps caps;
    caps.max_agents = 3;
    caps.max_k = 6;
    caps.max_pages = 10;
    caps.max_t = 48;
    for (int trial = 0; trial < 80; ++trial) {
        Trace trace = random_instance(rng, caps);
        AdaptedReservesRun ad =
            adapt_pp_to_reserves(trace, RandomDisciplinedStrategy(1000 + trial));
        check_adapted_reserves(trace, ad);
    }
}

TEST_CASE("the eviction-minimizing oracle witness mirrors into a reserves schedule") {
    Rng rng(4242);
    RandomInstanceCaps caps;  // defaults match the oracle's size limits
    caps.max_t = 12;
    for (int trial = 0; trial < 15; ++trial) {
        Trace trace = random_instance(rng, caps);
        PPOracleResult ora = solve_pp_opt(trace);
        AdaptedReservesRun ad = adapt_pp_to_reserves(trace, scripted_actions(ora.witness_actions));
        CHECK(ad.pp.charged() == ora.evictions);
        CHECK(ad.pp.misses == ora.misses);
        check_adapted_reserves(trace, ad);
    }
}

TEST_CASE("abandoning a freed private slot is reported") {
    // Agent 1 and agent 2 both reserve one slot; one public slot. The inner
    // strategy parks agent 1's page in public, spends agent 1's dummy, and
    // then evicts agent 1's private page while placing the request into
    // agent 2's free private slot. The freed private slot stays empty, which
    // no reserves-model swap can mirror.
    Trace trace = make_trace(3, {1, 1}, {{1, 0}, {1, 1}, {2, 0}});
    std::vector<PPAction> acts(3);
    acts[0].place_private = true;   // a -> private-1
    acts[1].place_private = false;  // b -> public
    acts[2].evict = real_page(1, 0);
    acts[2].place_private = true;   // x -> private-2, stranding private-1
    CHECK_THROWS_AS(adapt_pp_to_reserves(trace, scripted_actions(acts)), std::logic_error);
}

TEST_CASE("a refilled private slot is not an abandonment") {
    // Same shape, but the inner strategy relocates agent 1's public page
    // into the freed private slot; the mirror stays feasible.
    Trace trace = make_trace(3, {1, 1}, {{1, 0}, {1, 1}, {2, 0}});
    std::vector<PPAction> acts(3);
    acts[0].place_private = true;
    acts[1].place_private = false;
    acts[2].evict = real_page(1, 0);
    acts[2].relocate = real_page(1, 1);
    acts[2].place_private = false;  // x takes the public slot freed by b
    AdaptedReservesRun ad = adapt_pp_to_reserves(trace, scripted_actions(acts));
    check_adapted_reserves(trace, ad);
    CHECK(ad.cr.ledger.evictions_real == 1);
    CHECK(ad.pp.relocations == 1);
}

TEST_CASE("reserves runs map step kinds to their charges") {
    // Geometry: one slot reserved for each of agents 1 and 2, two public.
    Trace trace = make_trace(4, {1, 1},
                             {{2, 0}, {1, 0}, {1, 1}, {1, 2}, {1, 3}, {2, 1}, {2, 0}});
    std::vector<Page> victims = {
        dummy_page(0, 0),  // x2 takes a public slot              charge 0
        dummy_page(1, 0),  // a1 takes its own private slot       charge 0
        dummy_page(2, 0),  // c1 spends agent 2's dummy: relocate charge 1
        real_page(1, 1),   // d1 replaces a public-resident page  charge 1
        real_page(1, 0),   // e1 replaces its own private page    charge 1
        real_page(1, 3),   // y2 evicts from agent 1's private    charge 2
    };
    RunResult inner = replay_reserves(trace, scripted_victims(victims));
    REQUIRE(inner.ledger.misses == 6);
    AdaptedPublicPrivateRun ad = adapt_reserves_to_pp(trace, inner);
    check_adapted_pp(trace, inner, ad);
    CHECK(ad.charges == std::vector<int>{0, 0, 1, 1, 1, 2, 0});
    CHECK(ad.extras == std::vector<int>{0, 0, 1, 0, 0, 1, 0});
    CHECK(ad.pp.removals == 3);
    CHECK(ad.pp.relocations == 2);
    CHECK(ad.pp.steps[6].hit);
    // The cross-agent dummy step relocates agent 2's public page.
    CHECK(*ad.pp.steps[2].action.relocate == real_page(2, 0));
    CHECK_FALSE(ad.pp.steps[2].action.evict.has_value());
    // The double-charged step evicts the private page and relocates the
    // evicted agent's public-resident page into the freed private slot.
    CHECK(*ad.pp.steps[5].action.evict == real_page(1, 3));
    CHECK(*ad.pp.steps[5].action.relocate == real_page(1, 2));
}

TEST_CASE("the relocation source is the smallest-local-id public page") {
    // Two agent-1 pages sit in public before a cross-agent private eviction.
    Trace trace = make_trace(4, {1, 1}, {{1, 5}, {1, 7}, {1, 3}, {2, 0}});
    std::vector<Page> victims = {
        dummy_page(1, 0),  // 1:5 -> private-1
        dummy_page(0, 0),  // 1:7 -> public
        dummy_page(0, 1),  // 1:3 -> public
        real_page(1, 5),   // agent 2's request evicts from private-1
    };
    RunResult inner = replay_reserves(trace, scripted_victims(victims));
    AdaptedPublicPrivateRun ad = adapt_reserves_to_pp(trace, inner);
    check_adapted_pp(trace, inner, ad);
    // Step 3 evicts 1:5 from private-1 for agent 2; agent 1's public pages
    // are 1:7 and 1:3, and the smaller local id must be relocated.
    REQUIRE(ad.pp.steps[3].action.relocate.has_value());
    CHECK(*ad.pp.steps[3].action.relocate == real_page(1, 3));
    CHECK(*ad.pp.steps[3].action.evict == real_page(1, 5));
    CHECK(ad.charges[3] == 2);
}

TEST_CASE("public-heavy inner runs charge exactly their evictions") {
    // The inner run only ever spends fillers, its own dummy, or
    // public-resident pages, so no step needs an extra relocation.
    Trace trace = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}});
    std::vector<Page> victims = {
        dummy_page(1, 0),  // 1:0 -> private
        dummy_page(0, 0),  // 1:1 -> public
        dummy_page(0, 1),  // 1:2 -> public
        real_page(1, 1),   // 1:3 replaces a public-resident page
    };
    RunResult inner = replay_reserves(trace, scripted_victims(victims));
    REQUIRE(inner.steps[4].hit);
    AdaptedPublicPrivateRun ad = adapt_reserves_to_pp(trace, inner);
    check_adapted_pp(trace, inner, ad);
    CHECK(inner.ledger.evictions_real == 1);
    CHECK(ad.pp.charged() == inner.ledger.evictions_real);
    CHECK(std::accumulate(ad.extras.begin(), ad.extras.end(), 0) == 0);
}

TEST_CASE("random reserves runs stay within twice the inner evictions") {
    Rng rng(99);
    RandomInstanceCaps caps;
    caps.max_agents = 3;
    caps.max_k = 6;
    caps.max_pages = 10;
    caps.max_t = 48;
    for (int trial = 0; trial < 80; ++trial) {
        Trace trace = random_instance(rng, caps);
        // LRU inner run.
        RunResult lru = run_lru(trace);
        AdaptedPublicPrivateRun ad_lru = adapt_reserves_to_pp(trace, lru);
        check_adapted_pp(trace, lru, ad_lru);
        // Uniformly random feasible victims, dummies of other agents
        // included, to exercise every step kind.
        Rng vic_rng(5000 + trial);
        VictimFn random_victim = [&vic_rng](int64_t, const Page& p, const ReserveCacheState& s) {
            std::vector<Page> cands;
            for (const Page& q : s.pages())
                if (s.can_evict(q, p.agent)) cands.push_back(q);
            REQUIRE(!cands.empty());
            return cands[static_cast<size_t>(
                vic_rng.uniform_int(0, static_cast<int64_t>(cands.size()) - 1))];
        };
        RunResult rnd = replay_reserves(trace, random_victim);
        AdaptedPublicPrivateRun ad_rnd = adapt_reserves_to_pp(trace, rnd);
        check_adapted_pp(trace, rnd, ad_rnd);
    }
}

TEST_CASE("adapting a reserves run and mirroring it back preserves the evictions") {
    Rng rng(31337);
    RandomInstanceCaps caps;
    caps.max_agents = 3;
    caps.max_k = 5;
    caps.max_pages = 9;
    caps.max_t = 30;
    for (int trial = 0; trial < 40; ++trial) {
        Trace trace = random_instance(rng, caps);
        RunResult inner = run_lru(trace);
        AdaptedPublicPrivateRun fwd = adapt_reserves_to_pp(trace, inner);
        // The produced public-private run never abandons a private slot, so
        // it can be mirrored back into the reserves model.
        std::vector<PPAction> actions;
        for (const PPStepRecord& step : fwd.pp.steps)
            if (!step.hit) actions.push_back(step.action);
        AdaptedReservesRun back = adapt_pp_to_reserves(trace, scripted_actions(actions));
        check_adapted_reserves(trace, back);
        CHECK(back.pp.misses == inner.ledger.misses);
        CHECK(back.cr.ledger.evictions_real == fwd.pp.removals);
        CHECK(back.cr.ledger.evictions_real == inner.ledger.evictions_real);
    }
}

TEST_CASE("offline runs mirrored into the public-private model stay near the optimum") {
    Rng rng(271828);
    RandomInstanceCaps caps;  // oracle-sized
    caps.max_t = 12;
    for (int trial = 0; trial < 25; ++trial) {
        Trace trace = random_instance(rng, caps);
        RunResult inner = run_offline(trace).run;
        AdaptedPublicPrivateRun ad = adapt_reserves_to_pp(trace, inner);
        check_adapted_pp(trace, inner, ad);
        PPOracleResult ora = solve_pp_opt(trace);
        CHECK(ad.pp.charged() <= 4 * ora.evictions);
    }
}

TEST_CASE("malformed inner runs are rejected") {
    Trace trace = make_trace(3, {1}, {{1, 0}, {1, 1}});
    RunResult inner = run_lru(trace);

    RunResult truncated = inner;
    truncated.steps.pop_back();
    CHECK_THROWS_AS(adapt_reserves_to_pp(trace, truncated), std::runtime_error);

    RunResult wrong_hit = inner;
    wrong_hit.steps[0].hit = true;
    wrong_hit.steps[0].evicted.reset();
    CHECK_THROWS_AS(adapt_reserves_to_pp(trace, wrong_hit), std::runtime_error);

    RunResult bad_victim = inner;
    bad_victim.steps[0].evicted = real_page(1, 9);  // not cached
    CHECK_THROWS_AS(adapt_reserves_to_pp(trace, bad_victim), std::runtime_error);

    RunResult no_evict = inner;
    no_evict.steps[0].evicted.reset();
    CHECK_THROWS_AS(adapt_reserves_to_pp(trace, no_evict), std::runtime_error);
}
