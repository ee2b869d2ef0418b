#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "doctest.h"
#include "rcache/core.hpp"
#include "rcache/generators.hpp"
#include "rcache/oracle.hpp"
#include "test_util.hpp"

using namespace rcache;

namespace {

// Full enumeration over raw cache sets, no canonicalization and no pruning.
// Deliberately independent of the production search so the two can be
// compared on random instances.
int64_t naive_reserves_opt(const Trace& trace) {
    std::vector<Page> init;
    for (int i = 1; i <= trace.config.agent_count(); ++i)
        for (int j = 0; j < trace.config.reserve(i); ++j) init.push_back(dummy_page(i, j));
    for (int j = 0; j < trace.config.public_slots(); ++j) init.push_back(dummy_page(0, j));
    std::sort(init.begin(), init.end());

    std::map<std::pair<int64_t, std::vector<Page>>, int64_t> memo;
    std::function<int64_t(int64_t, std::vector<Page>)> go =
        [&](int64_t t, std::vector<Page> state) -> int64_t {
        if (t == trace.length()) return 0;
        const Page p = trace.requests[t];
        if (std::binary_search(state.begin(), state.end(), p)) return go(t + 1, std::move(state));
        auto key = std::make_pair(t, state);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        int64_t best = -1;
        for (size_t v = 0; v < state.size(); ++v) {
            std::vector<Page> ns = state;
            ns[v] = p;
            std::sort(ns.begin(), ns.end());
            bool ok = true;
            for (int i = 1; i <= trace.config.agent_count(); ++i) {
                int cnt = 0;
                for (const Page& q : ns)
                    if (q.agent == i) ++cnt;
                if (cnt < trace.config.reserve(i)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            int64_t c = 1 + go(t + 1, std::move(ns));
            if (best < 0 || c < best) best = c;
        }
        REQUIRE(best >= 0);
        memo[key] = best;
        return best;
    };
    return go(0, init);
}

const OracleLimits kWide{16, 8, 8, 40};

}  // namespace

TEST_CASE("exact minimum misses on frozen instances") {
    // Single agent, no reserve: plain farthest-in-future territory.
    Trace t1 = make_trace(2, {0}, {{1, 0}, {1, 1}, {1, 2}, {1, 0}, {1, 1}});
    CHECK(solve_reserves_opt(t1, kWide).misses == 4);

    Trace t2 = make_trace(3, {1, 1}, {{1, 0}, {2, 0}, {1, 1}, {2, 1}, {1, 0}, {2, 0}});
    CHECK(solve_reserves_opt(t2, kWide).misses == 4);

    Trace t3 = make_trace(2, {1, 0}, {{1, 0}, {2, 0}, {2, 1}, {2, 0}, {1, 0}, {2, 1}});
    CHECK(solve_reserves_opt(t3, kWide).misses == 5);

    Trace t4 = make_trace(3, {2}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}, {1, 2}, {1, 3}});
    CHECK(solve_reserves_opt(t4, kWide).misses == 5);

    Trace t5 = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    CHECK(solve_reserves_opt(t5, kWide).misses == 4);
}

TEST_CASE("witness schedule replays to the claimed miss count") {
    Rng rng(101);
    RandomInstanceCaps caps{3, 4, 7, 10};
    for (int it = 0; it < 40; ++it) {
        Trace t = random_instance(rng, caps);
        OracleResult r = solve_reserves_opt(t, kWide);
        RunResult replayed = replay_reserves_schedule(t, r.schedule);
        CHECK(replayed.ledger.misses == r.misses);
    }
}

TEST_CASE("pruned search equals unpruned enumeration on random instances") {
    Rng rng(2024);
    RandomInstanceCaps caps{2, 3, 6, 8};
    for (int it = 0; it < 40; ++it) {
        Trace t = random_instance(rng, caps);
        CAPTURE(it);
        CHECK(solve_reserves_opt(t, kWide).misses == naive_reserves_opt(t));
    }
}

TEST_CASE("oracle is deterministic") {
    Rng rng(7);
    Trace t = random_instance(rng, RandomInstanceCaps{});
    OracleResult a = solve_reserves_opt(t, kWide);
    OracleResult b = solve_reserves_opt(t, kWide);
    REQUIRE(a.schedule.size() == b.schedule.size());
    for (size_t i = 0; i < a.schedule.size(); ++i) {
        CHECK(a.schedule[i].t == b.schedule[i].t);
        CHECK(a.schedule[i].evict == b.schedule[i].evict);
        CHECK(a.schedule[i].fetch == b.schedule[i].fetch);
    }
}

TEST_CASE("size limits guard the exhaustive search") {
    Trace big = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    OracleLimits tiny{3, 1, 2, 4};
    CHECK_THROWS(solve_reserves_opt(big, tiny));

    setenv("RCACHE_ORACLE_LIMITS", "4,1,2,5", 1);
    OracleLimits env = OracleLimits::from_env();
    CHECK(env.max_pages == 4);
    CHECK(env.max_agents == 1);
    CHECK(env.max_k == 2);
    CHECK(env.max_t == 5);
    unsetenv("RCACHE_ORACLE_LIMITS");
    OracleLimits defaults = OracleLimits::from_env();
    CHECK(defaults.max_pages == 9);
    CHECK(defaults.max_t == 14);
}

TEST_CASE("public-private optimum on frozen instances") {
    Trace t1 = make_trace(2, {0}, {{1, 0}, {1, 1}, {1, 2}, {1, 0}, {1, 1}});
    PPOracleResult r1 = solve_pp_opt(t1, kWide);
    CHECK(r1.evictions == 2);
    CHECK(r1.min_misses == 4);

    Trace t2 = make_trace(3, {1, 1}, {{1, 0}, {2, 0}, {1, 1}, {2, 1}, {1, 0}, {2, 0}});
    PPOracleResult r2 = solve_pp_opt(t2, kWide);
    CHECK(r2.evictions == 1);
    CHECK(r2.min_misses == 4);

    Trace t3 = make_trace(2, {1, 0}, {{1, 0}, {2, 0}, {2, 1}, {2, 0}, {1, 0}, {2, 1}});
    PPOracleResult r3 = solve_pp_opt(t3, kWide);
    CHECK(r3.evictions == 3);
    CHECK(r3.min_misses == 5);

    Trace t4 = make_trace(3, {2}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}, {1, 2}, {1, 3}});
    PPOracleResult r4 = solve_pp_opt(t4, kWide);
    CHECK(r4.evictions == 2);
    CHECK(r4.min_misses == 5);

    Trace t5 = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    PPOracleResult r5 = solve_pp_opt(t5, kWide);
    CHECK(r5.evictions == 1);
    CHECK(r5.min_misses == 4);
}

TEST_CASE("both models agree on the minimum number of misses") {
    Rng rng(31337);
    RandomInstanceCaps caps{2, 3, 6, 8};
    for (int it = 0; it < 25; ++it) {
        Trace t = random_instance(rng, caps);
        CAPTURE(it);
        CHECK(solve_pp_opt(t, kWide).min_misses == solve_reserves_opt(t, kWide).misses);
    }
}
