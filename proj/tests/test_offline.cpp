#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "rcache/core.hpp"
#include "rcache/generators.hpp"
#include "rcache/offline.hpp"
#include "rcache/oracle.hpp"
#include "test_util.hpp"

using namespace rcache;

namespace {
const OracleLimits kWide{16, 8, 8, 40};
}

TEST_CASE("frozen miss counts") {
    Trace t1 = make_trace(2, {0}, {{1, 0}, {1, 1}, {1, 2}, {1, 0}, {1, 1}});
    CHECK(run_offline(t1).run.ledger.misses == 4);

    Trace t2 = make_trace(3, {1, 1}, {{1, 0}, {2, 0}, {1, 1}, {2, 1}, {1, 0}, {2, 0}});
    CHECK(run_offline(t2).run.ledger.misses == 5);

    Trace t3 = make_trace(2, {1, 0}, {{1, 0}, {2, 0}, {2, 1}, {2, 0}, {1, 0}, {2, 1}});
    CHECK(run_offline(t3).run.ledger.misses == 5);

    Trace t4 = make_trace(3, {2}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}, {1, 2}, {1, 3}});
    CHECK(run_offline(t4).run.ledger.misses == 5);

    Trace t5 = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    CHECK(run_offline(t5).run.ledger.misses == 4);
}

TEST_CASE("schedule replays to the same ledger") {
    Rng rng(555);
    RandomInstanceCaps caps{3, 5, 9, 16};
    for (int it = 0; it < 30; ++it) {
        Trace t = random_instance(rng, caps);
        OfflineResult r = run_offline(t);
        RunResult replayed = replay_reserves_schedule(t, r.run.schedule);
        CHECK(replayed.ledger.misses == r.run.ledger.misses);
        CHECK(replayed.ledger.evictions_real == r.run.ledger.evictions_real);
    }
}

TEST_CASE("single agent with no reserve reduces to farthest-in-future") {
    // Exhaustive sweep: every trace over 3 pages of length up to 6, k = 2.
    for (int64_t len = 1; len <= 6; ++len) {
        int64_t total = 1;
        for (int64_t i = 0; i < len; ++i) total *= 3;
        for (int64_t code = 0; code < total; ++code) {
            std::vector<std::pair<int, int>> reqs;
            int64_t c = code;
            for (int64_t i = 0; i < len; ++i) {
                reqs.push_back({1, static_cast<int>(c % 3)});
                c /= 3;
            }
            Trace t = make_trace(2, {0}, reqs);
            CAPTURE(code);
            CAPTURE(len);
            CHECK(run_offline(t).run.ledger.misses == solve_reserves_opt(t, kWide).misses);
        }
    }
}

TEST_CASE("never worse than twice the optimum, audited") {
    Rng rng(999);
    RandomInstanceCaps caps{3, 5, 9, 14};
    for (int it = 0; it < 40; ++it) {
        Trace t = random_instance(rng, caps);
        OracleResult opt = solve_reserves_opt(t, kWide);
        OfflineOptions options;
        options.audit = true;
        options.opt_schedule = &opt.schedule;
        OfflineResult r = run_offline(t, options);  // throws on any audit breach
        CAPTURE(it);
        CHECK(r.run.ledger.misses <= 2 * opt.misses);
        REQUIRE(r.audit.size() == static_cast<size_t>(t.length()));
        int64_t alg = 0;
        for (const AuditStep& s : r.audit) {
            alg += s.d_alg;
            CHECK(s.phi_after >= 0);
        }
        CHECK(alg == r.run.ledger.misses);
    }
}

TEST_CASE("evicted dummies always belong to the requesting agent") {
    Rng rng(4242);
    RandomInstanceCaps caps{3, 5, 9, 16};
    for (int it = 0; it < 40; ++it) {
        Trace t = random_instance(rng, caps);
        OfflineResult r = run_offline(t);
        for (const StepRecord& s : r.run.steps) {
            if (s.evicted && s.evicted->dummy && s.evicted->agent != 0) {
                CHECK(s.evicted->agent == s.fetched.agent);
            }
        }
    }
}
