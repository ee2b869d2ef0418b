#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "rcache/core.hpp"
#include "rcache/generators.hpp"
#include "rcache/trace_io.hpp"
#include "test_util.hpp"

using namespace rcache;

TEST_CASE("page rendering and parsing round-trip") {
    CHECK(to_string(real_page(2, 5)) == "2:5");
    CHECK(to_string(dummy_page(3, 1)) == "3:d1");
    CHECK(to_string(dummy_page(0, 0)) == "0:d0");

    CHECK(parse_page("2:5") == real_page(2, 5));
    CHECK(parse_page("3:d1") == dummy_page(3, 1));
    CHECK(parse_page("0:d2") == dummy_page(0, 2));
    CHECK_FALSE(parse_page("").has_value());
    CHECK_FALSE(parse_page("12").has_value());
    CHECK_FALSE(parse_page("1:").has_value());
    CHECK_FALSE(parse_page("1:d").has_value());
    CHECK_FALSE(parse_page("a:b").has_value());

    CHECK(real_page(1, 2) < real_page(2, 0));
    CHECK(real_page(1, 2) < real_page(1, 3));
    CHECK(real_page(1, 2) < dummy_page(1, 2));
}

TEST_CASE("reserve configuration validation") {
    ReserveConfig ok{4, {1, 2}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.public_slots() == 1);
    CHECK(ok.reserve(1) == 1);
    CHECK(ok.reserve(2) == 2);
    CHECK(ok.reserve(0) == 0);

    ReserveConfig full{3, {1, 2}};  // reserves must leave public room
    CHECK_THROWS(full.validate());
    ReserveConfig negative{4, {-1, 2}};
    CHECK_THROWS(negative.validate());
    ReserveConfig empty{0, {}};
    CHECK_THROWS(empty.validate());
}

TEST_CASE("trace file round-trip") {
    Trace t = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 0}});
    std::ostringstream out;
    write_trace(out, t);
    Trace back = parse_trace(out.str());
    CHECK(back.config.k == 3);
    CHECK(back.config.reserves == std::vector<int>{1});
    CHECK(back.requests == t.requests);

    Trace commented = parse_trace("# header comment\n3 1 1\n1 0\n# mid comment\n1 1\n");
    CHECK(commented.length() == 2);
    CHECK(commented.requests[1] == real_page(1, 1));

    CHECK_THROWS(parse_trace(""));
    CHECK_THROWS(parse_trace("3 1\n1 0\n"));         // reserve count mismatch
    CHECK_THROWS(parse_trace("3 1 1\n0 0\n"));       // agent out of range
    CHECK_THROWS(parse_trace("3 1 1\n1 0 extra\n"));  // trailing token
}

TEST_CASE("reserve cache starts full of dummies and enforces post-state feasibility") {
    ReserveConfig cfg{4, {1, 2}};
    ReserveCacheState state(cfg);
    CHECK(state.pages().size() == 4);
    CHECK(state.contains(dummy_page(1, 0)));
    CHECK(state.contains(dummy_page(2, 0)));
    CHECK(state.contains(dummy_page(2, 1)));
    CHECK(state.contains(dummy_page(0, 0)));

    // Swapping an agent's only reserve page for another page of the same
    // agent is legal; handing the slot to another agent is not.
    CHECK(state.can_evict(dummy_page(1, 0), 1));
    CHECK_FALSE(state.can_evict(dummy_page(1, 0), 2));
    CHECK(state.can_evict(dummy_page(0, 0), 1));
    CHECK(state.can_evict(dummy_page(0, 0), 2));

    state.replace(dummy_page(1, 0), real_page(1, 7));
    CHECK(state.contains(real_page(1, 7)));
    CHECK(state.agent_count(1) == 1);
    CHECK_THROWS(state.replace(real_page(1, 7), real_page(2, 0)));
    CHECK_THROWS(state.replace(dummy_page(1, 0), real_page(1, 8)));  // absent victim
    state.check_invariants();
}

TEST_CASE("reserve-aware LRU, frozen runs") {
    // k=3, one agent with reserve 1: both fillers go first, then the agent
    // dummy, and the working set fits.
    Trace t = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 0}, {1, 1}, {1, 2}});
    RunResult r = run_lru(t);
    CHECK(r.ledger.misses == 3);
    CHECK(r.ledger.evictions_total == 3);
    CHECK(r.ledger.evictions_dummy == 3);
    CHECK(r.ledger.evictions_real == 0);
    REQUIRE(!r.steps.empty());
    CHECK(r.steps[0].evicted == dummy_page(0, 0));
    CHECK(r.steps[1].evicted == dummy_page(0, 1));
    CHECK(r.steps[2].evicted == dummy_page(1, 0));

    // Four distinct pages through three slots: LRU churns.
    Trace t5 = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    RunResult r5 = run_lru(t5);
    CHECK(r5.ledger.misses == 6);
    CHECK(r5.ledger.evictions_real == 3);
    CHECK(r5.ledger.evictions_dummy == 3);
}

TEST_CASE("schedule replay reproduces a run and rejects tampering") {
    Trace t = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    RunResult r = run_lru(t);
    RunResult replayed = replay_reserves_schedule(t, r.schedule);
    CHECK(replayed.ledger.misses == r.ledger.misses);
    CHECK(replayed.ledger.evictions_real == r.ledger.evictions_real);

    auto broken = r.schedule;
    broken[0].evict = real_page(1, 9);  // not cached
    CHECK_THROWS(replay_reserves_schedule(t, broken));
    auto truncated = r.schedule;
    truncated.pop_back();
    CHECK_THROWS(replay_reserves_schedule(t, truncated));
}

TEST_CASE("replay rejects victims that break a reserve") {
    Trace t = make_trace(2, {1, 0}, {{2, 0}});
    // Agent 1 holds only its dummy; handing that slot to agent 2 must throw.
    VictimFn bad = [](int64_t, const Page&, const ReserveCacheState&) {
        return dummy_page(1, 0);
    };
    CHECK_THROWS(replay_reserves(t, bad));
}

TEST_CASE("next-use times") {
    Trace t = make_trace(2, {0}, {{1, 0}, {1, 1}, {1, 0}, {1, 1}});
    auto nxt = next_use_times(t);
    CHECK(nxt == std::vector<int64_t>{2, 3, RANK_INF, RANK_INF});
    auto first = first_use_times(t);
    CHECK(first[real_page(1, 0)] == 0);
    CHECK(first[real_page(1, 1)] == 1);
}

TEST_CASE("public-private state mechanics") {
    ReserveConfig cfg{3, {1}};
    PublicPrivateState s(cfg);
    s.place(real_page(1, 0), true);
    CHECK(s.private_load(1) == 1);
    CHECK_THROWS(s.place(real_page(1, 1), true));  // private full
    s.place(real_page(1, 1), false);
    s.place(real_page(1, 2), false);
    CHECK(s.public_load() == 2);
    CHECK_THROWS(s.place(real_page(1, 3), false));  // public full
    CHECK_THROWS(s.relocate_to_private(real_page(1, 1)));  // private full
    s.remove(real_page(1, 0));
    s.relocate_to_private(real_page(1, 1));
    CHECK(s.in_private(real_page(1, 1)));
    CHECK(s.public_load() == 1);
    s.check_invariants();
}

TEST_CASE("public-private LRU, frozen run") {
    Trace t5 = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 1}});
    PPRunResult r = run_pp_lru(t5);
    CHECK(r.misses == 6);
    CHECK(r.removals == 3);
    CHECK(r.relocations == 0);

    Trace fits = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 0}, {1, 1}, {1, 2}});
    PPRunResult rf = run_pp_lru(fits);
    CHECK(rf.misses == 3);
    CHECK(rf.removals == 0);
}

TEST_CASE("generators are deterministic and emit valid traces") {
    GenParams gp;
    gp.agents = 3;
    gp.pages_per_agent = 3;
    gp.length = 40;
    for (auto gen : {gen_uniform, gen_zipf, gen_adversarial}) {
        Rng r1(42), r2(42);
        Trace a = gen(gp, r1);
        Trace b = gen(gp, r2);
        CHECK_NOTHROW(a.validate());
        std::ostringstream sa, sb;
        write_trace(sa, a);
        write_trace(sb, b);
        CHECK(sa.str() == sb.str());
    }
    Rng r(7);
    for (int i = 0; i < 50; ++i) {
        Trace t = random_instance(r, RandomInstanceCaps{});
        CHECK_NOTHROW(t.validate());
        CHECK(t.config.reserve_total() < t.config.k);
    }
}
