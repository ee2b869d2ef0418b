#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "rcache/core.hpp"
#include "rcache/fractional.hpp"
#include "rcache/generators.hpp"
#include "rcache/rounding.hpp"
#include "test_util.hpp"

using namespace rcache;
using doctest::Approx;

namespace {

// Replays the sampled ops on top of the initial cache and checks that the
// state is a feasible k-page cache at every step boundary.
void check_sampled_run(const Trace& trace, const RoundingResult& r) {
    std::set<Page> state = fractional_initial_cache(trace);
    const ReserveConfig& cfg = trace.config;
    size_t next = 0;
    for (int64_t t = 0; t < trace.length(); ++t) {
        while (next < r.sampled_ops.size() && r.sampled_ops[next].t == t) {
            const SampledOp& op = r.sampled_ops[next++];
            if (op.evicted) {
                REQUIRE(state.erase(*op.evicted) == 1);
            }
            if (op.fetched) {
                REQUIRE(state.insert(*op.fetched).second);
            }
        }
        REQUIRE(static_cast<int>(state.size()) == cfg.k);
        for (int i = 1; i <= cfg.agent_count(); ++i) {
            int have = 0;
            for (const Page& pg : state) have += (pg.agent == i);
            REQUIRE(have >= cfg.reserve(i));
        }
    }
    REQUIRE(next == r.sampled_ops.size());
}

}  // namespace

TEST_CASE("decompose pairs the fetch against each loss in page order") {
    const Page p = real_page(1, 9);
    const Page q = real_page(1, 2);
    const Page r = real_page(1, 5);
    auto moves = decompose_step(p, 1.0, {{q, 0.6}, {r, 0.4}});
    REQUIRE(moves.size() == 2);
    CHECK(moves[0].gaining == p);
    CHECK(moves[0].losing == q);
    CHECK(moves[0].eps == Approx(0.6));
    CHECK(moves[1].losing == r);
    CHECK(moves[1].eps == Approx(0.4));
}

TEST_CASE("decompose of a hit is empty") {
    CHECK(decompose_step(real_page(1, 0), 0.0, {}).empty());
}

TEST_CASE("decompose rejects unbalanced and self-referencing steps") {
    const Page p = real_page(1, 0);
    const Page q = real_page(1, 1);
    CHECK_THROWS_AS(decompose_step(p, 1.0, {{q, 0.5}}), std::logic_error);
    CHECK_THROWS_AS(decompose_step(p, 0.5, {{p, 0.5}}), std::logic_error);
}

TEST_CASE("half-mass move on a two-state support, closed form") {
    // k=1 with a zero-reserve agent: the only distribution matching the
    // marginals y(a)=1 is the point mass, reached at cost exactly eps.
    ReserveConfig cfg{1, {0}};
    const Page a = real_page(1, 0);
    const Page b = real_page(1, 1);
    Distribution dist(cfg, {{{a}, 0.5}, {{b}, 0.5}}, 100);
    MoveStats ms = dist.apply_move({a, b, 0.5});
    CHECK(ms.cost == Approx(0.5).epsilon(1e-12));
    REQUIRE(dist.support().size() == 1);
    CHECK(dist.support().begin()->first == std::vector<Page>{a});
    CHECK(dist.support().begin()->second == Approx(1.0).epsilon(1e-12));
    dist.check_invariants();
}

TEST_CASE("zero-mass move changes nothing") {
    ReserveConfig cfg{1, {0}};
    const Page a = real_page(1, 0);
    const Page b = real_page(1, 1);
    Distribution dist(cfg, {{{a}, 0.5}, {{b}, 0.5}}, 100);
    MoveStats ms = dist.apply_move({a, b, 0.0});
    CHECK(ms.cost == 0.0);
    CHECK(dist.support().size() == 2);
}

TEST_CASE("identical states merge and inputs may arrive unsorted") {
    ReserveConfig cfg{2, {0}};
    const Page a = real_page(1, 0);
    const Page b = real_page(1, 1);
    Distribution dist(cfg, {{{a, b}, 0.5}, {{b, a}, 0.5}}, 100);
    CHECK(dist.support().size() == 1);
    CHECK(dist.support().begin()->second == Approx(1.0));
    CHECK(dist.marginal(a) == Approx(1.0));
}

TEST_CASE("explicit supports are validated") {
    const Page a = real_page(1, 0);
    const Page b = real_page(1, 1);
    const Page c = real_page(2, 0);
    const Page d = real_page(2, 1);
    // wrong size
    CHECK_THROWS_AS(Distribution(ReserveConfig{2, {0}}, {{{a}, 1.0}}, 100), std::logic_error);
    // probabilities sum to 1.5
    CHECK_THROWS_AS(Distribution(ReserveConfig{2, {0}}, {{{a, b}, 1.5}}, 100), std::logic_error);
    // agent 1 owes one reserved slot but the state holds only agent-2 pages
    CHECK_THROWS_AS(Distribution(ReserveConfig{2, {1, 0}}, {{{c, d}, 1.0}}, 100),
                    std::logic_error);
}

TEST_CASE("deterministic alternation stays a point mass with zero randomness") {
    // k=1 over two pages: each miss moves the full mass, so the sampled run
    // is the fractional run and no random bits are drawn.
    Trace t = make_trace(1, {0}, {{1, 0}, {1, 1}, {1, 0}, {1, 1}});
    FractionalResult fr = run_fractional(t);
    RoundingResult r = run_rounding(t, fr, {});
    CHECK(r.rng_draws == 0);
    CHECK(r.sampled.misses == 3);
    CHECK(r.sampled.evictions_total == 3);
    CHECK(r.expected_misses == Approx(3.0).epsilon(1e-9));
    CHECK(r.expected_cost == Approx(3.0).epsilon(1e-9));
    for (const auto& st : r.steps) CHECK(st.support == 1);
    check_sampled_run(t, r);
}

TEST_CASE("universe equal to the cache never moves and never pays") {
    Trace t = make_trace(2, {1}, {{1, 0}, {1, 1}, {1, 0}, {1, 1}});
    FractionalResult fr = run_fractional(t);
    RoundingResult r = run_rounding(t, fr, {});
    CHECK(r.moves.empty());
    CHECK(r.expected_cost == Approx(0.0));
    CHECK(r.sampled.misses == 0);
    CHECK(r.rng_draws == 0);
}

TEST_CASE("single fractional eviction spreads into a two-state support") {
    // k=2, pages {0,1,2} of a zero-reserve agent; requesting page 2 grows
    // both cached pages to x = 1/2, so the distribution must hold two states
    // of probability 1/2 each and pay exactly the evicted mass.
    Trace t = make_trace(2, {0}, {{1, 0}, {1, 1}, {1, 2}});
    FractionalResult fr = run_fractional(t);
    RoundingResult r = run_rounding(t, fr, {});
    CHECK(r.steps[2].expected_cost == Approx(1.0).epsilon(1e-9));
    CHECK(r.steps[2].expected_miss == Approx(1.0).epsilon(1e-9));
    REQUIRE(r.final_support.size() == 2);
    for (const auto& [state, mass] : r.final_support) {
        CHECK(mass == Approx(0.5).epsilon(1e-9));
        CHECK(state.size() == 2);
        CHECK(std::binary_search(state.begin(), state.end(), real_page(1, 2)));
    }
    check_sampled_run(t, r);
}

TEST_CASE("random instances: per-move bookkeeping, marginals, feasibility") {
    Rng rng(20260816);
    RandomInstanceCaps caps{3, 4, 8, 20};
    for (int it = 0; it < 30; ++it) {
        Trace t = random_fractional_instance(rng, caps);
        FractionalResult fr = run_fractional(t);
        // run_rounding itself enforces marginal consistency (1e-7), support
        // feasibility, per-move cost <= 4 eps, per-step cost <= 4x the
        // fractional step, and the support growth bound; a throw fails here.
        RoundingResult r = run_rounding(t, fr, {uint64_t(it), 50000, true});
        double cost = 0.0;
        for (const MoveStats& ms : r.moves) {
            CHECK(ms.eps1 <= ms.eps + 1e-9);
            CHECK(ms.eps2 <= ms.eps + 1e-9);
            CHECK(ms.eps3 <= ms.eps1 + 1e-9);
            CHECK(ms.cost <= 4.0 * ms.eps + 1e-9);
            cost += ms.cost;
        }
        CHECK(cost == Approx(r.expected_cost).epsilon(1e-9));
        CHECK(r.expected_cost <= 4.0 * fr.total_cost + 1e-6);
        check_sampled_run(t, r);

        // Final marginals match the fractional in-cache fractions.
        std::map<Page, double> marg;
        for (const auto& [state, mass] : r.final_support) {
            for (const Page& pg : state) marg[pg] += mass;
        }
        for (const auto& [pg, hist] : fr.x_history) {
            double want = 1.0 - hist.back();
            double got = marg.count(pg) ? marg[pg] : 0.0;
            CHECK(std::abs(got - want) <= 1e-6);
        }
    }
}

TEST_CASE("sampled means converge to the distribution's expectations") {
    Trace t = make_trace(3, {1}, {{1, 0}, {1, 1}, {1, 2}, {1, 3}, {1, 0}, {1, 4},
                                  {1, 2}, {1, 1}, {1, 3}, {1, 0}, {1, 4}, {1, 2}});
    FractionalResult fr = run_fractional(t);
    const int seeds = 400;
    double miss_sum = 0.0, miss_sq = 0.0;
    double ev_sum = 0.0, ev_sq = 0.0;
    double expected_misses = 0.0, expected_cost = 0.0;
    for (int s = 0; s < seeds; ++s) {
        RoundingResult r = run_rounding(t, fr, {uint64_t(s), 50000, true});
        expected_misses = r.expected_misses;
        expected_cost = r.expected_cost;
        miss_sum += r.sampled.misses;
        miss_sq += double(r.sampled.misses) * r.sampled.misses;
        ev_sum += r.sampled.evictions_total;
        ev_sq += double(r.sampled.evictions_total) * r.sampled.evictions_total;
    }
    auto within3se = [&](double sum, double sq, double want) {
        const double mean = sum / seeds;
        const double var = std::max(0.0, (sq - seeds * mean * mean) / (seeds - 1));
        const double se = std::sqrt(var / seeds);
        CHECK(std::abs(mean - want) <= 3.0 * se + 1e-9);
    };
    within3se(miss_sum, miss_sq, expected_misses);
    within3se(ev_sum, ev_sq, expected_cost);
}

TEST_CASE("rounding rejects transcripts from a different trace") {
    Trace t = make_trace(2, {0}, {{1, 0}, {1, 1}, {1, 2}});
    Trace other = make_trace(2, {0}, {{1, 0}, {1, 1}});
    FractionalResult fr = run_fractional(t);
    CHECK_THROWS_AS(run_rounding(other, fr, {}), std::invalid_argument);
}
