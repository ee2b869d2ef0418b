#include "rcache/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace rcache {

namespace {

// Residues below this fold into the transfer that exposed them, so support
// entries never carry sub-representable probability slivers.
constexpr double kTinyMass = 1e-15;
// Tolerated shortfall of a selection pool; anything larger means the
// marginals upstream are broken, not floating-point dust.
constexpr double kSelectSlack = 1e-9;
constexpr size_t kPhaseIterationCap = 100000;

bool has_page(const std::vector<Page>& state, const Page& p) {
    return std::binary_search(state.begin(), state.end(), p);
}

std::vector<Page> without_page(const std::vector<Page>& state, const Page& q) {
    std::vector<Page> out;
    out.reserve(state.size());
    for (const Page& pg : state)
        if (pg != q) out.push_back(pg);
    if (out.size() != state.size() - 1) {
        throw std::logic_error("rounding: removing a page the state does not hold");
    }
    return out;
}

std::vector<Page> with_page(const std::vector<Page>& state, const Page& p) {
    std::vector<Page> out;
    out.reserve(state.size() + 1);
    auto it = std::lower_bound(state.begin(), state.end(), p);
    if (it != state.end() && *it == p) {
        throw std::logic_error("rounding: inserting a page the state already holds");
    }
    out.insert(out.end(), state.begin(), it);
    out.push_back(p);
    out.insert(out.end(), it, state.end());
    return out;
}

int agent_pages(const std::vector<Page>& state, int agent) {
    int c = 0;
    for (const Page& pg : state) c += (pg.agent == agent);
    return c;
}

}  // namespace

std::vector<ElementaryMove> decompose_step(const Page& fetched, double fetch_amount,
                                           const std::vector<std::pair<Page, double>>& losses) {
    std::vector<ElementaryMove> moves;
    double total = 0.0;
    for (const auto& [page, delta] : losses) {
        if (page == fetched) {
            throw std::logic_error("rounding: the requested page appears among the losses");
        }
        if (delta <= 0.0) continue;
        total += delta;
        moves.push_back({fetched, page, delta});
    }
    if (std::abs(total - fetch_amount) > 1e-9) {
        throw std::logic_error("rounding: step mass not conserved: fetched " +
                               std::to_string(fetch_amount) + " but lost " + std::to_string(total));
    }
    return moves;
}

Distribution::Distribution(const Trace& trace, size_t support_cap)
    : cfg_(trace.config), support_cap_(support_cap) {
    trace.validate();
    std::set<Page> seen(trace.requests.begin(), trace.requests.end());
    universe_.assign(seen.begin(), seen.end());
    std::set<Page> init = fractional_initial_cache(trace);
    support_.emplace(std::vector<Page>(init.begin(), init.end()), 1.0);
}

Distribution::Distribution(const ReserveConfig& cfg,
                           std::vector<std::pair<std::vector<Page>, double>> states,
                           size_t support_cap)
    : cfg_(cfg), support_cap_(support_cap) {
    cfg_.validate();
    std::set<Page> seen;
    for (auto& [state, mass] : states) {
        std::sort(state.begin(), state.end());
        seen.insert(state.begin(), state.end());
        support_[state] += mass;
    }
    universe_.assign(seen.begin(), seen.end());
    check_invariants();
}

std::map<Page, double> Distribution::marginals() const {
    std::map<Page, double> out;
    for (const auto& [state, mass] : support_) {
        for (const Page& pg : state) out[pg] += mass;
    }
    return out;
}

double Distribution::marginal(const Page& p) const {
    double v = 0.0;
    for (const auto& [state, mass] : support_) {
        if (has_page(state, p)) v += mass;
    }
    return v;
}

double Distribution::entropy() const {
    double h = 0.0;
    for (const auto& [state, mass] : support_) {
        if (mass > 0.0) h -= mass * std::log(mass);
    }
    return h;
}

void Distribution::check_invariants() const {
    double total = 0.0;
    for (const auto& [state, mass] : support_) {
        if (mass <= 0.0 || mass > 1.0 + 1e-9) {
            throw std::logic_error("rounding: state probability " + std::to_string(mass) +
                                   " out of range");
        }
        if (static_cast<int>(state.size()) != cfg_.k) {
            throw std::logic_error("rounding: support state holds " +
                                   std::to_string(state.size()) + " pages instead of " +
                                   std::to_string(cfg_.k));
        }
        if (deficit_agent(state) != 0) {
            throw std::logic_error("rounding: support state breaks a reserve");
        }
        total += mass;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::logic_error("rounding: probabilities sum to " + std::to_string(total));
    }
}

int Distribution::deficit_agent(const std::vector<Page>& state) const {
    int deficit = 0;
    for (int i = 1; i <= cfg_.agent_count(); ++i) {
        if (cfg_.reserve(i) == 0) continue;
        if (agent_pages(state, i) < cfg_.reserve(i)) {
            if (deficit != 0) {
                throw std::logic_error("rounding: state violates two reserves at once");
            }
            deficit = i;
        }
    }
    return deficit;
}

double Distribution::shift(const std::vector<Page>& from, std::vector<Page> to, double delta) {
    auto it = support_.find(from);
    if (it == support_.end()) {
        throw std::logic_error("rounding: transfer source is not in the support");
    }
    const double avail = it->second;
    if (delta > avail + kSelectSlack) {
        throw std::logic_error("rounding: transfer of " + std::to_string(delta) +
                               " exceeds the source's " + std::to_string(avail));
    }
    if (delta > avail || avail - delta <= kTinyMass) delta = avail;
    int evicted = 0;
    for (const Page& pg : from) {
        if (!has_page(to, pg)) ++evicted;
    }
    if (hook_) hook_({it->first, to, delta, avail, evicted});
    move_cost_ += delta * evicted;
    it->second -= delta;
    if (it->second <= 0.0) support_.erase(it);
    support_[std::move(to)] += delta;
    return delta;
}

std::vector<Distribution::Pick> Distribution::select(
    double want, const std::vector<std::function<bool(const std::vector<Page>&)>>& classes,
    const char* stage) const {
    std::vector<Pick> picks;
    for (const auto& pred : classes) {
        if (want <= kTinyMass) break;
        std::vector<std::pair<double, const std::vector<Page>*>> pool;
        for (const auto& [state, mass] : support_) {
            if (pred(state)) pool.emplace_back(mass, &state);
        }
        std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return *a.second < *b.second;
        });
        for (const auto& [mass, state] : pool) {
            if (want <= kTinyMass) break;
            const double take = std::min(mass, want);
            picks.push_back({*state, take});
            want -= take;
        }
    }
    if (want > kSelectSlack) {
        throw std::logic_error(std::string("rounding: matching infeasible while ") + stage);
    }
    return picks;
}

// Stage one, eviction half: take the move's mass away from states holding the
// losing page. States whose loss keeps the page's agent at or above its
// reserve go first, and states lacking the gaining page are preferred so the
// insertion half can reuse them; forced selections record the violated mass.
double Distribution::phase_evict(const ElementaryMove& move, double* forced_deficit) {
    const Page q = move.losing;
    const Page p = move.gaining;
    const int floor = cfg_.reserve(q.agent);
    auto spare = [&](const std::vector<Page>& s) { return agent_pages(s, q.agent) > floor; };
    std::vector<std::function<bool(const std::vector<Page>&)>> classes = {
        [&](const std::vector<Page>& s) { return has_page(s, q) && spare(s) && !has_page(s, p); },
        [&](const std::vector<Page>& s) { return has_page(s, q) && spare(s) && has_page(s, p); },
        [&](const std::vector<Page>& s) { return has_page(s, q) && !spare(s) && !has_page(s, p); },
        [&](const std::vector<Page>& s) { return has_page(s, q) && !spare(s) && has_page(s, p); },
    };
    double total = 0.0;
    for (const Pick& pick : select(move.eps, classes, "evicting the losing page")) {
        const bool forced = !spare(pick.state);
        const double got = shift(pick.state, without_page(pick.state, q), pick.take);
        total += got;
        if (forced) *forced_deficit += got;
    }
    return total;
}

// Stage one, insertion half: hand the same mass to states lacking the gained
// page. Shrunken states whose violated reserve the page repairs come first,
// then clean shrunken states, then full states (which overflow to k+1 pages
// and are paired up again below); shrunken states stuck with a foreign
// violation are a last resort. Returns the mass that landed on full states.
double Distribution::phase_insert(const Page& p, double want) {
    const int k = cfg_.k;
    auto size_of = [](const std::vector<Page>& s) { return static_cast<int>(s.size()); };
    std::vector<std::function<bool(const std::vector<Page>&)>> classes = {
        [&](const std::vector<Page>& s) {
            return !has_page(s, p) && size_of(s) == k - 1 && deficit_agent(s) == p.agent;
        },
        [&](const std::vector<Page>& s) {
            return !has_page(s, p) && size_of(s) == k - 1 && deficit_agent(s) == 0;
        },
        [&](const std::vector<Page>& s) { return !has_page(s, p) && size_of(s) == k; },
        [&](const std::vector<Page>& s) {
            const int d = deficit_agent(s);
            return !has_page(s, p) && size_of(s) == k - 1 && d != 0 && d != p.agent;
        },
    };
    double onto_full = 0.0;
    for (const Pick& pick : select(want, classes, "inserting the fetched page")) {
        const bool full = size_of(pick.state) == k;
        const double got = shift(pick.state, with_page(pick.state, p), pick.take);
        if (full) onto_full += got;
    }
    return onto_full;
}

// Reserve repairs that can ride a size repair: a shrunken state below some
// agent's reserve receives one page of that agent from a feasible donor with
// spare pages of the agent. Oversized donors are preferred because giving a
// page fixes them too; either way the transfer costs one eviction. A state
// with no donor right now is deferred, not an error: the size repairs lift it
// to full size and the swap stage finishes the job.
void Distribution::phase_repair_short() {
    const int k = cfg_.k;
    std::set<std::vector<Page>> deferred;
    for (size_t guard = 0;; ++guard) {
        if (guard > kPhaseIterationCap) {
            throw std::logic_error("rounding: reserve repairs did not converge");
        }
        const std::vector<Page>* recv = nullptr;
        double rmass = 0.0;
        for (const auto& [state, mass] : support_) {
            if (static_cast<int>(state.size()) != k - 1 || deficit_agent(state) == 0) continue;
            if (deferred.count(state) != 0) continue;
            if (!recv || mass > rmass || (mass == rmass && state < *recv)) {
                recv = &state;
                rmass = mass;
            }
        }
        if (!recv) return;
        const std::vector<Page> state = *recv;
        const int j = deficit_agent(state);

        const std::vector<Page>* donor = nullptr;
        double dmass = 0.0;
        int dsize = 0;
        for (const auto& [cand, mass] : support_) {
            const int size = static_cast<int>(cand.size());
            if (size != k && size != k + 1) continue;
            if (deficit_agent(cand) != 0 || agent_pages(cand, j) <= cfg_.reserve(j)) continue;
            bool better = false;
            if (!donor) {
                better = true;
            } else if (size != dsize) {
                better = size == k + 1;
            } else if (mass != dmass) {
                better = mass > dmass;
            } else {
                better = cand < *donor;
            }
            if (better) {
                donor = &cand;
                dmass = mass;
                dsize = size;
            }
        }
        if (!donor) {
            deferred.insert(state);
            continue;
        }
        const std::vector<Page> giver = *donor;
        Page moved{};
        bool found = false;
        for (const Page& pg : giver) {
            if (pg.agent == j && !has_page(state, pg)) {
                moved = pg;
                found = true;
                break;
            }
        }
        if (!found) {
            throw std::logic_error("rounding: reserve donor lacks a movable page");
        }
        const double delta = std::min(rmass, dmass);
        const double got = shift(giver, without_page(giver, moved), delta);
        shift(state, with_page(state, moved), got);
    }
}

// Size repairs: pair shrunken states with oversized ones, moving one page the
// receiver lacks. Pages whose agent has spares in the donor keep the donor
// feasible; when none exists the transfer opens a reserve violation, returned
// as the mass the swap stage must still fix.
double Distribution::phase_balance() {
    const int k = cfg_.k;
    double opened = 0.0;
    for (size_t guard = 0;; ++guard) {
        if (guard > kPhaseIterationCap) {
            throw std::logic_error("rounding: size repairs did not converge");
        }
        const std::vector<Page>* shrt = nullptr;
        const std::vector<Page>* over = nullptr;
        double smass = 0.0;
        double omass = 0.0;
        for (const auto& [state, mass] : support_) {
            const int size = static_cast<int>(state.size());
            if (size == k - 1) {
                if (!shrt || mass > smass || (mass == smass && state < *shrt)) {
                    shrt = &state;
                    smass = mass;
                }
            } else if (size == k + 1) {
                if (!over || mass > omass || (mass == omass && state < *over)) {
                    over = &state;
                    omass = mass;
                }
            } else if (size != k) {
                throw std::logic_error("rounding: support state is off by more than one page");
            }
        }
        if (!shrt && !over) return opened;
        if (!shrt || !over) {
            double stranded = 0.0;
            for (const auto& [state, mass] : support_) {
                if (static_cast<int>(state.size()) != k) stranded += mass;
            }
            if (stranded <= kSelectSlack) return opened;  // swept below
            throw std::logic_error("rounding: size classes out of balance by " +
                                   std::to_string(stranded));
        }
        const std::vector<Page> recv = *shrt;
        const std::vector<Page> giver = *over;
        Page moved{};
        bool found = false;
        bool clean = false;
        for (const Page& pg : giver) {
            if (has_page(recv, pg)) continue;
            if (agent_pages(giver, pg.agent) > cfg_.reserve(pg.agent)) {
                moved = pg;
                found = true;
                clean = true;
                break;
            }
            if (!found) {
                moved = pg;
                found = true;
            }
        }
        if (!found) {
            throw std::logic_error("rounding: size donor lacks a movable page");
        }
        const double delta = std::min(smass, omass);
        const double got = shift(giver, without_page(giver, moved), delta);
        shift(recv, with_page(recv, moved), got);
        if (!clean) opened += got;
    }
}

// Selection pools can run dry a floating-point hair before the wanted mass is
// placed, stranding sub-1e-9 probability at the wrong size. Repair it
// deterministically; anything heavier is a genuine matching failure.
void Distribution::sweep_dust() {
    const int k = cfg_.k;
    std::vector<std::pair<std::vector<Page>, double>> stranded;
    for (const auto& [state, mass] : support_) {
        if (static_cast<int>(state.size()) != k) stranded.emplace_back(state, mass);
    }
    for (const auto& [state, mass] : stranded) {
        if (mass > kSelectSlack) {
            throw std::logic_error("rounding: stranded " + std::to_string(mass) +
                                   " probability at the wrong size");
        }
        if (static_cast<int>(state.size()) == k - 1) {
            Page filler{};
            bool found = false;
            for (const Page& pg : universe_) {
                if (!has_page(state, pg)) {
                    filler = pg;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw std::logic_error("rounding: no page available to refill a state");
            }
            shift(state, with_page(state, filler), mass);
        } else {
            Page spare{};
            bool found = false;
            for (const Page& pg : state) {
                if (agent_pages(state, pg.agent) > cfg_.reserve(pg.agent)) {
                    spare = pg;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw std::logic_error("rounding: no page can leave an oversized state");
            }
            shift(state, without_page(state, spare), mass);
        }
    }
}

// Remaining reserve violations sit on full-size states, so fixing them takes
// a swap: the violated agent's page comes in from a donor with spares, and a
// page of an agent with spares in the receiver goes back. Two evictions per
// unit of mass. Donors accepting a feasibility-preserving return page are
// preferred; a forced infeasible return would cycle, so the iteration cap
// turns it into a hard matching error.
void Distribution::phase_repair_full() {
    const int k = cfg_.k;
    for (size_t guard = 0;; ++guard) {
        if (guard > kPhaseIterationCap) {
            throw std::logic_error("rounding: reserve swaps did not converge");
        }
        const std::vector<Page>* recv = nullptr;
        double rmass = 0.0;
        for (const auto& [state, mass] : support_) {
            if (deficit_agent(state) == 0) continue;
            if (static_cast<int>(state.size()) != k) {
                throw std::logic_error("rounding: a wrong-size state reached the swap stage");
            }
            if (!recv || mass > rmass || (mass == rmass && state < *recv)) {
                recv = &state;
                rmass = mass;
            }
        }
        if (!recv) return;
        const std::vector<Page> state = *recv;
        const int j = deficit_agent(state);

        auto return_page = [&](const std::vector<Page>& donor) -> std::optional<Page> {
            for (const Page& pg : state) {
                if (pg.agent == j || has_page(donor, pg)) continue;
                if (agent_pages(state, pg.agent) > cfg_.reserve(pg.agent)) return pg;
            }
            return std::nullopt;
        };

        const std::vector<Page>* donor = nullptr;
        double dmass = 0.0;
        bool dclean = false;
        for (const auto& [cand, mass] : support_) {
            if (deficit_agent(cand) != 0 || agent_pages(cand, j) <= cfg_.reserve(j)) continue;
            const bool clean = return_page(cand).has_value();
            bool better = false;
            if (!donor) {
                better = true;
            } else if (clean != dclean) {
                better = clean;
            } else if (mass != dmass) {
                better = mass > dmass;
            } else {
                better = cand < *donor;
            }
            if (better) {
                donor = &cand;
                dmass = mass;
                dclean = clean;
            }
        }
        if (!donor) {
            throw std::logic_error("rounding: no donor available for a reserve swap");
        }
        const std::vector<Page> giver = *donor;
        Page incoming{};
        bool found = false;
        for (const Page& pg : giver) {
            if (pg.agent == j && !has_page(state, pg)) {
                incoming = pg;
                found = true;
                break;
            }
        }
        if (!found) {
            throw std::logic_error("rounding: swap donor lacks a movable page");
        }
        Page outgoing{};
        bool outgoing_found = false;
        if (auto rp = return_page(giver)) {
            outgoing = *rp;
            outgoing_found = true;
        } else {
            for (const Page& pg : state) {
                if (pg.agent != j && !has_page(giver, pg)) {
                    outgoing = pg;
                    outgoing_found = true;
                    break;
                }
            }
        }
        if (!outgoing_found) {
            throw std::logic_error("rounding: no page can return in a reserve swap");
        }
        const double delta = std::min(rmass, dmass);
        const double got = shift(giver, with_page(without_page(giver, incoming), outgoing), delta);
        shift(state, with_page(without_page(state, outgoing), incoming), got);
    }
}

MoveStats Distribution::apply_move(const ElementaryMove& move) {
    MoveStats stats;
    stats.eps = move.eps;
    if (move.eps <= 0.0) return stats;
    if (move.gaining == move.losing) {
        throw std::logic_error("rounding: move gains and loses the same page");
    }
    move_cost_ = 0.0;

    const double removed = phase_evict(move, &stats.eps2);
    stats.eps1 = phase_insert(move.gaining, removed);
    phase_repair_short();
    stats.eps3 = phase_balance();
    sweep_dust();
    phase_repair_full();

    stats.cost = move_cost_;
    if (stats.eps1 > stats.eps + 1e-9 || stats.eps2 > stats.eps + 1e-9 ||
        stats.eps3 > stats.eps1 + 1e-9) {
        throw std::logic_error("rounding: phase masses out of bounds");
    }
    if (stats.cost > 4.0 * stats.eps + 1e-9) {
        throw std::logic_error("rounding: move of mass " + std::to_string(stats.eps) +
                               " cost " + std::to_string(stats.cost));
    }
    if (support_.size() > support_cap_) {
        throw std::runtime_error("rounding: support exceeds the cap of " +
                                 std::to_string(support_cap_) + " states");
    }
    return stats;
}

RoundingResult run_rounding(const Trace& trace, const FractionalResult& frac,
                            const RoundingOptions& opts) {
    trace.validate();
    const size_t steps = static_cast<size_t>(trace.length());
    if (frac.lines.size() != steps || frac.step_deltas.size() != steps ||
        frac.fetch_amounts.size() != steps) {
        throw std::invalid_argument("rounding: fractional transcript does not match the trace");
    }

    Distribution dist(trace, opts.support_cap);
    RoundingResult out;

    // Expected in-cache mass per page, tracked move by move alongside the
    // distribution so marginal drift is caught immediately.
    std::map<Page, double> expect;
    for (const Page& pg : trace.requests) expect.emplace(pg, 0.0);
    for (const Page& pg : fractional_initial_cache(trace)) expect[pg] = 1.0;

    Rng rng(opts.seed);
    std::vector<Page> sampled = dist.support().begin()->first;
    int64_t now = 0;
    if (opts.sample) {
        dist.set_hook([&](const MassMoveEvent& ev) {
            if (ev.source != sampled) return;
            bool follow = true;
            if (ev.delta < ev.source_mass) {
                ++out.rng_draws;
                follow = rng.uniform01() < ev.delta / ev.source_mass;
            }
            if (!follow) return;
            SampledOp op;
            op.t = now;
            for (const Page& pg : ev.source) {
                if (!has_page(ev.target, pg)) {
                    op.evicted = pg;
                    out.sampled.evictions_total++;
                    out.sampled.evictions_real++;
                }
            }
            for (const Page& pg : ev.target) {
                if (!has_page(ev.source, pg)) op.fetched = pg;
            }
            out.sampled_ops.push_back(op);
            sampled = ev.target;
        });
    }

    const size_t initial_support = dist.support().size();
    size_t moves_done = 0;
    for (int64_t t = 0; t < trace.length(); ++t) {
        now = t;
        const Page& pt = trace.requests[t];
        const double fetch = frac.fetch_amounts[t];

        RoundingStepStats st;
        st.t = t;
        st.fractional_cost = frac.lines[t].cost;
        st.expected_miss = 1.0 - dist.marginal(pt);
        if (std::abs(st.expected_miss - fetch) > 1e-7) {
            throw std::logic_error("rounding: marginal of the requested page drifted from the "
                                   "fractional value by " +
                                   std::to_string(std::abs(st.expected_miss - fetch)));
        }
        if (opts.sample) {
            st.sampled_miss = !std::binary_search(sampled.begin(), sampled.end(), pt);
            out.sampled.misses += st.sampled_miss ? 1 : 0;
        }

        double step_cost = 0.0;
        for (const ElementaryMove& mv : decompose_step(pt, fetch, frac.step_deltas[t])) {
            const MoveStats ms = dist.apply_move(mv);
            step_cost += ms.cost;
            out.moves.push_back(ms);
            ++moves_done;
            expect[mv.gaining] += mv.eps;
            expect[mv.losing] -= mv.eps;

            const std::map<Page, double> marg = dist.marginals();
            for (const auto& [pg, want] : expect) {
                auto it = marg.find(pg);
                const double got = it == marg.end() ? 0.0 : it->second;
                if (std::abs(got - want) > 1e-7) {
                    throw std::logic_error("rounding: marginal of " + to_string(pg) +
                                           " drifted to " + std::to_string(got) +
                                           " instead of " + std::to_string(want));
                }
            }
            if (dist.support().size() > initial_support + 3 * moves_done) {
                throw std::logic_error("rounding: support grew to " +
                                       std::to_string(dist.support().size()) + " states after " +
                                       std::to_string(moves_done) + " moves");
            }
        }
        if (step_cost > 4.0 * frac.lines[t].cost + 1e-9) {
            throw std::logic_error("rounding: step " + std::to_string(t) + " cost " +
                                   std::to_string(step_cost) + " against fractional " +
                                   std::to_string(frac.lines[t].cost));
        }
        dist.check_invariants();

        st.expected_cost = step_cost;
        st.support = dist.support().size();
        st.entropy = dist.entropy();
        out.steps.push_back(st);
        out.expected_cost += step_cost;
        out.expected_misses += st.expected_miss;
    }
    out.final_support.assign(dist.support().begin(), dist.support().end());
    return out;
}

}  // namespace rcache
