#include "rcache/oracle.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rcache {

OracleLimits OracleLimits::from_env() {
    OracleLimits lim;
    const char* env = std::getenv("RCACHE_ORACLE_LIMITS");
    if (env != nullptr && *env != '\0') {
        std::istringstream in(env);
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(in >> lim.max_pages >> c1 >> lim.max_agents >> c2 >> lim.max_k >> c3 >> lim.max_t) ||
            c1 != ',' || c2 != ',' || c3 != ',')
            throw std::runtime_error("RCACHE_ORACLE_LIMITS must be 'pages,agents,k,T'");
    }
    return lim;
}

void OracleLimits::check(const Trace& trace) const {
    if (trace.universe_size() > max_pages)
        throw std::runtime_error("oracle limit: " + std::to_string(trace.universe_size()) +
                                 " distinct pages > " + std::to_string(max_pages));
    if (trace.config.agent_count() > max_agents)
        throw std::runtime_error("oracle limit: " + std::to_string(trace.config.agent_count()) +
                                 " agents > " + std::to_string(max_agents));
    if (trace.config.k > max_k)
        throw std::runtime_error("oracle limit: k=" + std::to_string(trace.config.k) + " > " +
                                 std::to_string(max_k));
    if (trace.length() > max_t)
        throw std::runtime_error("oracle limit: T=" + std::to_string(trace.length()) + " > " +
                                 std::to_string(max_t));
}

namespace {

constexpr int64_t COST_INF = std::numeric_limits<int64_t>::max() / 4;

int32_t page_code(const Page& p) {
    // Oracle traces are small; locals fit comfortably.
    return p.agent * 1000000 + p.local_id;
}

// Canonical reserves-model state: sorted real pages plus per-agent dummy
// counts (index 0 = fillers). Dummies of one agent are interchangeable.
struct CrState {
    std::vector<Page> reals;   // sorted
    std::vector<int> dummies;  // size m+1

    bool contains(const Page& p) const {
        return std::binary_search(reals.begin(), reals.end(), p);
    }
    int agent_total(int agent) const {
        int total = agent >= 0 && agent < static_cast<int>(dummies.size()) ? dummies[agent] : 0;
        for (const Page& q : reals)
            if (q.agent == agent) ++total;
        return total;
    }
};

struct CrCandidate {
    bool is_dummy = false;
    int dummy_agent = 0;  // when is_dummy
    Page real;            // when !is_dummy
};

class CrSolver {
public:
    CrSolver(const Trace& trace) : trace_(trace), cfg_(trace.config) {
        for (int64_t t = 0; t < trace.length(); ++t) occ_[trace.requests[t]].push_back(t);
    }

    OracleResult run() {
        CrState initial;
        initial.dummies.resize(cfg_.agent_count() + 1, 0);
        initial.dummies[0] = cfg_.public_slots();
        for (int a = 1; a <= cfg_.agent_count(); ++a) initial.dummies[a] = cfg_.reserve(a);

        OracleResult result;
        result.misses = value(0, initial);
        result.states_explored = nodes_;

        // Witness replay: at each miss take the first candidate (in the fixed
        // order) whose child achieves the memoized optimum.
        CrState state = initial;
        std::vector<int> dummy_top = initial.dummies;  // next dummy index to evict, top-down
        for (int64_t t = 0; t < trace_.length(); ++t) {
            const Page& p = trace_.requests[t];
            if (state.contains(p)) continue;
            int64_t want = value(t, state);
            current_t_ = t;
            std::vector<CrCandidate> cands = candidates(state, p);
            bool found = false;
            for (const CrCandidate& cand : cands) {
                CrState child = apply(state, cand, p);
                if (1 + value(t + 1, child) == want) {
                    Page victim;
                    if (cand.is_dummy) {
                        victim = dummy_page(cand.dummy_agent, dummy_top[cand.dummy_agent] - 1);
                        dummy_top[cand.dummy_agent] -= 1;
                    } else {
                        victim = cand.real;
                    }
                    result.schedule.push_back(ScheduleEntry{t, victim, p});
                    state = child;
                    found = true;
                    break;
                }
            }
            if (!found) throw std::runtime_error("oracle witness replay lost the optimal path");
        }
        return result;
    }

private:
    const Trace& trace_;
    const ReserveConfig& cfg_;
    std::map<Page, std::vector<int64_t>> occ_;
    std::map<std::vector<int32_t>, int64_t> memo_;
    int64_t nodes_ = 0;

    int64_t next_occurrence(const Page& q, int64_t after) const {
        auto it = occ_.find(q);
        if (it == occ_.end()) return RANK_INF;
        auto jt = std::upper_bound(it->second.begin(), it->second.end(), after);
        return jt == it->second.end() ? RANK_INF : *jt;
    }

    std::vector<int32_t> encode(int64_t t, const CrState& s) const {
        std::vector<int32_t> key;
        key.reserve(2 + s.dummies.size() + s.reals.size());
        key.push_back(static_cast<int32_t>(t));
        for (int d : s.dummies) key.push_back(d);
        key.push_back(-1);
        for (const Page& q : s.reals) key.push_back(page_code(q));
        return key;
    }

    // Candidate victims in deterministic order: the filler dummy alone when
    // one exists (it dominates everything else); otherwise feasible agent
    // dummies by agent, then feasible real pages farthest-in-future first.
    // An agent's dummy dominates that agent's real pages, which are skipped.
    std::vector<CrCandidate> candidates(const CrState& s, const Page& incoming) const {
        std::vector<CrCandidate> cands;
        if (s.dummies[0] > 0) {
            cands.push_back(CrCandidate{true, 0, Page{}});
            return cands;
        }
        std::vector<int> totals(cfg_.agent_count() + 1, 0);
        for (size_t a = 0; a < s.dummies.size(); ++a) totals[a] = s.dummies[a];
        for (const Page& q : s.reals) totals[q.agent] += 1;
        auto feasible = [&](int agent) {
            return totals[agent] - 1 + (agent == incoming.agent ? 1 : 0) >= cfg_.reserve(agent);
        };
        for (int a = 1; a <= cfg_.agent_count(); ++a) {
            if (s.dummies[a] > 0 && feasible(a)) cands.push_back(CrCandidate{true, a, Page{}});
        }
        std::vector<Page> reals;
        for (const Page& q : s.reals) {
            if (s.dummies[q.agent] > 0) continue;  // dominated by the dummy
            if (!feasible(q.agent)) continue;
            reals.push_back(q);
        }
        std::sort(reals.begin(), reals.end(), [&](const Page& a, const Page& b) {
            int64_t na = next_occurrence(a, current_t_);
            int64_t nb = next_occurrence(b, current_t_);
            if (na != nb) return na > nb;
            return a < b;
        });
        for (const Page& q : reals) cands.push_back(CrCandidate{false, 0, q});
        return cands;
    }

    CrState apply(const CrState& s, const CrCandidate& cand, const Page& incoming) const {
        CrState child = s;
        if (cand.is_dummy) {
            child.dummies[cand.dummy_agent] -= 1;
        } else {
            child.reals.erase(std::find(child.reals.begin(), child.reals.end(), cand.real));
        }
        child.reals.insert(std::upper_bound(child.reals.begin(), child.reals.end(), incoming),
                           incoming);
        return child;
    }

    int64_t value(int64_t t, const CrState& s) {
        if (t == trace_.length()) return 0;
        const Page& p = trace_.requests[t];
        std::vector<int32_t> key = encode(t, s);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        ++nodes_;
        int64_t best;
        if (s.contains(p)) {
            best = value(t + 1, s);
        } else {
            best = COST_INF;
            current_t_ = t;
            for (const CrCandidate& cand : candidates(s, p)) {
                CrState child = apply(s, cand, p);
                best = std::min(best, 1 + value(t + 1, child));
            }
        }
        memo_[key] = best;
        return best;
    }

    mutable int64_t current_t_ = 0;
};

}  // namespace

OracleResult solve_reserves_opt(const Trace& trace, const OracleLimits& limits) {
    trace.validate();
    limits.check(trace);
    CrSolver solver(trace);
    return solver.run();
}

namespace {

// Public-private state: public set plus per-agent private sets, all sorted.
struct PpState {
    std::vector<Page> pub;
    std::vector<std::vector<Page>> priv;  // index agent-1

    friend auto operator<=>(const PpState&, const PpState&) = default;

    bool contains(const Page& p) const {
        if (std::binary_search(pub.begin(), pub.end(), p)) return true;
        int a = p.agent;
        if (a < 1 || a > static_cast<int>(priv.size())) return false;
        return std::binary_search(priv[a - 1].begin(), priv[a - 1].end(), p);
    }
};

void sorted_insert(std::vector<Page>& v, const Page& p) {
    v.insert(std::upper_bound(v.begin(), v.end(), p), p);
}

bool sorted_erase(std::vector<Page>& v, const Page& p) {
    auto it = std::lower_bound(v.begin(), v.end(), p);
    if (it == v.end() || *it != p) return false;
    v.erase(it);
    return true;
}

class PpSolver {
public:
    PpSolver(const Trace& trace, bool minimize_misses)
        : trace_(trace), cfg_(trace.config), minimize_misses_(minimize_misses) {}

    int64_t run(int64_t* nodes_out) {
        PpState initial;
        initial.priv.resize(cfg_.agent_count());
        int64_t v = value(0, initial);
        if (nodes_out) *nodes_out = nodes_;
        return v;
    }

    // Walks an eviction-minimizing play, collecting one action per miss and
    // returning the misses along it. Ties between equally good children
    // prefer slot-reuse actions, so the witness mirrors into the reserves
    // model without abandoning private slots.
    int64_t witness(std::vector<PPAction>* actions_out) {
        PpState state;
        state.priv.resize(cfg_.agent_count());
        int64_t misses = 0;
        for (int64_t t = 0; t < trace_.length(); ++t) {
            const Page& p = trace_.requests[t];
            if (state.contains(p)) continue;
            misses += 1;
            int64_t want = value(t, state);
            std::map<PpState, PpChild> kids = children_map(state, p);
            const PpState* best_state = nullptr;
            const PpChild* best = nullptr;
            for (const auto& [child, info] : kids) {
                if (step_cost(info.cost) + value(t + 1, child) != want) continue;
                if (!best || (info.slot_reuse && !best->slot_reuse)) {
                    best_state = &child;
                    best = &info;
                    if (best->slot_reuse) break;
                }
            }
            if (!best) throw std::runtime_error("pp oracle witness replay lost the optimal path");
            if (actions_out) actions_out->push_back(best->action);
            state = *best_state;
        }
        return misses;
    }

private:
    const Trace& trace_;
    const ReserveConfig& cfg_;
    bool minimize_misses_;
    std::map<std::vector<int32_t>, int64_t> memo_;
    int64_t nodes_ = 0;

    int64_t step_cost(int64_t action_cost) const { return minimize_misses_ ? 1 : action_cost; }

    std::vector<int32_t> encode(int64_t t, const PpState& s) const {
        std::vector<int32_t> key;
        key.push_back(static_cast<int32_t>(t));
        for (const Page& q : s.pub) key.push_back(page_code(q));
        for (const auto& set : s.priv) {
            key.push_back(-1);
            for (const Page& q : set) key.push_back(page_code(q));
        }
        return key;
    }

    struct PpChild {
        int64_t cost = 0;
        PPAction action;
        // True when the action does not abandon a freed private slot: it
        // either evicts nothing, evicts a public page, or refills the emptied
        // private slot with the placed page or a relocation. Such actions can
        // be mirrored one-to-one into the reserves model.
        bool slot_reuse = false;
    };

    // All distinct post-states of serving a missed page p, each with the
    // cheapest action cost (evictions + relocations) that reaches it. Ties
    // prefer slot-reuse actions.
    std::map<PpState, PpChild> children_map(const PpState& s, const Page& p) const {
        std::map<PpState, PpChild> out;
        auto offer = [&](const PpState& child, const PpChild& info) {
            auto [it, inserted] = out.emplace(child, info);
            if (inserted) return;
            if (info.cost < it->second.cost ||
                (info.cost == it->second.cost && info.slot_reuse && !it->second.slot_reuse))
                it->second = info;
        };
        std::vector<std::optional<Page>> evict_options = {std::nullopt};
        for (const Page& q : s.pub) evict_options.emplace_back(q);
        for (const auto& set : s.priv)
            for (const Page& q : set) evict_options.emplace_back(q);

        for (const auto& ev : evict_options) {
            PpState s1 = s;
            int64_t cost1 = 0;
            bool evicted_private = false;
            if (ev) {
                if (!sorted_erase(s1.pub, *ev)) {
                    sorted_erase(s1.priv[ev->agent - 1], *ev);
                    evicted_private = true;
                }
                cost1 = 1;
            }
            std::vector<std::optional<Page>> reloc_options = {std::nullopt};
            for (const Page& r : s1.pub) {
                if (r.agent >= 1 &&
                    static_cast<int>(s1.priv[r.agent - 1].size()) < cfg_.reserve(r.agent))
                    reloc_options.emplace_back(r);
            }
            for (const auto& rel : reloc_options) {
                PpState s2 = s1;
                int64_t cost2 = cost1;
                if (rel) {
                    sorted_erase(s2.pub, *rel);
                    sorted_insert(s2.priv[rel->agent - 1], *rel);
                    cost2 += 1;
                }
                auto child_info = [&](bool place_private) {
                    PpChild info;
                    info.cost = cost2;
                    info.action.evict = ev;
                    info.action.relocate = rel;
                    info.action.place_private = place_private;
                    info.slot_reuse =
                        !evicted_private ||
                        (place_private && p.agent == ev->agent) ||
                        (rel && rel->agent == ev->agent);
                    return info;
                };
                if (static_cast<int>(s2.priv[p.agent - 1].size()) < cfg_.reserve(p.agent)) {
                    PpState child = s2;
                    sorted_insert(child.priv[p.agent - 1], p);
                    offer(child, child_info(true));
                }
                if (static_cast<int>(s2.pub.size()) < cfg_.public_slots()) {
                    PpState child = s2;
                    sorted_insert(child.pub, p);
                    offer(child, child_info(false));
                }
            }
        }
        return out;
    }

    int64_t value(int64_t t, const PpState& s) {
        if (t == trace_.length()) return 0;
        const Page& p = trace_.requests[t];
        std::vector<int32_t> key = encode(t, s);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        ++nodes_;
        int64_t best;
        if (s.contains(p)) {
            best = value(t + 1, s);
        } else {
            best = COST_INF;
            for (const auto& [child, info] : children_map(s, p)) {
                best = std::min(best, step_cost(info.cost) + value(t + 1, child));
            }
        }
        memo_[key] = best;
        return best;
    }
};

}  // namespace

PPOracleResult solve_pp_opt(const Trace& trace, const OracleLimits& limits) {
    trace.validate();
    limits.check(trace);
    PPOracleResult result;
    PpSolver ev_solver(trace, false);
    result.evictions = ev_solver.run(&result.states_explored);
    result.misses = ev_solver.witness(&result.witness_actions);
    PpSolver miss_solver(trace, true);
    int64_t nodes2 = 0;
    result.min_misses = miss_solver.run(&nodes2);
    result.states_explored += nodes2;
    return result;
}

}  // namespace rcache
