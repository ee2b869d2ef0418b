#include "rcache/offline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace rcache {

namespace {

using RankMap = std::map<Page, int64_t>;

int64_t rank_of(const RankMap& ranks, const Page& p) {
    auto it = ranks.find(p);
    if (it == ranks.end()) throw std::runtime_error("page " + to_string(p) + " has no rank");
    return it->second;
}

// Max-rank selection order: higher rank first, then dummies, then larger
// agent, then larger local id.
bool max_rank_before(const RankMap& ranks, const Page& a, const Page& b) {
    int64_t ra = rank_of(ranks, a), rb = rank_of(ranks, b);
    if (ra != rb) return ra > rb;
    if (a.dummy != b.dummy) return a.dummy;
    if (a.agent != b.agent) return a.agent > b.agent;
    return a.local_id > b.local_id;
}

Page max_rank_page(const RankMap& ranks, const std::set<Page>& set, const Page* exclude = nullptr) {
    const Page* best = nullptr;
    for (const Page& q : set) {
        if (exclude && q == *exclude) continue;
        if (!best || max_rank_before(ranks, q, *best)) best = &q;
    }
    if (!best) throw std::runtime_error("selecting from an empty set");
    return *best;
}

// Second-lowest rank in a set whose unique minimum is `lowest`.
Page second_lowest_rank_page(const RankMap& ranks, const std::set<Page>& set, const Page& lowest) {
    const Page* best = nullptr;
    for (const Page& q : set) {
        if (q == lowest) continue;
        if (!best || max_rank_before(ranks, *best, q)) best = &q;
    }
    if (!best) throw std::runtime_error("set has no second-lowest page");
    return *best;
}

struct Partition {
    std::vector<std::set<Page>> sets;  // index 0..m

    bool contains(const Page& p) const {
        for (const auto& s : sets)
            if (s.count(p)) return true;
        return false;
    }
    int find_set(const Page& p) const {
        for (size_t i = 0; i < sets.size(); ++i)
            if (sets[i].count(p)) return static_cast<int>(i);
        return -1;
    }
};

// phi_i = max(0, max_s [ n_i(s) - n*_i(s) ]) evaluated at the distinct rank
// thresholds present in either set.
int64_t phi_component(const RankMap& ranks, const std::set<Page>& alg, const std::set<Page>& opt) {
    std::set<int64_t> thresholds;
    for (const Page& q : alg) thresholds.insert(rank_of(ranks, q));
    for (const Page& q : opt) thresholds.insert(rank_of(ranks, q));
    int64_t best = 0;
    for (int64_t s : thresholds) {
        int64_t na = 0, nb = 0;
        for (const Page& q : alg)
            if (rank_of(ranks, q) >= s) ++na;
        for (const Page& q : opt)
            if (rank_of(ranks, q) >= s) ++nb;
        best = std::max(best, na - nb);
    }
    return best;
}

int64_t phi_total(const RankMap& ranks, const Partition& alg, const Partition& opt) {
    int64_t total = 0;
    for (size_t i = 0; i < alg.sets.size(); ++i)
        total += phi_component(ranks, alg.sets[i], opt.sets[i]);
    return total;
}

constexpr int64_t PHI_SLACK = INT64_C(1) << 40;  // "no lower bound" sentinel

[[noreturn]] void audit_fail(int64_t t, const std::string& what) {
    throw std::runtime_error("audit failure at t=" + std::to_string(t) + ": " + what);
}

}  // namespace

OfflineResult run_offline(const Trace& trace, const OfflineOptions& options) {
    trace.validate();
    if (options.audit && options.opt_schedule == nullptr)
        throw std::runtime_error("auditing requires an optimal schedule");

    const ReserveConfig& cfg = trace.config;
    const int m = cfg.agent_count();
    std::vector<int64_t> next_use = next_use_times(trace);
    std::map<Page, int64_t> first_use = first_use_times(trace);

    RankMap ranks;
    Partition alg;
    alg.sets.resize(m + 1);
    for (int a = 1; a <= m; ++a) {
        for (int j = 0; j < cfg.reserve(a); ++j) {
            Page d = dummy_page(a, j);
            alg.sets[a].insert(d);
            ranks[d] = RANK_INF;
        }
    }
    for (int j = 0; j < cfg.public_slots(); ++j) {
        Page d = dummy_page(0, j);
        alg.sets[0].insert(d);
        ranks[d] = RANK_INF;
    }
    for (const auto& [page, t] : first_use) ranks[page] = t;

    Partition opt = alg;  // audited runs track the optimum over the same start

    OfflineResult result;
    size_t sched_pos = 0;
    int64_t phi = options.audit ? phi_total(ranks, alg, opt) : 0;

    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page p = trace.requests[t];
        const int i = p.agent;
        const int ki = cfg.reserve(i);

        const bool alg_hit = alg.contains(p);
        const bool opt_hit = options.audit ? opt.contains(p) : false;

        StepRecord rec;
        rec.t = t;
        rec.fetched = p;
        rec.hit = alg_hit;

        if (!options.audit) {
            // Plain Algorithm run, no potential bookkeeping.
            if (alg.sets[i].count(p)) {
                // hit in the reserved set: serve only
            } else if (alg.sets[0].count(p)) {
                alg.sets[0].erase(p);
                alg.sets[i].insert(p);
                Page qi = max_rank_page(ranks, alg.sets[i]);
                alg.sets[i].erase(qi);
                alg.sets[0].insert(qi);
            } else {
                alg.sets[i].insert(p);
                Page qi = max_rank_page(ranks, alg.sets[i]);
                alg.sets[i].erase(qi);
                alg.sets[0].insert(qi);
                Page q = max_rank_page(ranks, alg.sets[0], &p);
                alg.sets[0].erase(q);
                rec.evicted = q;
                result.run.ledger.misses += 1;
                result.run.ledger.evictions_total += 1;
                if (q.dummy)
                    result.run.ledger.evictions_dummy += 1;
                else
                    result.run.ledger.evictions_real += 1;
                result.run.schedule.push_back(ScheduleEntry{t, q, p});
            }
            ranks[p] = next_use[t];
            result.run.steps.push_back(rec);
            continue;
        }

        // Audited run: the same algorithm moves, decomposed into six steps
        // against the optimal schedule, with per-step potential bounds.
        const int64_t phi_request_start = phi;
        int64_t d_alg = 0, d_opt = 0;

        auto phi_step = [&](const char* step, int64_t lo, int64_t hi) {
            int64_t now = phi_total(ranks, alg, opt);
            int64_t delta = now - phi;
            if (delta < lo || delta > hi)
                audit_fail(t, std::string(step) + ": potential changed by " +
                                  std::to_string(delta) + ", allowed [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "]");
            if (now < 0) audit_fail(t, std::string(step) + ": potential is negative");
            phi = now;
        };

        // Step 1: add p to N_i and N*_i.
        alg.sets[i].insert(p);
        opt.sets[i].insert(p);
        phi_step("step 1 (add p)", -PHI_SLACK, 0);

        // Step 2: remove p from N_0 and N*_0.
        alg.sets[0].erase(p);
        opt.sets[0].erase(p);
        phi_step("step 2 (drop p from shared)", -PHI_SLACK, 0);

        // Step 3: rebalance to |N_i| = |N*_i| = k_i.
        const int sa = static_cast<int>(alg.sets[i].size());
        const int so = static_cast<int>(opt.sets[i].size());
        if (ki == 0) {
            if (!(sa == 1 && so == 1 && alg.sets[i].count(p) && opt.sets[i].count(p)))
                audit_fail(t, "zero-reserve set should hold exactly the requested page");
            alg.sets[i].erase(p);
            alg.sets[0].insert(p);
            opt.sets[i].erase(p);
            opt.sets[0].insert(p);
            phi_step("step 3 (zero reserve)", 0, 0);
        } else if (sa == ki + 1 && so == ki) {
            Page qi = max_rank_page(ranks, alg.sets[i]);
            alg.sets[i].erase(qi);
            alg.sets[0].insert(qi);
            phi_step("step 3 (alg overfull)", -PHI_SLACK, 0);
        } else if (sa == ki && so == ki + 1) {
            Page q = second_lowest_rank_page(ranks, opt.sets[i], p);
            opt.sets[i].erase(q);
            opt.sets[0].insert(q);
            phi_step("step 3 (opt overfull)", -PHI_SLACK, 0);
        } else if (sa == ki + 1 && so == ki + 1) {
            Page qi = max_rank_page(ranks, alg.sets[i]);
            Page qi_star = max_rank_page(ranks, opt.sets[i]);
            alg.sets[i].erase(qi);
            alg.sets[0].insert(qi);
            if (rank_of(ranks, qi) <= rank_of(ranks, qi_star)) {
                opt.sets[i].erase(qi_star);
                opt.sets[0].insert(qi_star);
            } else {
                Page q = second_lowest_rank_page(ranks, opt.sets[i], p);
                opt.sets[i].erase(q);
                opt.sets[0].insert(q);
            }
            phi_step("step 3 (both overfull)", -PHI_SLACK, 0);
        } else if (sa == ki && so == ki) {
            // both hits inside the reserved sets: nothing to rebalance
        } else {
            audit_fail(t, "unexpected set sizes |N_i|=" + std::to_string(sa) +
                              " |N*_i|=" + std::to_string(so) + " for k_i=" + std::to_string(ki));
        }

        // Step 4: the optimum serves p, evicting per its schedule on a miss.
        if (opt_hit) {
            if (static_cast<int>(opt.sets[0].size()) != cfg.public_slots())
                audit_fail(t, "optimum shared set has wrong size after a hit");
            phi_step("step 4 (opt hit)", 0, 0);
        } else {
            d_opt = 1;
            if (sched_pos >= options.opt_schedule->size())
                audit_fail(t, "optimal schedule ended early");
            const ScheduleEntry& entry = (*options.opt_schedule)[sched_pos++];
            if (entry.t != t || entry.fetch != p)
                audit_fail(t, "optimal schedule entry mismatch");
            const Page q = entry.evict;
            if (q == p) audit_fail(t, "optimal schedule evicts the requested page");
            int j = opt.find_set(q);
            if (j < 0) audit_fail(t, "optimal schedule evicts uncached " + to_string(q));
            opt.sets[j].erase(q);
            if (j != 0) {
                // Pull some page of agent j back from the shared set so the
                // reserved set stays at k_j; it must exist for any feasible
                // schedule.
                const Page* relocated = nullptr;
                for (const Page& cand : opt.sets[0]) {
                    if (cand.agent != j) continue;
                    if (!relocated || max_rank_before(ranks, cand, *relocated)) relocated = &cand;
                }
                if (!relocated)
                    audit_fail(t, "optimal schedule breaks agent " + std::to_string(j) +
                                      "'s reserve evicting " + to_string(q));
                Page q_prime = *relocated;
                opt.sets[0].erase(q_prime);
                opt.sets[j].insert(q_prime);
                phi_step("step 4 (opt evicts reserved)", -PHI_SLACK, 2);
            } else {
                phi_step("step 4 (opt evicts shared)", -PHI_SLACK, 1);
            }
        }

        // Step 5: the algorithm serves p, evicting the max-rank shared page
        // on a miss.
        if (alg_hit) {
            // nothing to do
        } else {
            d_alg = 1;
            Page q = max_rank_page(ranks, alg.sets[0], &p);
            alg.sets[0].erase(q);
            rec.evicted = q;
            result.run.ledger.misses += 1;
            result.run.ledger.evictions_total += 1;
            if (q.dummy)
                result.run.ledger.evictions_dummy += 1;
            else
                result.run.ledger.evictions_real += 1;
            result.run.schedule.push_back(ScheduleEntry{t, q, p});
            phi_step("step 5 (alg evicts)", -1, -1);
        }

        // Step 6: refresh the rank of p.
        ranks[p] = next_use[t];
        phi_step("step 6 (rank update)", 0, 0);

        // Size sanity after the full request.
        if (static_cast<int>(alg.sets[0].size()) != cfg.public_slots() ||
            static_cast<int>(opt.sets[0].size()) != cfg.public_slots())
            audit_fail(t, "shared sets are not back at k_0");
        for (int a = 1; a <= m; ++a) {
            if (static_cast<int>(alg.sets[a].size()) != cfg.reserve(a) ||
                static_cast<int>(opt.sets[a].size()) != cfg.reserve(a))
                audit_fail(t, "reserved sets of agent " + std::to_string(a) +
                                  " are not back at their reserve size");
        }

        const int64_t d_phi = phi - phi_request_start;
        if (d_alg + d_phi - 2 * d_opt > 0)
            audit_fail(t, "d(ALG) + d(Phi) - 2 d(OPT) = " +
                              std::to_string(d_alg + d_phi - 2 * d_opt) + " > 0");

        rec.phi = static_cast<double>(phi);
        result.run.steps.push_back(rec);
        result.audit.push_back(AuditStep{t, d_alg, d_opt, d_phi, phi});
    }

    if (options.audit && sched_pos != options.opt_schedule->size())
        throw std::runtime_error("optimal schedule has unused entries");
    return result;
}

}  // namespace rcache
