#include "rcache/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace rcache {

std::string to_string(const Page& p) {
    std::string s = std::to_string(p.agent);
    s += ':';
    if (p.dummy) s += 'd';
    s += std::to_string(p.local_id);
    return s;
}

std::optional<Page> parse_page(const std::string& tok) {
    auto colon = tok.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size()) return std::nullopt;
    Page p;
    try {
        size_t used = 0;
        p.agent = std::stoi(tok.substr(0, colon), &used);
        if (used != colon) return std::nullopt;
        std::string rest = tok.substr(colon + 1);
        if (rest[0] == 'd') {
            p.dummy = true;
            rest = rest.substr(1);
            if (rest.empty()) return std::nullopt;
        }
        p.local_id = std::stoi(rest, &used);
        if (used != rest.size()) return std::nullopt;
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (p.agent < 0 || p.local_id < 0) return std::nullopt;
    return p;
}

int ReserveConfig::reserve(int agent) const {
    if (agent <= 0 || agent > agent_count()) return 0;
    return reserves[agent - 1];
}

int ReserveConfig::reserve_total() const {
    int total = 0;
    for (int r : reserves) total += r;
    return total;
}

void ReserveConfig::validate() const {
    if (k < 1) throw std::runtime_error("cache size k must be at least 1");
    if (reserves.empty()) throw std::runtime_error("at least one agent is required");
    for (size_t i = 0; i < reserves.size(); ++i) {
        if (reserves[i] < 0)
            throw std::runtime_error("reserve of agent " + std::to_string(i + 1) + " is negative");
    }
    if (reserve_total() >= k)
        throw std::runtime_error("sum of reserves must be strictly less than k (got " +
                                 std::to_string(reserve_total()) + " vs k=" + std::to_string(k) + ")");
}

void Trace::validate() const {
    config.validate();
    for (size_t t = 0; t < requests.size(); ++t) {
        const Page& p = requests[t];
        if (p.dummy)
            throw std::runtime_error("request " + std::to_string(t) + " is a dummy page");
        if (p.agent < 1 || p.agent > config.agent_count())
            throw std::runtime_error("request " + std::to_string(t) + " has agent " +
                                     std::to_string(p.agent) + " outside 1.." +
                                     std::to_string(config.agent_count()));
        if (p.local_id < 0)
            throw std::runtime_error("request " + std::to_string(t) + " has a negative local id");
    }
}

int Trace::universe_size() const {
    std::set<Page> distinct(requests.begin(), requests.end());
    return static_cast<int>(distinct.size());
}

std::map<int, int> Trace::agent_universe() const {
    std::map<int, int> counts;
    std::set<Page> seen;
    for (const Page& p : requests) {
        if (seen.insert(p).second) counts[p.agent] += 1;
    }
    return counts;
}

std::vector<int64_t> next_use_times(const Trace& trace) {
    std::vector<int64_t> next(trace.requests.size(), RANK_INF);
    std::map<Page, int64_t> upcoming;
    for (int64_t t = trace.length() - 1; t >= 0; --t) {
        const Page& p = trace.requests[t];
        auto it = upcoming.find(p);
        if (it != upcoming.end()) next[t] = it->second;
        upcoming[p] = t;
    }
    return next;
}

std::map<Page, int64_t> first_use_times(const Trace& trace) {
    std::map<Page, int64_t> first;
    for (int64_t t = 0; t < trace.length(); ++t) {
        first.emplace(trace.requests[t], t);
    }
    return first;
}

ReserveCacheState::ReserveCacheState(const ReserveConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    for (int agent = 1; agent <= cfg_.agent_count(); ++agent) {
        for (int j = 0; j < cfg_.reserve(agent); ++j) {
            pages_.insert(dummy_page(agent, j));
        }
        per_agent_[agent] = cfg_.reserve(agent);
    }
    for (int j = 0; j < cfg_.public_slots(); ++j) {
        pages_.insert(dummy_page(0, j));
    }
    per_agent_[0] = cfg_.public_slots();
}

int ReserveCacheState::agent_count(int agent) const {
    auto it = per_agent_.find(agent);
    return it == per_agent_.end() ? 0 : it->second;
}

bool ReserveCacheState::can_evict(const Page& victim, int incoming_agent) const {
    if (!contains(victim)) return false;
    int after = agent_count(victim.agent) - 1 + (victim.agent == incoming_agent ? 1 : 0);
    return after >= cfg_.reserve(victim.agent);
}

void ReserveCacheState::replace(const Page& victim, const Page& incoming) {
    if (!contains(victim))
        throw std::runtime_error("evicting " + to_string(victim) + " which is not cached");
    if (victim == incoming)
        throw std::runtime_error("evicting the page being fetched: " + to_string(victim));
    if (contains(incoming))
        throw std::runtime_error("fetching " + to_string(incoming) + " which is already cached");
    if (!can_evict(victim, incoming.agent))
        throw std::runtime_error("evicting " + to_string(victim) + " for " + to_string(incoming) +
                                 " would break agent " + std::to_string(victim.agent) +
                                 "'s reserve");
    pages_.erase(victim);
    per_agent_[victim.agent] -= 1;
    pages_.insert(incoming);
    per_agent_[incoming.agent] += 1;
}

void ReserveCacheState::check_invariants() const {
    if (static_cast<int>(pages_.size()) != cfg_.k)
        throw std::runtime_error("cache holds " + std::to_string(pages_.size()) +
                                 " pages, expected " + std::to_string(cfg_.k));
    std::map<int, int> counts;
    for (const Page& p : pages_) counts[p.agent] += 1;
    for (int agent = 1; agent <= cfg_.agent_count(); ++agent) {
        if (counts[agent] < cfg_.reserve(agent))
            throw std::runtime_error("agent " + std::to_string(agent) + " holds " +
                                     std::to_string(counts[agent]) + " pages, reserve is " +
                                     std::to_string(cfg_.reserve(agent)));
    }
}

RunResult replay_reserves(const Trace& trace, const VictimFn& choose_victim) {
    trace.validate();
    ReserveCacheState state(trace.config);
    RunResult result;
    result.steps.reserve(trace.requests.size());
    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page& p = trace.requests[t];
        StepRecord rec;
        rec.t = t;
        rec.fetched = p;
        if (state.contains(p)) {
            rec.hit = true;
        } else {
            Page victim = choose_victim(t, p, state);
            state.replace(victim, p);
            rec.evicted = victim;
            result.ledger.misses += 1;
            result.ledger.evictions_total += 1;
            if (victim.dummy)
                result.ledger.evictions_dummy += 1;
            else
                result.ledger.evictions_real += 1;
            result.schedule.push_back(ScheduleEntry{t, victim, p});
        }
        state.check_invariants();
        result.steps.push_back(rec);
    }
    return result;
}

RunResult replay_reserves_schedule(const Trace& trace, const std::vector<ScheduleEntry>& schedule) {
    size_t next = 0;
    auto choose = [&](int64_t t, const Page& p, const ReserveCacheState&) -> Page {
        if (next >= schedule.size())
            throw std::runtime_error("schedule ends before miss at t=" + std::to_string(t));
        const ScheduleEntry& e = schedule[next];
        if (e.t != t)
            throw std::runtime_error("schedule entry for t=" + std::to_string(e.t) +
                                     " does not match miss at t=" + std::to_string(t));
        if (e.fetch != p)
            throw std::runtime_error("schedule fetches " + to_string(e.fetch) + " at t=" +
                                     std::to_string(t) + " but " + to_string(p) + " was requested");
        ++next;
        return e.evict;
    };
    RunResult result = replay_reserves(trace, choose);
    if (next != schedule.size())
        throw std::runtime_error("schedule has " + std::to_string(schedule.size() - next) +
                                 " unused entries");
    return result;
}

RunResult run_lru(const Trace& trace) {
    trace.validate();
    std::map<Page, int64_t> last_use;  // absent = never used
    // Set-iteration order makes the first candidate with the minimal use time
    // the smallest page, which is the documented tie-break.
    auto choose = [&](const Page& incoming, const ReserveCacheState& state) -> Page {
        std::optional<Page> best;
        int64_t best_use = 0;
        for (const Page& q : state.pages()) {
            if (!state.can_evict(q, incoming.agent)) continue;
            auto it = last_use.find(q);
            int64_t use = it == last_use.end() ? -1 : it->second;
            if (!best || use < best_use) {
                best = q;
                best_use = use;
            }
        }
        if (!best) throw std::runtime_error("no evictable page found");
        return *best;
    };
    ReserveCacheState state(trace.config);
    RunResult out;
    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page& p = trace.requests[t];
        StepRecord rec;
        rec.t = t;
        rec.fetched = p;
        if (state.contains(p)) {
            rec.hit = true;
        } else {
            Page victim = choose(p, state);
            state.replace(victim, p);
            rec.evicted = victim;
            out.ledger.misses += 1;
            out.ledger.evictions_total += 1;
            if (victim.dummy)
                out.ledger.evictions_dummy += 1;
            else
                out.ledger.evictions_real += 1;
            out.schedule.push_back(ScheduleEntry{t, victim, p});
        }
        last_use[p] = t;
        state.check_invariants();
        out.steps.push_back(rec);
    }
    return out;
}

PublicPrivateState::PublicPrivateState(const ReserveConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    private_.resize(cfg_.agent_count());
}

bool PublicPrivateState::contains(const Page& p) const {
    return in_public(p) || in_private(p);
}

bool PublicPrivateState::in_private(const Page& p) const {
    if (p.agent < 1 || p.agent > cfg_.agent_count()) return false;
    return private_[p.agent - 1].count(p) != 0;
}

int PublicPrivateState::private_load(int agent) const {
    if (agent < 1 || agent > cfg_.agent_count()) return 0;
    return static_cast<int>(private_[agent - 1].size());
}

const std::set<Page>& PublicPrivateState::private_pages(int agent) const {
    if (agent < 1 || agent > cfg_.agent_count())
        throw std::runtime_error("agent " + std::to_string(agent) + " out of range");
    return private_[agent - 1];
}

void PublicPrivateState::remove(const Page& p) {
    if (public_.erase(p)) return;
    if (p.agent >= 1 && p.agent <= cfg_.agent_count() && private_[p.agent - 1].erase(p)) return;
    throw std::runtime_error("removing " + to_string(p) + " which is not cached");
}

void PublicPrivateState::relocate_to_private(const Page& p) {
    if (!in_public(p))
        throw std::runtime_error("relocating " + to_string(p) + " which is not in public cache");
    if (p.agent < 1 || p.agent > cfg_.agent_count())
        throw std::runtime_error("relocating " + to_string(p) + " with no private slots");
    if (private_load(p.agent) >= cfg_.reserve(p.agent))
        throw std::runtime_error("relocating " + to_string(p) + " into full private slots of agent " +
                                 std::to_string(p.agent));
    public_.erase(p);
    private_[p.agent - 1].insert(p);
}

void PublicPrivateState::place(const Page& p, bool into_private) {
    if (contains(p))
        throw std::runtime_error("placing " + to_string(p) + " which is already cached");
    if (into_private) {
        if (p.agent < 1 || p.agent > cfg_.agent_count())
            throw std::runtime_error("placing " + to_string(p) + " privately with no private slots");
        if (private_load(p.agent) >= cfg_.reserve(p.agent))
            throw std::runtime_error("placing " + to_string(p) + " into full private slots of agent " +
                                     std::to_string(p.agent));
        private_[p.agent - 1].insert(p);
    } else {
        if (public_load() >= cfg_.public_slots())
            throw std::runtime_error("placing " + to_string(p) + " into full public cache");
        public_.insert(p);
    }
}

void PublicPrivateState::check_invariants() const {
    if (public_load() > cfg_.public_slots())
        throw std::runtime_error("public cache over capacity");
    for (int agent = 1; agent <= cfg_.agent_count(); ++agent) {
        if (private_load(agent) > cfg_.reserve(agent))
            throw std::runtime_error("private cache of agent " + std::to_string(agent) +
                                     " over capacity");
        for (const Page& p : private_[agent - 1]) {
            if (p.agent != agent)
                throw std::runtime_error("foreign page " + to_string(p) +
                                         " in private cache of agent " + std::to_string(agent));
        }
    }
}

PPRunResult replay_public_private(const Trace& trace, const PPActionFn& act) {
    trace.validate();
    PublicPrivateState state(trace.config);
    PPRunResult result;
    result.steps.reserve(trace.requests.size());
    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page& p = trace.requests[t];
        PPStepRecord rec;
        rec.t = t;
        rec.fetched = p;
        if (state.contains(p)) {
            rec.hit = true;
        } else {
            result.misses += 1;
            PPAction action = act(t, p, state);
            if (action.evict) {
                if (*action.evict == p)
                    throw std::runtime_error("evicting the requested page " + to_string(p));
                state.remove(*action.evict);
                result.removals += 1;
            }
            if (action.relocate) {
                state.relocate_to_private(*action.relocate);
                result.relocations += 1;
            }
            state.place(p, action.place_private);
            rec.action = action;
        }
        state.check_invariants();
        result.steps.push_back(rec);
    }
    return result;
}

PPRunResult run_pp_lru(const Trace& trace) {
    std::map<Page, int64_t> last_use;
    auto act = [&](int64_t, const Page& p, const PublicPrivateState& state) -> PPAction {
        PPAction action;
        if (state.private_load(p.agent) < state.config().reserve(p.agent)) {
            action.place_private = true;
            return action;
        }
        if (state.public_load() < state.config().public_slots()) {
            return action;
        }
        std::optional<Page> best;
        int64_t best_use = 0;
        auto consider = [&](const Page& q) {
            auto it = last_use.find(q);
            int64_t use = it == last_use.end() ? -1 : it->second;
            if (!best || use < best_use) {
                best = q;
                best_use = use;
            }
        };
        for (const Page& q : state.private_pages(p.agent)) consider(q);
        for (const Page& q : state.public_pages()) consider(q);
        if (!best) throw std::runtime_error("no evictable page in public-private cache");
        action.evict = *best;
        action.place_private = state.in_private(*best);
        return action;
    };
    PublicPrivateState state(trace.config);
    PPRunResult result;
    for (int64_t t = 0; t < trace.length(); ++t) {
        const Page& p = trace.requests[t];
        PPStepRecord rec;
        rec.t = t;
        rec.fetched = p;
        if (state.contains(p)) {
            rec.hit = true;
        } else {
            result.misses += 1;
            PPAction action = act(t, p, state);
            if (action.evict) {
                state.remove(*action.evict);
                result.removals += 1;
            }
            state.place(p, action.place_private);
            rec.action = action;
        }
        last_use[p] = t;
        state.check_invariants();
        result.steps.push_back(rec);
    }
    return result;
}

}  // namespace rcache
