#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rcache {

// A page is identified by the owning agent and a local id. Dummy pages are
// placeholders used to start from a feasible full cache; they never appear in
// a request sequence. Agent dummies count toward their agent's reserve; filler
// dummies belong to pseudo-agent 0 and count toward nobody's reserve.
struct Page {
    int32_t agent = 0;
    int32_t local_id = 0;
    bool dummy = false;

    friend auto operator<=>(const Page&, const Page&) = default;
};

inline Page real_page(int agent, int local_id) { return Page{agent, local_id, false}; }
inline Page dummy_page(int agent, int index) { return Page{agent, index, true}; }

// Rendered as "<agent>:<local_id>" for real pages and "<agent>:d<index>" for
// dummies, e.g. "1:3", "1:d0", "0:d2".
std::string to_string(const Page& p);
std::optional<Page> parse_page(const std::string& tok);

// Cache geometry: total size k and per-agent reserves k_1..k_m with
// sum(k_i) < k. Agents are numbered 1..m.
struct ReserveConfig {
    int k = 0;
    std::vector<int> reserves;  // reserves[i-1] = k_i

    int agent_count() const { return static_cast<int>(reserves.size()); }
    int reserve(int agent) const;
    int reserve_total() const;
    int public_slots() const { return k - reserve_total(); }
    void validate() const;  // throws std::runtime_error on bad geometry
};

struct Trace {
    ReserveConfig config;
    std::vector<Page> requests;  // real pages only, agents within 1..m

    void validate() const;
    int64_t length() const { return static_cast<int64_t>(requests.size()); }
    int universe_size() const;
    std::map<int, int> agent_universe() const;  // agent -> distinct page count
};

// Rank sentinel for "never requested again". Kept far from INT64_MAX so rank
// arithmetic (s+1 thresholds) cannot overflow.
inline constexpr int64_t RANK_INF = INT64_C(1) << 60;

// next_use[t] = time of the next request of requests[t] strictly after t,
// RANK_INF if there is none.
std::vector<int64_t> next_use_times(const Trace& trace);

// page -> time of its first request.
std::map<Page, int64_t> first_use_times(const Trace& trace);

struct CostLedger {
    int64_t misses = 0;
    int64_t evictions_total = 0;
    int64_t evictions_real = 0;
    int64_t evictions_dummy = 0;
};

struct StepRecord {
    int64_t t = 0;
    bool hit = false;
    Page fetched;                 // the requested page
    std::optional<Page> evicted;  // empty on hits
    std::optional<double> phi;    // audit potential, when audited
};

struct ScheduleEntry {
    int64_t t = 0;
    Page evict;
    Page fetch;
};

// Reserves-model cache: always exactly k pages, every agent i holds at least
// k_i of its pages (dummies included). Starts full of dummies.
class ReserveCacheState {
public:
    explicit ReserveCacheState(const ReserveConfig& cfg);

    const ReserveConfig& config() const { return cfg_; }
    const std::set<Page>& pages() const { return pages_; }
    bool contains(const Page& p) const { return pages_.count(p) != 0; }
    int agent_count(int agent) const;
    // Reserve feasibility is judged on the post-swap state: evicting an
    // agent-i page to admit another agent-i page is always allowed.
    bool can_evict(const Page& victim, int incoming_agent) const;
    // Swap victim for incoming; throws std::runtime_error if the victim is
    // absent, equals the incoming page, or the swap would break a reserve.
    void replace(const Page& victim, const Page& incoming);
    void check_invariants() const;

private:
    ReserveConfig cfg_;
    std::set<Page> pages_;
    std::map<int, int> per_agent_;
};

// Victim chooser for reserves-model replay: called on each miss with
// (t, requested page, state before the fetch); returns the page to evict.
using VictimFn = std::function<Page(int64_t, const Page&, const ReserveCacheState&)>;

struct RunResult {
    CostLedger ledger;
    std::vector<StepRecord> steps;
    std::vector<ScheduleEntry> schedule;  // one entry per miss
};

RunResult replay_reserves(const Trace& trace, const VictimFn& choose_victim);

// Replays an eviction schedule, validating that it evicts exactly at misses,
// only cached pages, never the requested page, and never breaks a reserve.
RunResult replay_reserves_schedule(const Trace& trace, const std::vector<ScheduleEntry>& schedule);

// Reserve-aware LRU baseline: evict the least-recently-used page whose agent
// stays at or above its reserve. Dummies count as never used; ties break on
// the smallest page under Page ordering.
RunResult run_lru(const Trace& trace);

// Public-private model: per-agent private slots (k_i each, only that agent's
// pages) plus k_0 public slots. Starts empty; cost is counted in evictions.
class PublicPrivateState {
public:
    explicit PublicPrivateState(const ReserveConfig& cfg);

    const ReserveConfig& config() const { return cfg_; }
    bool contains(const Page& p) const;
    bool in_public(const Page& p) const { return public_.count(p) != 0; }
    bool in_private(const Page& p) const;
    int public_load() const { return static_cast<int>(public_.size()); }
    int private_load(int agent) const;
    const std::set<Page>& public_pages() const { return public_; }
    const std::set<Page>& private_pages(int agent) const;

    void remove(const Page& p);                // from wherever it sits
    void relocate_to_private(const Page& p);   // public -> its agent's private
    void place(const Page& p, bool into_private);
    void check_invariants() const;

private:
    ReserveConfig cfg_;
    std::set<Page> public_;
    std::vector<std::set<Page>> private_;  // index agent-1
};

// One step of a public-private strategy. Hits take no action. On a miss the
// strategy may evict at most one cached page, then relocate at most one public
// page into its agent's private slots, then must place the requested page.
struct PPAction {
    std::optional<Page> evict;
    std::optional<Page> relocate;
    bool place_private = false;
};

using PPActionFn = std::function<PPAction(int64_t, const Page&, const PublicPrivateState&)>;

struct PPStepRecord {
    int64_t t = 0;
    bool hit = false;
    Page fetched;
    PPAction action;
};

struct PPRunResult {
    int64_t misses = 0;
    int64_t removals = 0;
    int64_t relocations = 0;
    int64_t charged() const { return removals + relocations; }
    std::vector<PPStepRecord> steps;
};

PPRunResult replay_public_private(const Trace& trace, const PPActionFn& act);

// LRU-flavored public-private baseline used in tests: fill free slots first,
// otherwise evict the least-recently-used page among the public slots and the
// requester's private slots. No relocations.
PPRunResult run_pp_lru(const Trace& trace);

}  // namespace rcache
