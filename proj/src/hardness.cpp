#include "rcache/hardness.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rcache {

namespace {

std::string err(const std::string& what) { return "hardness: " + what; }

}  // namespace

std::string CnfClause::pattern() const {
    int positives = 0;
    for (const CnfLiteral& l : lits) positives += l.negated ? 0 : 1;
    static const char* kPatterns[4] = {"FFF", "TFF", "TTF", "TTT"};
    return kPatterns[positives];
}

int CnfFormula::degree(int var) const {
    int d = 0;
    for (const CnfClause& c : clauses)
        for (const CnfLiteral& l : c.lits) d += l.var == var ? 1 : 0;
    return d;
}

void validate_formula(const CnfFormula& phi) {
    if (phi.n <= 0 || phi.n % 2 != 0)
        throw std::runtime_error(err("variable count must be positive and even, got " +
                                     std::to_string(phi.n)));
    for (size_t j = 0; j < phi.clauses.size(); ++j) {
        const CnfClause& c = phi.clauses[j];
        const std::string where = "clause " + std::to_string(j + 1);
        for (const CnfLiteral& l : c.lits)
            if (l.var < 1 || l.var > phi.n)
                throw std::runtime_error(err(where + ": variable " + std::to_string(l.var) +
                                             " out of range 1.." + std::to_string(phi.n)));
        if (c.lits[0].var == c.lits[1].var || c.lits[0].var == c.lits[2].var ||
            c.lits[1].var == c.lits[2].var)
            throw std::runtime_error(err(where + ": repeated variable"));
        if ((c.lits[0].negated && !c.lits[1].negated) || (c.lits[1].negated && !c.lits[2].negated))
            throw std::runtime_error(err(where + ": not normalized (non-negated literals first)"));
    }
}

CnfFormula parse_dimacs(const std::string& text) {
    CnfFormula phi;
    int declared_m = -1;
    std::vector<int> pending;  // literals of the clause being read
    int64_t clause_start_line = 0;

    std::istringstream in(text);
    std::string line;
    int64_t lineno = 0;
    auto fail = [](int64_t ln, const std::string& what) -> void {
        throw std::runtime_error(err("line " + std::to_string(ln) + ": " + what));
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;  // blank line
        if (tok == "c" || tok[0] == 'c') continue;
        if (tok == "p") {
            if (declared_m >= 0) fail(lineno, "duplicate problem header");
            std::string kind;
            if (!(ls >> kind) || kind != "cnf") fail(lineno, "expected 'p cnf <vars> <clauses>'");
            if (!(ls >> phi.n >> declared_m) || phi.n <= 0 || declared_m < 0)
                fail(lineno, "expected 'p cnf <vars> <clauses>'");
            continue;
        }
        if (declared_m < 0) fail(lineno, "clause before the problem header");
        ls.clear();
        ls.str(line);
        int lit = 0;
        while (ls >> lit) {
            if (lit == 0) {
                if (pending.size() != 3)
                    fail(clause_start_line ? clause_start_line : lineno,
                         "clause must have exactly 3 literals, got " +
                             std::to_string(pending.size()));
                CnfClause c;
                size_t at = 0;
                for (int v : pending)
                    if (v > 0) c.lits[at++] = CnfLiteral{v, false};
                for (int v : pending)
                    if (v < 0) c.lits[at++] = CnfLiteral{-v, true};
                phi.clauses.push_back(c);
                pending.clear();
                clause_start_line = 0;
            } else {
                if (pending.empty()) clause_start_line = lineno;
                pending.push_back(lit);
                if (pending.size() > 3)
                    fail(clause_start_line, "clause must have exactly 3 literals");
            }
        }
        if (!ls.eof()) fail(lineno, "unexpected token");
    }
    if (declared_m < 0) throw std::runtime_error(err("missing 'p cnf' header"));
    if (!pending.empty())
        throw std::runtime_error(
            err("line " + std::to_string(clause_start_line) + ": unterminated clause"));
    if (phi.m() != declared_m)
        throw std::runtime_error(err("header declares " + std::to_string(declared_m) +
                                     " clauses, found " + std::to_string(phi.m())));
    validate_formula(phi);  // range, distinctness, even n
    return phi;
}

CnfFormula random_formula(Rng& rng, int n, int m) {
    if (n < 3 || n % 2 != 0)
        throw std::runtime_error(err("random formula needs even n >= 4, got " + std::to_string(n)));
    CnfFormula phi;
    phi.n = n;
    for (int j = 0; j < m; ++j) {
        std::vector<int> vars;
        while (vars.size() < 3) {
            int v = static_cast<int>(rng.uniform_int(1, n));
            if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
        }
        CnfClause c;
        size_t at = 0;
        std::vector<std::pair<int, bool>> lits;
        for (int v : vars) lits.emplace_back(v, rng.uniform_int(0, 1) == 1);
        for (const auto& [v, neg] : lits)
            if (!neg) c.lits[at++] = CnfLiteral{v, false};
        for (const auto& [v, neg] : lits)
            if (neg) c.lits[at++] = CnfLiteral{v, true};
        phi.clauses.push_back(c);
    }
    validate_formula(phi);
    return phi;
}

bool assignment_balanced(const CnfFormula& phi, const std::vector<bool>& x) {
    if (static_cast<int>(x.size()) != phi.n) return false;
    int64_t trues = std::count(x.begin(), x.end(), true);
    return trues * 2 == phi.n;
}

bool assignment_satisfies(const CnfFormula& phi, const std::vector<bool>& x) {
    if (static_cast<int>(x.size()) != phi.n) return false;
    for (const CnfClause& c : phi.clauses) {
        bool sat = false;
        for (const CnfLiteral& l : c.lits) sat = sat || (x[l.var - 1] != l.negated);
        if (!sat) return false;
    }
    return true;
}

std::optional<std::vector<bool>> find_balanced_assignment(const CnfFormula& phi) {
    validate_formula(phi);
    if (phi.n > 20)
        throw std::runtime_error(err("exhaustive balanced search is limited to 20 variables"));
    // Lexicographically enumerate all indicator vectors with n/2 ones.
    std::vector<char> mask(phi.n, 0);
    std::fill(mask.begin() + phi.n / 2, mask.end(), 1);
    do {
        std::vector<bool> x(mask.begin(), mask.end());
        if (assignment_satisfies(phi, x)) return x;
    } while (std::next_permutation(mask.begin(), mask.end()));
    return std::nullopt;
}

int64_t hardness_c_prime(int64_t n, int64_t m) { return 3 * m + 4 * n + 2; }

int64_t hardness_miss_budget(int64_t n, int64_t m) {
    return 2 * m * n + 22 * m + 11 * n / 2 + 6;
}

int64_t hardness_trace_length(int64_t n, int64_t m) {
    const int64_t cp = hardness_c_prime(n, m);
    return 2 * cp * m * n + 6 * cp * m + cp * n / 2 + 6 * cp + 18 * m + 8 * n;
}

namespace {

// Incremental request-stream builder tracking per-request provenance and the
// block decomposition.
class InstanceBuilder {
public:
    InstanceBuilder(HardnessInstance& out, int64_t c_prime) : out_(out), c_prime_(c_prime) {}

    void begin_toplevel(const std::string& name) {
        toplevel_ = name;
        toplevel_start_ = size();
    }
    void end_toplevel() {
        out_.toplevel_sizes.emplace_back(toplevel_, size() - toplevel_start_);
    }

    void push(const Page& p, const std::string& tag) {
        out_.trace.requests.push_back(p);
        out_.gadget.push_back(toplevel_);
        out_.tag.push_back(tag);
    }

    // The occupier block: round-robins pages 1..width of the block's own
    // agent (numbered n + index) c_prime times.
    void public_block(int n, int index, int width) {
        HardnessInstance::PublicGadget g;
        g.index = index;
        g.width = width;
        g.first = size();
        const std::string label =
            "PUBLIC(" + std::to_string(index) + "," + std::to_string(width) + ")";
        for (int64_t r = 1; r <= c_prime_; ++r)
            for (int p = 1; p <= width; ++p)
                push(real_page(n + index, p),
                     label + ":r" + std::to_string(r) + ":p" + std::to_string(p));
        g.size = size() - g.first;
        out_.public_gadgets.push_back(g);
    }

    int64_t size() const { return static_cast<int64_t>(out_.trace.requests.size()); }

private:
    HardnessInstance& out_;
    int64_t c_prime_;
    std::string toplevel_;
    int64_t toplevel_start_ = 0;
};

}  // namespace

HardnessInstance generate_instance(const CnfFormula& phi) {
    validate_formula(phi);
    const int n = phi.n;
    const int m = phi.m();

    HardnessInstance inst;
    inst.c_prime = hardness_c_prime(n, m);
    inst.miss_budget = hardness_miss_budget(n, m);
    inst.trace.config.k = 3 * n / 2 + 2;
    inst.trace.config.reserves.assign(n + 4 * m + 3, 0);
    std::fill_n(inst.trace.config.reserves.begin(), n, 1);
    inst.trace.config.validate();

    InstanceBuilder b(inst, inst.c_prime);

    // Opening block: first pages of every variable agent, then the page-0
    // bottleneck that admits only n/2 of them privately.
    b.begin_toplevel("VARIABLE(T)");
    for (int i = 1; i <= n; ++i) b.push(real_page(i, 1), "init+1");
    for (int i = 1; i <= n; ++i) b.push(real_page(i, 0), "zero-a");
    b.public_block(n, 1, 2);
    for (int i = 1; i <= n; ++i) b.push(real_page(i, 0), "zero-b");
    b.end_toplevel();

    // Clause blocks. Positive-literal reuse brackets precede the width-(n/2)
    // checkpoint; negated-literal brackets follow it; every literal's pages
    // use the base offset 3 * (number of earlier clauses with that variable).
    std::vector<int> prev(n + 1, 0);
    for (int j = 1; j <= m; ++j) {
        const CnfClause& c = phi.clauses[j - 1];
        b.begin_toplevel("CLAUSE(" + std::to_string(j) + "," + c.pattern() + ")");
        int var[3], base[3];
        bool neg[3];
        for (int l = 0; l < 3; ++l) {
            var[l] = c.lits[l].var;
            neg[l] = c.lits[l].negated;
            base[l] = 3 * prev[var[l]];
        }
        auto push_each = [&](bool negated_group, int offset, const std::string& tag) {
            for (int l = 0; l < 3; ++l)
                if (neg[l] == negated_group) b.push(real_page(var[l], base[l] + offset), tag);
        };
        auto push_all = [&](int offset, const std::string& tag) {
            for (int l = 0; l < 3; ++l) b.push(real_page(var[l], base[l] + offset), tag);
        };
        push_each(false, 2, "T+2");
        b.public_block(n, 4 * j - 2, n / 2 + 2);
        push_each(false, 1, "T+1");
        push_all(3, "mid+3a");
        b.public_block(n, 4 * j - 1, n / 2);
        push_all(3, "mid+3b");
        push_each(true, 2, "F+2");
        b.public_block(n, 4 * j, n / 2 + 2);
        push_each(true, 1, "F+1");
        push_all(4, "all+4");
        b.public_block(n, 4 * j + 1, n / 2 + 2);
        push_all(2, "tail+2");
        b.end_toplevel();
        for (int l = 0; l < 3; ++l) ++prev[var[l]];
    }

    // Closing block: the terminal pages of every variable agent, with the
    // final bottleneck that admits only n/2 of them privately.
    b.begin_toplevel("VARIABLE(F)");
    auto last = [&](int i, int offset) { return real_page(i, 3 * phi.degree(i) + offset); };
    for (int i = 1; i <= n; ++i) b.push(last(i, 2), "close+2a");
    b.public_block(n, 4 * m + 2, n / 2 + 2);
    for (int i = 1; i <= n; ++i) b.push(last(i, 1), "close+1");
    for (int i = 1; i <= n; ++i) b.push(last(i, 3), "close+3a");
    b.public_block(n, 4 * m + 3, 2);
    for (int i = 1; i <= n; ++i) b.push(last(i, 3), "close+3b");
    for (int i = 1; i <= n; ++i) b.push(last(i, 2), "close+2b");
    b.end_toplevel();

    inst.trace.validate();

    // Closed-form self-checks of the layout.
    if (inst.trace.length() != hardness_trace_length(n, m))
        throw std::logic_error(err("generated length " + std::to_string(inst.trace.length()) +
                                   " != closed form " +
                                   std::to_string(hardness_trace_length(n, m))));
    int64_t toplevel_sum = 0;
    for (const auto& [name, sz] : inst.toplevel_sizes) toplevel_sum += sz;
    if (toplevel_sum != inst.trace.length())
        throw std::logic_error(err("block sizes do not sum to the trace length"));
    if (static_cast<int>(inst.public_gadgets.size()) != 4 * m + 3)
        throw std::logic_error(err("expected 4m+3 occupier blocks"));
    for (size_t g = 0; g < inst.public_gadgets.size(); ++g) {
        const auto& pg = inst.public_gadgets[g];
        if (pg.index != static_cast<int>(g) + 1)
            throw std::logic_error(err("occupier blocks out of order"));
        if (pg.size != inst.c_prime * pg.width)
            throw std::logic_error(err("occupier block size != c_prime * width"));
    }
    return inst;
}

void write_provenance(std::ostream& os, const HardnessInstance& inst) {
    os << "# hardness provenance v1\n";
    os << "# columns: index gadget tag\n";
    os << "# clause layout: positive-literal reuse brackets precede the width-(n/2) checkpoint; "
          "negated-literal brackets follow it\n";
    for (int64_t t = 0; t < inst.trace.length(); ++t)
        os << t << " " << inst.gadget[t] << " " << inst.tag[t] << "\n";
}

SynthesizedStrategy synthesize_strategy(const CnfFormula& phi, const std::vector<bool>& x) {
    validate_formula(phi);
    if (static_cast<int>(x.size()) != phi.n)
        throw std::runtime_error(err("assignment-invalid: expected " + std::to_string(phi.n) +
                                     " values, got " + std::to_string(x.size())));
    if (!assignment_balanced(phi, x))
        throw std::runtime_error(err("assignment-invalid: not half true, half false"));
    if (!assignment_satisfies(phi, x))
        throw std::runtime_error(err("assignment-invalid: does not satisfy the formula"));

    HardnessInstance inst = generate_instance(phi);
    const Trace& trace = inst.trace;
    const int n = phi.n;

    // Occurrence positions per page.
    auto occ = std::make_shared<std::map<Page, std::vector<int64_t>>>();
    for (int64_t t = 0; t < trace.length(); ++t) (*occ)[trace.requests[t]].push_back(t);

    // Residency plan. Occupier pages (agents > n) are always kept, publicly.
    // Variable pages congruent to the kept parity (1 mod 3 for true, 2 mod 3
    // for false) are kept privately; the opposite parity is dropped; pages
    // congruent to 0 mod 3 are kept privately exactly when their interval
    // avoids every kept-parity interval of the same agent, publicly
    // otherwise.
    struct PlanEntry {
        bool taken = false;
        bool private_region = false;
    };
    auto plan = std::make_shared<std::map<Page, PlanEntry>>();
    std::vector<std::vector<std::pair<int64_t, int64_t>>> kept_ivals(n + 1);
    for (const auto& [p, times] : *occ) {
        if (p.agent > n) {
            (*plan)[p] = {true, false};
            continue;
        }
        if (times.size() != 2)
            throw std::logic_error(err("variable page requested " + std::to_string(times.size()) +
                                       " times, expected 2"));
        const int parity = x[p.agent - 1] ? 1 : 2;
        if (p.local_id % 3 == parity) {
            (*plan)[p] = {true, true};
            kept_ivals[p.agent].emplace_back(times.front(), times.back());
        } else if (p.local_id % 3 != 0) {
            (*plan)[p] = {false, false};
        }
    }
    for (const auto& [p, times] : *occ) {
        if (p.agent > n || p.local_id % 3 != 0) continue;
        bool overlaps = false;
        for (const auto& [a, bnd] : kept_ivals[p.agent])
            overlaps = overlaps || (a <= times.back() && times.front() <= bnd);
        (*plan)[p] = {true, !overlaps};
    }

    // Replay: place per the plan, evicting only pages with no pending
    // planned hit (tracked via live_until), smallest such page first.
    auto live_until = std::make_shared<std::map<Page, int64_t>>();
    const ReserveConfig cfg = trace.config;
    PPActionFn strategy = [occ, plan, live_until, cfg](int64_t t, const Page& p,
                                                       const PublicPrivateState& s) {
        const PlanEntry pl = plan->at(p);
        const std::vector<int64_t>& times = occ->at(p);
        if (pl.taken && t != times.front())
            throw std::logic_error(err("planned hit was a miss at step " + std::to_string(t)));
        PPAction a;
        if (pl.taken && pl.private_region) {
            a.place_private = true;
            if (s.private_load(p.agent) >= cfg.reserve(p.agent)) {
                const Page victim = *s.private_pages(p.agent).begin();
                if (live_until->at(victim) >= t)
                    throw std::logic_error(err("private slot holds a still-needed page at step " +
                                               std::to_string(t)));
                a.evict = victim;
            }
        } else {
            a.place_private = false;
            if (s.public_load() >= cfg.public_slots()) {
                std::optional<Page> victim;
                for (const Page& q : s.public_pages())
                    if (live_until->at(q) < t) {
                        victim = q;
                        break;
                    }
                if (!victim)
                    throw std::logic_error(
                        err("public slots hold only still-needed pages at step " +
                            std::to_string(t)));
                a.evict = *victim;
            }
        }
        (*live_until)[p] = pl.taken ? times.back() : t;
        return a;
    };

    SynthesizedStrategy out;
    out.replay = replay_public_private(trace, strategy);
    out.agent_hits.assign(n + 1, 0);
    for (const PPStepRecord& step : out.replay.steps) {
        if (step.hit) {
            if (step.fetched.agent <= n)
                ++out.agent_hits[step.fetched.agent];
            else
                ++out.public_hits;
        } else {
            out.actions.push_back(step.action);
        }
    }

    // The replay must realize exactly the planned hits: one per kept
    // variable page (2 deg(i) + 3 per agent) and all but the first round of
    // every occupier block.
    int64_t expected_hits = 0;
    for (int i = 1; i <= n; ++i) {
        const int64_t want = 2 * phi.degree(i) + 3;
        expected_hits += want;
        if (out.agent_hits[i] != want)
            throw std::logic_error(err("agent " + std::to_string(i) + " realized " +
                                       std::to_string(out.agent_hits[i]) + " hits, planned " +
                                       std::to_string(want)));
    }
    int64_t occupier_pages = 0;
    for (const auto& pg : inst.public_gadgets) occupier_pages += pg.width;
    const int64_t want_public = (inst.c_prime - 1) * occupier_pages;
    if (out.public_hits != want_public)
        throw std::logic_error(err("occupier hits " + std::to_string(out.public_hits) +
                                   " != planned " + std::to_string(want_public)));
    expected_hits += want_public;
    if (out.replay.misses != trace.length() - expected_hits)
        throw std::logic_error(err("miss count deviates from the planned hit pattern"));
    if (out.replay.relocations != 0)
        throw std::logic_error(err("the planned strategy never relocates"));
    return out;
}

}  // namespace rcache
