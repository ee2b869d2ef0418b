// Command-line front end for the reserve-cache toolkit: run algorithms on
// trace files, generate traces and reduction instances, run the verification
// suites, and adapt runs between the reserves and public-private models.
//
// Exit codes: 0 success, 1 I/O failure, 2 validation or usage failure,
// 3 invariant or property breach.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rcache/core.hpp"
#include "rcache/equivalence.hpp"
#include "rcache/fractional.hpp"
#include "rcache/generators.hpp"
#include "rcache/hardness.hpp"
#include "rcache/offline.hpp"
#include "rcache/oracle.hpp"
#include "rcache/report.hpp"
#include "rcache/rounding.hpp"
#include "rcache/suites.hpp"
#include "rcache/trace_io.hpp"

namespace {

using namespace rcache;

constexpr int EXIT_IO = 1;
constexpr int EXIT_VALIDATION = 2;
constexpr int EXIT_BREACH = 3;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Trace load_trace_checked(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    return parse_trace(in);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file: " + path);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunArgs {
    std::string algo;
    std::string trace_path;
    std::string out_csv;
    uint64_t seed = 0;
    bool audit = false;
    bool with_opt = false;
};

void audit_fractional(const Trace& trace, const FractionalResult& fr) {
    const double cap = std::log(static_cast<double>(trace.config.k) + 1.0);
    for (const FractionalStepLine& ln : fr.lines) {
        if (ln.primal > 2.0 * ln.dual + 1e-6) {
            throw std::logic_error("primal exceeds twice the dual at t=" + std::to_string(ln.t) +
                                   ": primal=" + fmt_double(ln.primal) +
                                   " dual=" + fmt_double(ln.dual));
        }
        if (ln.dualviol > cap + 1e-6) {
            throw std::logic_error("dual violation exceeds ln(k+1) at t=" + std::to_string(ln.t) +
                                   ": " + fmt_double(ln.dualviol));
        }
    }
    if (fr.dual_violation > cap + 1e-6) {
        throw std::logic_error("final dual violation exceeds ln(k+1): " +
                               fmt_double(fr.dual_violation));
    }
}

void audit_rounding(const FractionalResult& fr, const RoundingResult& r) {
    for (size_t i = 0; i < r.moves.size(); ++i) {
        const MoveStats& ms = r.moves[i];
        if (ms.cost > 4.0 * ms.eps + 1e-9) {
            throw std::logic_error("move " + std::to_string(i) + " cost " + fmt_double(ms.cost) +
                                   " exceeds 4*eps=" + fmt_double(4.0 * ms.eps));
        }
    }
    std::map<Page, double> marg;
    for (const auto& [state, mass] : r.final_support) {
        for (const Page& pg : state) marg[pg] += mass;
    }
    for (const auto& [pg, hist] : fr.x_history) {
        const double want = 1.0 - hist.back();
        const auto it = marg.find(pg);
        const double got = it == marg.end() ? 0.0 : it->second;
        if (std::abs(got - want) > 1e-7) {
            throw std::logic_error("final marginal of " + to_string(pg) + " is " +
                                   fmt_double(got) + ", fractional keeps " + fmt_double(want));
        }
    }
}

int cmd_run(const RunArgs& a) {
    const Trace trace = load_trace_checked(a.trace_path);
    const OracleLimits limits = OracleLimits::from_env();
    const Clock::time_point t0 = Clock::now();

    RunReport rep;
    rep.algorithm = a.algo == "lru" ? "lru(baseline)" : a.algo;
    rep.trace_id = a.trace_path;
    rep.requests = trace.length();
    rep.distinct_pages = trace.universe_size();
    rep.agents = trace.config.agent_count();
    rep.k = trace.config.k;
    rep.seed = a.seed;

    if (trace.length() == 0) {
        rep.misses = 0;
        if (a.algo == "fractional" || a.algo == "rounded") rep.cost = 0.0;
        if (a.with_opt) {
            rep.opt = 0;
            rep.ratio = 1.0;
        }
    } else if (a.algo == "offline") {
        OracleResult opt;
        if (a.audit || a.with_opt) opt = solve_reserves_opt(trace, limits);
        OfflineOptions oo;
        if (a.audit) {
            oo.audit = true;
            oo.opt_schedule = &opt.schedule;
        }
        OfflineResult off;
        try {
            off = run_offline(trace, oo);
        } catch (const std::runtime_error& e) {
            if (a.audit) throw std::logic_error(std::string("audit: ") + e.what());
            throw;
        }
        if (a.audit) {
            for (const AuditStep& s : off.audit) {
                if (s.d_alg + s.d_phi > 2 * s.d_opt || s.phi_after < 0) {
                    throw std::logic_error("audit inequality fails at t=" + std::to_string(s.t));
                }
            }
        }
        rep.misses = off.run.ledger.misses;
        if (a.with_opt) rep.opt = opt.misses;
    } else if (a.algo == "oracle") {
        const OracleResult opt = solve_reserves_opt(trace, limits);
        rep.misses = opt.misses;
        if (a.with_opt) rep.opt = opt.misses;
    } else if (a.algo == "lru") {
        rep.misses = run_lru(trace).ledger.misses;
        if (a.with_opt) rep.opt = solve_reserves_opt(trace, limits).misses;
    } else if (a.algo == "fractional") {
        const FractionalResult fr = run_fractional(trace);
        if (a.audit) audit_fractional(trace, fr);
        rep.cost = fr.total_cost;
        if (a.with_opt) rep.opt = solve_reserves_opt(trace, limits).misses;
    } else if (a.algo == "rounded") {
        const FractionalResult fr = run_fractional(trace);
        RoundingOptions ro;
        ro.seed = a.seed;
        const RoundingResult r = run_rounding(trace, fr, ro);
        if (a.audit) audit_rounding(fr, r);
        rep.misses = r.sampled.misses;
        rep.cost = r.expected_cost;
        if (a.with_opt) rep.opt = solve_reserves_opt(trace, limits).misses;
    }

    if (rep.opt && !rep.ratio) {
        const double value = rep.cost ? *rep.cost : static_cast<double>(*rep.misses);
        rep.ratio = *rep.opt == 0 ? 1.0 : value / static_cast<double>(*rep.opt);
    }
    rep.wall_seconds = seconds_since(t0);

    std::cout << human_run_report(rep);
    if (!a.out_csv.empty()) {
        std::ofstream os = open_out(a.out_csv);
        write_csv_header(os, run_report_columns());
        write_csv_line(os, run_report_cells(rep));
        write_walltime_comment(os, rep.wall_seconds);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string kind;
    std::string out;
    std::string cnf;
    std::string assignment;
    int agents = 2;
    int pages_per_agent = 4;
    int64_t length = 32;
    uint64_t seed = 0;
    double zipf_s = 1.1;
    int k = -1;                 // fixed cache size; -1 draws the geometry
    std::vector<int> reserves;  // fixed reserves, one per agent
};

std::vector<bool> parse_assignment_file(const std::string& path, int n) {
    std::istringstream in(slurp(path));
    std::vector<bool> x;
    std::string tok;
    while (in >> tok) {
        if (tok == "1" || tok == "T" || tok == "t" || tok == "true") {
            x.push_back(true);
        } else if (tok == "0" || tok == "F" || tok == "f" || tok == "false") {
            x.push_back(false);
        } else {
            throw std::runtime_error("assignment file: unexpected token '" + tok + "'");
        }
    }
    if (static_cast<int>(x.size()) != n) {
        throw std::runtime_error("assignment file holds " + std::to_string(x.size()) +
                                 " values for " + std::to_string(n) + " variables");
    }
    return x;
}

int cmd_gen(const GenArgs& a) {
    if (a.kind == "hardness") {
        if (a.cnf.empty()) throw std::runtime_error("--kind hardness requires --cnf");
        if (a.out.empty()) {
            throw std::runtime_error("--kind hardness requires --out (sidecar files)");
        }
        const CnfFormula phi = parse_dimacs(slurp(a.cnf));
        const HardnessInstance inst = generate_instance(phi);
        {
            std::ofstream os = open_out(a.out);
            write_trace(os, inst.trace);
        }
        {
            std::ofstream os = open_out(a.out + ".prov");
            write_provenance(os, inst);
        }
        std::cout << "trace: " << a.out << " (" << inst.trace.length() << " requests, "
                  << inst.trace.config.agent_count() << " agents, k=" << inst.trace.config.k
                  << ")\n"
                  << "provenance: " << a.out << ".prov\n"
                  << "miss budget: " << inst.miss_budget << " (block repetitions "
                  << inst.c_prime << ")\n";
        if (!a.assignment.empty()) {
            const std::vector<bool> x = parse_assignment_file(a.assignment, phi.n);
            const SynthesizedStrategy strat = synthesize_strategy(phi, x);
            const AdaptedReservesRun ad =
                adapt_pp_to_reserves(inst.trace, scripted_pp_actions(strat.actions));
            std::ofstream os = open_out(a.out + ".sched");
            write_schedule(os, ad.cr.schedule);
            std::cout << "schedule: " << a.out << ".sched (replayed misses "
                      << ad.cr.ledger.misses << ", evictions " << ad.cr.ledger.evictions_real
                      << ")\n";
        }
        return 0;
    }

    GenParams gp;
    gp.agents = a.agents;
    gp.pages_per_agent = a.pages_per_agent;
    gp.length = a.length;
    gp.zipf_s = a.zipf_s;
    if (a.k >= 0 || !a.reserves.empty()) {
        if (a.k < 0) throw std::runtime_error("--reserves requires --k");
        ReserveConfig cfg;
        cfg.k = a.k;
        cfg.reserves = a.reserves;
        if (cfg.reserves.empty()) cfg.reserves.assign(static_cast<size_t>(a.agents), 0);
        if (cfg.agent_count() != a.agents) {
            throw std::runtime_error("--reserves needs exactly one entry per agent (got " +
                                     std::to_string(cfg.agent_count()) + " for " +
                                     std::to_string(a.agents) + " agents)");
        }
        gp.geometry = cfg;
    }
    Rng rng(a.seed);
    Trace trace;
    if (a.kind == "uniform") {
        trace = gen_uniform(gp, rng);
    } else if (a.kind == "zipf") {
        trace = gen_zipf(gp, rng);
    } else {
        trace = gen_adversarial(gp, rng);
    }
    if (a.out.empty()) {
        write_trace(std::cout, trace);
    } else {
        std::ofstream os = open_out(a.out);
        write_trace(os, trace);
        std::cout << "trace: " << a.out << " (" << trace.length() << " requests, "
                  << trace.config.agent_count() << " agents, k=" << trace.config.k << ")\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
    std::string suite = "all";
    std::string out_csv;
    std::string dump = "counterexample";
    int64_t instances = -1;
    uint64_t seed = 1;
    int workers = 1;
    int max_pages = 0;
    int max_agents = 0;
    int max_k = 0;
    int64_t max_t = 0;
};

int cmd_verify(const VerifyArgs& a) {
    SuiteOptions so;
    so.instances = a.instances;
    so.seed = a.seed;
    so.workers = a.workers;
    so.limits = OracleLimits::from_env();
    if (a.max_pages > 0) so.limits.max_pages = a.max_pages;
    if (a.max_agents > 0) so.limits.max_agents = a.max_agents;
    if (a.max_k > 0) so.limits.max_k = a.max_k;
    if (a.max_t > 0) so.limits.max_t = a.max_t;

    const Clock::time_point t0 = Clock::now();
    std::vector<SuiteReport> reports;
    if (a.suite == "all") {
        reports = run_all_suites(so);
    } else if (a.suite == "offline") {
        reports.push_back(run_offline_suite(so));
    } else if (a.suite == "fractional") {
        reports.push_back(run_fractional_suite(so));
    } else if (a.suite == "rounding") {
        reports.push_back(run_rounding_suite(so));
    } else if (a.suite == "equiv") {
        reports.push_back(run_equiv_suite(so));
    } else {
        reports.push_back(run_hardness_suite(so));
    }
    const double wall = seconds_since(t0);

    print_suite_table(std::cout, reports);
    std::cout << "wall seconds: " << fmt_double(wall) << '\n';
    if (!a.out_csv.empty()) {
        std::ofstream os = open_out(a.out_csv);
        write_suite_csv(os, reports);
        write_walltime_comment(os, wall);
    }

    bool failed = false;
    for (const SuiteReport& rep : reports) {
        if (rep.passed()) continue;
        failed = true;
        if (rep.counterexample) {
            const std::string path = a.dump + "-" + rep.suite + ".txt";
            std::ofstream os = open_out(path);
            write_trace(os, *rep.counterexample);
            std::cout << "counterexample trace written to " << path << '\n';
        }
    }
    return failed ? EXIT_BREACH : 0;
}

// ---------------------------------------------------------------------------
// equiv
// ---------------------------------------------------------------------------

struct EquivArgs {
    std::string trace_path;
    std::string direction;
    std::string inner = "lru";
    std::string out_csv;
};

int cmd_equiv(const EquivArgs& a) {
    const Trace trace = load_trace_checked(a.trace_path);
    const OracleLimits limits = OracleLimits::from_env();
    const Clock::time_point t0 = Clock::now();
    const std::vector<std::string> columns = {
        "direction",  "inner",      "trace",          "requests",   "misses",
        "evictions_in", "evictions_out", "relocations_out", "charged_out", "max_extra"};

    if (a.direction == "pp-to-reserves") {
        PPActionFn inner;
        if (a.inner == "lru") {
            inner = pp_lru_policy(trace);
        } else if (a.inner == "opt") {
            inner = scripted_pp_actions(solve_pp_opt(trace, limits).witness_actions);
        } else {
            throw std::runtime_error("pp-to-reserves supports --inner lru|opt");
        }
        const AdaptedReservesRun ad = adapt_pp_to_reserves(trace, inner);
        std::cout << "inner public-private run: misses " << ad.pp.misses << ", removals "
                  << ad.pp.removals << ", relocations " << ad.pp.relocations << '\n';
        std::cout << "mirrored reserves run: misses " << ad.cr.ledger.misses
                  << ", real evictions " << ad.cr.ledger.evictions_real << ", dummy evictions "
                  << ad.cr.ledger.evictions_dummy << '\n';
        if (ad.cr.ledger.evictions_real != ad.pp.removals) {
            throw std::logic_error("real evictions diverge from inner removals");
        }
        std::cout << "eviction preservation: " << ad.cr.ledger.evictions_real << " == "
                  << ad.pp.removals << " [ok]\n";
        if (!a.out_csv.empty()) {
            std::ofstream os = open_out(a.out_csv);
            write_csv_header(os, columns);
            write_csv_line(os, {a.direction, a.inner, a.trace_path,
                                csv_cell(trace.length()), csv_cell(ad.pp.misses),
                                csv_cell(ad.pp.removals), csv_cell(ad.cr.ledger.evictions_real),
                                "", "", ""});
            write_walltime_comment(os, seconds_since(t0));
        }
        return 0;
    }
    if (a.direction != "reserves-to-pp") {
        throw std::runtime_error("--direction must be pp-to-reserves or reserves-to-pp");
    }
    RunResult inner_run;
    if (a.inner == "lru") {
        inner_run = run_lru(trace);
    } else if (a.inner == "offline") {
        inner_run = run_offline(trace).run;
    } else if (a.inner == "opt") {
        inner_run = replay_reserves_schedule(trace, solve_reserves_opt(trace, limits).schedule);
    } else {
        throw std::runtime_error("reserves-to-pp supports --inner lru|offline|opt");
    }
    const AdaptedPublicPrivateRun ph = adapt_reserves_to_pp(trace, inner_run);
    int max_extra = 0;
    for (int e : ph.extras) max_extra = std::max(max_extra, e);
    std::cout << "inner reserves run: misses " << inner_run.ledger.misses << ", evictions "
              << inner_run.ledger.evictions_total << " (" << inner_run.ledger.evictions_real
              << " real)\n";
    std::cout << "mirrored public-private run: misses " << ph.pp.misses << ", removals "
              << ph.pp.removals << ", relocations " << ph.pp.relocations << ", charged "
              << ph.pp.charged() << '\n';
    if (ph.pp.charged() > 2 * inner_run.ledger.evictions_total || max_extra > 1) {
        throw std::logic_error("mirror exceeded the doubling bound");
    }
    std::cout << "doubling bound: " << ph.pp.charged() << " <= 2 * "
              << inner_run.ledger.evictions_total << ", per-step extras <= " << max_extra
              << " [ok]\n";
    if (!a.out_csv.empty()) {
        std::ofstream os = open_out(a.out_csv);
        write_csv_header(os, columns);
        write_csv_line(os, {a.direction, a.inner, a.trace_path, csv_cell(trace.length()),
                            csv_cell(ph.pp.misses), csv_cell(inner_run.ledger.evictions_total),
                            csv_cell(ph.pp.removals), csv_cell(ph.pp.relocations),
                            csv_cell(ph.pp.charged()), csv_cell(static_cast<int64_t>(max_extra))});
        write_walltime_comment(os, seconds_since(t0));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trace-driven simulator and verifier for caching with per-agent reserves"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "run one algorithm on a trace file");
    run->add_option("--algo", run_args.algo, "algorithm")
        ->required()
        ->check(CLI::IsMember({"offline", "oracle", "fractional", "rounded", "lru"}));
    run->add_option("--trace", run_args.trace_path, "trace file")->required();
    run->add_option("--seed", run_args.seed, "sampling seed (rounded)");
    run->add_flag("--audit", run_args.audit, "per-step invariant checks (breach exits 3)");
    run->add_flag("--opt", run_args.with_opt, "also compute the exact optimum and the ratio");
    run->add_option("--out", run_args.out_csv, "write a CSV report");

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "generate a trace file");
    gen->add_option("--kind", gen_args.kind, "generator")
        ->required()
        ->check(CLI::IsMember({"zipf", "uniform", "adversarial", "hardness"}));
    gen->add_option("--out", gen_args.out, "output trace file (stdout when omitted)");
    gen->add_option("--agents", gen_args.agents, "agent count");
    gen->add_option("--pages-per-agent", gen_args.pages_per_agent, "distinct pages per agent");
    gen->add_option("--length", gen_args.length, "request count (0 = header-only trace)");
    gen->add_option("--seed", gen_args.seed, "generator seed");
    gen->add_option("--zipf-s", gen_args.zipf_s, "zipf exponent");
    gen->add_option("--k", gen_args.k, "fix the cache size (otherwise drawn)");
    gen->add_option("--reserves", gen_args.reserves,
                    "fix the per-agent reserves, comma-separated (requires --k)")
        ->delimiter(',');
    gen->add_option("--cnf", gen_args.cnf, "DIMACS formula (kind hardness)");
    gen->add_option("--assignment", gen_args.assignment,
                    "balanced satisfying assignment file (kind hardness): n values 0/1, "
                    "whitespace-separated; also writes the mirrored eviction schedule");

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand("verify", "run verification suites");
    verify->add_option("--suite", verify_args.suite, "suite to run")
        ->check(CLI::IsMember({"offline", "fractional", "rounding", "equiv", "hardness", "all"}));
    verify->add_option("--instances", verify_args.instances,
                       "randomized instances per suite (0 = vacuous pass, default: calibrated)");
    verify->add_option("--seed", verify_args.seed, "base seed");
    verify->add_option("--workers", verify_args.workers, "worker threads");
    verify->add_option("--out", verify_args.out_csv, "write a CSV report");
    verify->add_option("--dump", verify_args.dump, "counterexample file prefix");
    verify->add_option("--max-pages", verify_args.max_pages, "override oracle page cap");
    verify->add_option("--max-agents", verify_args.max_agents, "override oracle agent cap");
    verify->add_option("--max-k", verify_args.max_k, "override oracle cache-size cap");
    verify->add_option("--max-t", verify_args.max_t, "override oracle request cap");

    EquivArgs equiv_args;
    CLI::App* equiv = app.add_subcommand("equiv", "mirror a strategy into the other model");
    equiv->add_option("--trace", equiv_args.trace_path, "trace file")->required();
    equiv->add_option("--direction", equiv_args.direction, "adapter direction")
        ->required()
        ->check(CLI::IsMember({"pp-to-reserves", "reserves-to-pp"}));
    equiv->add_option("--inner", equiv_args.inner,
                      "inner strategy (pp-to-reserves: lru|opt; reserves-to-pp: "
                      "lru|offline|opt)");
    equiv->add_option("--out", equiv_args.out_csv, "write a CSV report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return EXIT_VALIDATION;
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (gen->parsed()) return cmd_gen(gen_args);
        if (verify->parsed()) return cmd_verify(verify_args);
        return cmd_equiv(equiv_args);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return EXIT_IO;
    } catch (const std::logic_error& e) {
        std::cerr << "invariant breach: " << e.what() << '\n';
        return EXIT_BREACH;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_VALIDATION;
    }
}
