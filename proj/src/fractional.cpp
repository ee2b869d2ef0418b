#include "rcache/fractional.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace rcache {

namespace {

constexpr double kMassEps = 1e-12;

struct PageVar {
    int agent = 0;
    double x = 0.0;              // eviction fraction, current interval
    double interval_load = 0.0;  // alpha mass routed into this interval
    bool saturated = false;      // x has reached 1
    std::vector<double> history;
};

struct Solver {
    const Trace& trace;
    const FractionalOptions& opts;
    int n = 0;
    int agents = 0;
    double eta = 0.0;
    double log_bound = 0.0;

    std::map<Page, int> index;
    std::vector<Page> pages;
    std::vector<PageVar> vars;
    std::vector<int> agent_page_count;

    double primal = 0.0;
    double dual = 0.0;
    double max_load = 0.0;
    double load_slack = 1e-6;
    std::vector<double> step_delta;

    FractionalResult out;

    Solver(const Trace& t, const FractionalOptions& o) : trace(t), opts(o) {}

    void init() {
        trace.validate();
        for (const Page& p : trace.requests) {
            if (index.emplace(p, 0).second) pages.push_back(p);
        }
        std::sort(pages.begin(), pages.end());
        n = static_cast<int>(pages.size());
        agents = trace.config.agent_count();
        agent_page_count.assign(agents + 1, 0);
        for (int i = 0; i < n; ++i) {
            index[pages[i]] = i;
            agent_page_count[pages[i].agent]++;
        }
        const int k = trace.config.k;
        if (n < k) {
            throw std::invalid_argument("fractional: universe has " + std::to_string(n) +
                                        " pages but the cache holds " + std::to_string(k));
        }
        for (int i = 1; i <= agents; ++i) {
            if (agent_page_count[i] < trace.config.reserve(i)) {
                throw std::invalid_argument("fractional: agent " + std::to_string(i) +
                                            " has fewer pages than its reserve");
            }
        }
        eta = 1.0 / k;
        log_bound = std::log(static_cast<double>(k) + 1.0);
        if (opts.fixed_step) {
            // Forward Euler reaches x = 1 an O(h) sliver of alpha late, so
            // the interval-load invariant needs discretization headroom.
            load_slack = 1e-6 + (log_bound + 2.0) * opts.fixed_dalpha;
        }

        std::set<Page> cached = fractional_initial_cache(trace);
        vars.assign(n, PageVar{});
        for (int i = 0; i < n; ++i) {
            vars[i].agent = pages[i].agent;
            vars[i].x = cached.count(pages[i]) ? 0.0 : 1.0;
            vars[i].saturated = !cached.count(pages[i]);
        }
    }

    // Eviction mass agent i may carry: pages beyond its reserve.
    double allowance(int agent) const {
        return static_cast<double>(agent_page_count[agent] - trace.config.reserve(agent));
    }

    void bump_load(int q) {
        if (vars[q].interval_load > max_load) max_load = vars[q].interval_load;
        if (vars[q].interval_load > log_bound + load_slack) {
            throw std::logic_error("fractional: interval load " +
                                   std::to_string(vars[q].interval_load) +
                                   " exceeds ln(k+1) at page " + to_string(pages[q]));
        }
    }

    void run() {
        init();
        step_delta.assign(n, 0.0);
        for (int64_t t = 0; t < trace.length(); ++t) {
            const int pt = index[trace.requests[t]];
            out.fetch_amounts.push_back(vars[pt].x);
            vars[pt].history.push_back(vars[pt].x);
            vars[pt].x = 0.0;
            vars[pt].saturated = false;
            vars[pt].interval_load = 0.0;
            std::fill(step_delta.begin(), step_delta.end(), 0.0);

            double alpha_t = 0.0;
            double step_cost = 0.0;

            // Agents whose cached mass sits exactly at the reserve freeze for
            // the rest of the step; their pages neither grow nor pay alpha.
            std::vector<char> tight(agents + 1, 0);
            std::vector<double> outside(agents + 1, 0.0);
            for (int q = 0; q < n; ++q) outside[vars[q].agent] += vars[q].x;
            for (int i = 1; i <= agents; ++i) {
                if (outside[i] >= allowance(i) - kMassEps) tight[i] = 1;
            }

            if (opts.fixed_step) {
                grow_fixed(pt, tight, outside, alpha_t, step_cost);
            } else {
                grow_events(pt, tight, outside, alpha_t, step_cost);
            }

            const double slack = opts.fixed_step ? (n + 1) * opts.fixed_dalpha : 1e-9;
            std::fill(outside.begin(), outside.end(), 0.0);
            for (int q = 0; q < n; ++q) outside[vars[q].agent] += vars[q].x;
            for (int i = 1; i <= agents; ++i) {
                if (outside[i] > allowance(i) + slack) {
                    throw std::logic_error("fractional: agent " + std::to_string(i) +
                                           " dropped below its reserve");
                }
            }

            std::vector<std::pair<Page, double>> deltas;
            for (int q = 0; q < n; ++q) {
                if (step_delta[q] > 0.0) deltas.emplace_back(pages[q], step_delta[q]);
            }
            out.step_deltas.push_back(std::move(deltas));

            out.lines.push_back({t, step_cost, alpha_t, primal, dual, max_load});
            out.total_cost += step_cost;
            if (primal > 2.0 * dual + 1e-6) {
                throw std::logic_error("fractional: primal " + std::to_string(primal) +
                                       " exceeds twice the dual " + std::to_string(dual));
            }
        }
        for (int q = 0; q < n; ++q) {
            vars[q].history.push_back(vars[q].x);
            out.x_history[pages[q]] = vars[q].history;
        }
        out.primal = primal;
        out.dual = dual;
        out.dual_violation = max_load;
    }

    double total_outside(int pt) const {
        double s = 0.0;
        for (int q = 0; q < n; ++q)
            if (q != pt) s += vars[q].x;
        return s;
    }

    // Dual objective rate per unit alpha for the current segment: the cache
    // constraint row pays n - k, each tight agent's row refunds its
    // allowance, and every fully evicted page of a non-tight agent routes
    // its share into the per-interval slack variable.
    double dual_rate(int pt, const std::vector<char>& tight) const {
        double rate = static_cast<double>(n - trace.config.k);
        for (int i = 1; i <= agents; ++i) {
            if (tight[i]) rate -= allowance(i);
        }
        for (int q = 0; q < n; ++q) {
            if (q != pt && vars[q].saturated && !tight[vars[q].agent]) rate -= 1.0;
        }
        return rate;
    }

    void grow_events(int pt, std::vector<char>& tight, std::vector<double>& outside,
                     double& alpha_t, double& step_cost) {
        const double target = static_cast<double>(n - trace.config.k);
        while (true) {
            const double deficit = target - total_outside(pt);
            if (deficit <= kMassEps) break;

            // Growth follows x' = x + eta, so over a segment of size da each
            // growing page moves to (x + eta) e^{da} - eta and any sum of
            // growing pages moves by rate * (e^{da} - 1), where rate adds
            // x + eta per page. All three event kinds solve for e^{da}.
            double rate_total = 0.0;
            std::vector<double> rate_agent(agents + 1, 0.0);
            double first_saturation = std::numeric_limits<double>::infinity();
            for (int q = 0; q < n; ++q) {
                if (q == pt || vars[q].saturated || tight[vars[q].agent]) continue;
                const double r = vars[q].x + eta;
                rate_total += r;
                rate_agent[vars[q].agent] += r;
                first_saturation = std::min(first_saturation, (1.0 + eta) / r);
            }
            if (rate_total <= 0.0) {
                throw std::logic_error("fractional: no growing pages but the cache "
                                       "constraint is still unsatisfied");
            }

            double event = 1.0 + deficit / rate_total;  // constraint satisfied
            for (int i = 1; i <= agents; ++i) {
                if (tight[i] || rate_agent[i] <= 0.0) continue;
                const double room = std::max(allowance(i) - outside[i], 0.0);
                event = std::min(event, 1.0 + room / rate_agent[i]);
            }
            event = std::min(event, first_saturation);

            const double dalpha = std::log(event);
            const double drate = dual_rate(pt, tight);
            for (int q = 0; q < n; ++q) {
                if (q == pt || vars[q].saturated || tight[vars[q].agent]) continue;
                const double before = vars[q].x;
                double after = (before + eta) * event - eta;
                if (after >= 1.0 - 1e-9) {
                    after = 1.0;
                    vars[q].saturated = true;
                }
                vars[q].x = after;
                vars[q].interval_load += dalpha;
                bump_load(q);
                primal += after - before;
                step_cost += after - before;
                step_delta[q] += after - before;
            }
            alpha_t += dalpha;
            dual += drate * dalpha;

            std::fill(outside.begin(), outside.end(), 0.0);
            for (int q = 0; q < n; ++q) outside[vars[q].agent] += vars[q].x;
            for (int i = 1; i <= agents; ++i) {
                if (!tight[i] && outside[i] >= allowance(i) - kMassEps) tight[i] = 1;
            }
        }
    }

    void grow_fixed(int pt, std::vector<char>& tight, std::vector<double>& outside,
                    double& alpha_t, double& step_cost) {
        const double target = static_cast<double>(n - trace.config.k);
        const double h = opts.fixed_dalpha;
        while (target - total_outside(pt) > kMassEps) {
            const double drate = dual_rate(pt, tight);
            bool any = false;
            for (int q = 0; q < n; ++q) {
                if (q == pt || vars[q].saturated || tight[vars[q].agent]) continue;
                any = true;
                const double before = vars[q].x;
                double after = before + (before + eta) * h;  // forward Euler
                if (after >= 1.0) {
                    after = 1.0;
                    vars[q].saturated = true;
                }
                vars[q].x = after;
                vars[q].interval_load += h;
                bump_load(q);
                primal += after - before;
                step_cost += after - before;
                step_delta[q] += after - before;
                outside[vars[q].agent] += after - before;
            }
            if (!any) {
                throw std::logic_error("fractional: no growing pages but the cache "
                                       "constraint is still unsatisfied");
            }
            alpha_t += h;
            dual += drate * h;
            for (int i = 1; i <= agents; ++i) {
                if (!tight[i] && outside[i] >= allowance(i) - kMassEps) tight[i] = 1;
            }
        }
    }
};

}  // namespace

std::set<Page> fractional_initial_cache(const Trace& trace) {
    std::map<int, std::set<Page>> by_agent;
    for (const Page& p : trace.requests) by_agent[p.agent].insert(p);

    const int agents = trace.config.agent_count();
    std::set<Page> cached;
    for (int i = 1; i <= agents; ++i) {
        const int need = trace.config.reserve(i);
        auto it = by_agent[i].begin();
        for (int got = 0; got < need; ++got, ++it) {
            if (it == by_agent[i].end()) {
                throw std::invalid_argument("fractional: agent " + std::to_string(i) +
                                            " has fewer pages than its reserve");
            }
            cached.insert(*it);
        }
    }
    std::set<Page> rest;
    for (const auto& [agent, set] : by_agent) {
        for (const Page& p : set)
            if (!cached.count(p)) rest.insert(p);
    }
    for (const Page& p : rest) {
        if (static_cast<int>(cached.size()) >= trace.config.k) break;
        cached.insert(p);
    }
    if (static_cast<int>(cached.size()) < trace.config.k) {
        throw std::invalid_argument("fractional: universe has fewer pages than the cache");
    }
    return cached;
}

FractionalResult run_fractional(const Trace& trace, const FractionalOptions& opts) {
    Solver solver(trace, opts);
    solver.run();
    return solver.out;
}

}  // namespace rcache
