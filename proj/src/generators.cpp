#include "rcache/generators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcache {

ZipfSampler::ZipfSampler(int n, double s) {
    if (n < 1) throw std::runtime_error("zipf sampler needs at least one item");
    cdf_.resize(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        total += 1.0 / std::pow(static_cast<double>(i + 1), s);
        cdf_[i] = total;
    }
    for (int i = 0; i < n; ++i) cdf_[i] /= total;
    cdf_.back() = 1.0;
}

int ZipfSampler::sample(Rng& rng) const {
    double u = rng.uniform01();
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<int>(it - cdf_.begin());
}

ReserveConfig random_config(Rng& rng, int max_agents, int max_k) {
    ReserveConfig cfg;
    int m = static_cast<int>(rng.uniform_int(1, std::max(1, max_agents)));
    cfg.k = static_cast<int>(rng.uniform_int(1, std::max(1, max_k)));
    cfg.reserves.resize(m, 0);
    int budget = cfg.k - 1;  // keeps sum(k_i) < k
    for (int i = 0; i < m && budget > 0; ++i) {
        int r = static_cast<int>(rng.uniform_int(0, budget));
        cfg.reserves[i] = r;
        budget -= r;
    }
    return cfg;
}

namespace {

// Page pool in a fixed global order: agent-major, local-minor.
std::vector<Page> page_pool(int agents, int pages_per_agent) {
    std::vector<Page> pool;
    for (int a = 1; a <= agents; ++a) {
        for (int l = 0; l < pages_per_agent; ++l) pool.push_back(real_page(a, l));
    }
    return pool;
}

ReserveConfig drawn_geometry(const GenParams& params, Rng& rng) {
    if (params.geometry) {
        params.geometry->validate();
        return *params.geometry;
    }
    ReserveConfig cfg;
    cfg.reserves.resize(params.agents);
    int total = 0;
    for (int i = 0; i < params.agents; ++i) {
        cfg.reserves[i] = static_cast<int>(rng.uniform_int(0, std::max(0, params.pages_per_agent / 2)));
        total += cfg.reserves[i];
    }
    int n = params.agents * params.pages_per_agent;
    int pub = static_cast<int>(rng.uniform_int(1, params.agents + 2));
    cfg.k = total + pub;
    // Keep at least one page out of cache when the universe allows it, so the
    // generated traces actually exercise eviction decisions.
    if (cfg.k >= n && n > total + 1) cfg.k = n - 1;
    return cfg;
}

}  // namespace

Trace gen_uniform(const GenParams& params, Rng& rng) {
    if (params.agents < 1 || params.pages_per_agent < 1 || params.length < 0)
        throw std::runtime_error("generator needs agents and pages-per-agent >= 1, length >= 0");
    Trace trace;
    trace.config = drawn_geometry(params, rng);
    std::vector<Page> pool = page_pool(params.agents, params.pages_per_agent);
    for (int64_t t = 0; t < params.length; ++t) {
        trace.requests.push_back(pool[rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1)]);
    }
    trace.validate();
    return trace;
}

Trace gen_zipf(const GenParams& params, Rng& rng) {
    if (params.agents < 1 || params.pages_per_agent < 1 || params.length < 0)
        throw std::runtime_error("generator needs agents and pages-per-agent >= 1, length >= 0");
    Trace trace;
    trace.config = drawn_geometry(params, rng);
    std::vector<Page> pool = page_pool(params.agents, params.pages_per_agent);
    ZipfSampler sampler(static_cast<int>(pool.size()), params.zipf_s);
    for (int64_t t = 0; t < params.length; ++t) {
        trace.requests.push_back(pool[sampler.sample(rng)]);
    }
    trace.validate();
    return trace;
}

Trace gen_adversarial(const GenParams& params, Rng& rng) {
    if (params.agents < 1 || params.pages_per_agent < 1 || params.length < 0)
        throw std::runtime_error("generator needs agents and pages-per-agent >= 1, length >= 0");
    Trace trace;
    if (params.geometry) {
        params.geometry->validate();
        trace.config = *params.geometry;
    } else {
        trace.config.reserves.resize(params.agents);
        int total = 0;
        for (int i = 0; i < params.agents; ++i) {
            trace.config.reserves[i] = static_cast<int>(rng.uniform_int(0, 1));
            total += trace.config.reserves[i];
        }
        int n = params.agents * params.pages_per_agent;
        trace.config.k =
            std::min(total + 1 + static_cast<int>(rng.uniform_int(0, params.agents)), n - 1);
        if (trace.config.k <= total) trace.config.k = total + 1;
    }
    // Cycle over one more page than fits; interleave agents so reserves matter.
    std::vector<Page> pool = page_pool(params.agents, params.pages_per_agent);
    std::vector<Page> cycle;
    int want = std::min<int>(trace.config.k + 1, static_cast<int>(pool.size()));
    for (int i = 0; i < want; ++i) {
        // agent-interleaved order: round-robin over agents, then local ids
        int a = i % params.agents;
        int l = i / params.agents;
        cycle.push_back(real_page(a + 1, l));
    }
    for (int64_t t = 0; t < params.length; ++t) {
        trace.requests.push_back(cycle[t % cycle.size()]);
    }
    trace.validate();
    return trace;
}

Trace random_fractional_instance(Rng& rng, const RandomInstanceCaps& caps) {
    // Pool size must exceed k yet leave room in the trace for a full warmup
    // sweep, since the universe is whatever the trace actually requests.
    const int max_pool = static_cast<int>(std::min<int64_t>(caps.max_pages, caps.max_t - 1));
    Trace trace;
    trace.config = random_config(rng, caps.max_agents, std::max(1, std::min(caps.max_k, max_pool - 1)));
    int m = trace.config.agent_count();
    std::vector<int> pages(m, 0);
    int total = 0;
    for (int i = 0; i < m; ++i) {
        pages[i] = trace.config.reserves[i];
        total += pages[i];
    }
    // Cover every reserve, then pad past k so at least one page stays out.
    while (total <= trace.config.k) {
        pages[rng.uniform_int(0, m - 1)] += 1;
        ++total;
    }
    while (total < max_pool && rng.uniform_int(0, 1) == 1) {
        pages[rng.uniform_int(0, m - 1)] += 1;
        ++total;
    }
    std::vector<Page> pool;
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < pages[i]; ++l) pool.push_back(real_page(i + 1, l));
    }
    // Warmup sweep in random order so every page enters the universe, then
    // uniform traffic for the remaining steps.
    for (size_t i = pool.size(); i > 1; --i) {
        std::swap(pool[i - 1], pool[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
    }
    trace.requests = pool;
    int64_t len = rng.uniform_int(1, std::max<int64_t>(1, caps.max_t - static_cast<int64_t>(pool.size())));
    for (int64_t t = 0; t < len; ++t) {
        trace.requests.push_back(pool[rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1)]);
    }
    trace.validate();
    return trace;
}

Trace random_instance(Rng& rng, const RandomInstanceCaps& caps) {
    Trace trace;
    trace.config = random_config(rng, caps.max_agents, caps.max_k);
    int m = trace.config.agent_count();
    // Distribute a distinct-page budget over the agents; every agent gets a
    // chance at zero pages, but the instance as a whole has at least one.
    int budget = static_cast<int>(rng.uniform_int(1, std::max(1, caps.max_pages)));
    std::vector<int> pages(m, 0);
    for (int b = 0; b < budget; ++b) {
        pages[rng.uniform_int(0, m - 1)] += 1;
    }
    std::vector<Page> pool;
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < pages[i]; ++l) pool.push_back(real_page(i + 1, l));
    }
    if (pool.empty()) pool.push_back(real_page(1, 0));
    int64_t len = rng.uniform_int(1, std::max<int64_t>(1, caps.max_t));
    for (int64_t t = 0; t < len; ++t) {
        trace.requests.push_back(pool[rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1)]);
    }
    trace.validate();
    return trace;
}

}  // namespace rcache
