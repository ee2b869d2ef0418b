#pragma once

#include <cstdint>
#include <optional>

#include "rcache/core.hpp"
#include "rcache/rng.hpp"

namespace rcache {

struct GenParams {
    int agents = 2;
    int pages_per_agent = 4;
    int64_t length = 32;  // number of requests; 0 gives a header-only trace
    double zipf_s = 1.1;  // zipf kind only
    // When set, used verbatim (validated) instead of drawing the geometry.
    std::optional<ReserveConfig> geometry;
};

// Geometry is drawn unless params.geometry fixes it: k in [1+sum(reserves),
// max_k], reserves drawn with sum < k.
Trace gen_uniform(const GenParams& params, Rng& rng);
Trace gen_zipf(const GenParams& params, Rng& rng);
// Cyclic sweep over one more distinct page than fits, the classic worst case
// for LRU; agents round-robin.
Trace gen_adversarial(const GenParams& params, Rng& rng);

// Random geometry helper shared by the generators and the verification
// suites: picks m agents, reserves with sum(k_i) < k, and k itself, bounded
// by the caller.
ReserveConfig random_config(Rng& rng, int max_agents, int max_k);

// Fully random instance within explicit caps (used by test suites).
struct RandomInstanceCaps {
    int max_agents = 3;
    int max_k = 5;
    int max_pages = 9;    // total distinct page budget
    int64_t max_t = 14;
};
Trace random_instance(Rng& rng, const RandomInstanceCaps& caps);

// Like random_instance, but every agent's distinct-page universe covers its
// reserve and the whole universe exceeds k, so fractional maintenance always
// has a feasible starting cache and at least one page stays out.
Trace random_fractional_instance(Rng& rng, const RandomInstanceCaps& caps);

}  // namespace rcache
