#pragma once

#include <utility>
#include <vector>

#include "rcache/core.hpp"

inline rcache::Trace make_trace(int k, std::vector<int> reserves,
                                const std::vector<std::pair<int, int>>& reqs) {
    rcache::Trace t;
    t.config.k = k;
    t.config.reserves = std::move(reserves);
    for (auto [agent, local] : reqs) t.requests.push_back(rcache::real_page(agent, local));
    t.validate();
    return t;
}
