#include "cac/topology.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace cac {

int HexTopology::total_deficit() const {
    return std::accumulate(boundary_deficit.begin(), boundary_deficit.end(), 0);
}

HexTopology build_hex_topology(int rings) {
    if (rings < 0) throw std::invalid_argument("build_hex_topology: rings must be >= 0");
    HexTopology t;
    auto in_disc = [rings](int q, int r) {
        return std::max({std::abs(q), std::abs(r), std::abs(q + r)}) <= rings;
    };
    for (int q = -rings; q <= rings; ++q) {
        for (int r = -rings; r <= rings; ++r) {
            if (in_disc(q, r)) t.coords.push_back({q, r});
        }
    }
    auto find = [&](AxialCoord c) -> int {
        const auto it = std::find(t.coords.begin(), t.coords.end(), c);
        return it == t.coords.end() ? -1 : static_cast<int>(it - t.coords.begin());
    };
    t.by_direction.resize(t.size());
    t.neighbors.resize(t.size());
    t.boundary_deficit.resize(t.size());
    for (std::size_t c = 0; c < t.size(); ++c) {
        for (std::size_t d = 0; d < 6; ++d) {
            const AxialCoord n{t.coords[c].q + HexTopology::kDirections[d].q,
                               t.coords[c].r + HexTopology::kDirections[d].r};
            const int idx = in_disc(n.q, n.r) ? find(n) : -1;
            t.by_direction[c][d] = idx;
            if (idx >= 0) t.neighbors[c].push_back(idx);
        }
        t.boundary_deficit[c] = 6 - static_cast<int>(t.neighbors[c].size());
    }
    return t;
}

int handle_boundary_handoff(const HexTopology& topology, int from_cell, RandomStream& rng,
                            bool allow_self) {
    int total = 0;
    for (std::size_t c = 0; c < topology.size(); ++c) {
        if (!allow_self && static_cast<int>(c) == from_cell) continue;
        total += topology.boundary_deficit[c];
    }
    if (total == 0) {
        return from_cell;
    }
    auto pick = static_cast<int>(rng.index(static_cast<std::uint64_t>(total)));
    for (std::size_t c = 0; c < topology.size(); ++c) {
        if (!allow_self && static_cast<int>(c) == from_cell) continue;
        pick -= topology.boundary_deficit[c];
        if (pick < 0) return static_cast<int>(c);
    }
    return from_cell;
}

}  // namespace cac
