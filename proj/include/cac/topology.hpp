#pragma once

#include "cac/random.hpp"

#include <array>
#include <vector>

namespace cac {

struct AxialCoord {
    int q = 0;
    int r = 0;
    friend bool operator==(const AxialCoord&, const AxialCoord&) = default;
};

/// A hexagonal disc of cells in axial coordinates.
struct HexTopology {
    /// Direction d moves by kDirections[d]; opposite directions differ by 3.
    static constexpr std::array<AxialCoord, 6> kDirections{
        {{+1, 0}, {+1, -1}, {0, -1}, {-1, 0}, {-1, +1}, {0, +1}}};

    std::vector<AxialCoord> coords;
    /// Neighbour in each of the six directions, -1 when it lies outside.
    std::vector<std::array<int, 6>> by_direction;
    std::vector<std::vector<int>> neighbors;
    /// 6 - degree.
    std::vector<int> boundary_deficit;

    std::size_t size() const { return coords.size(); }
    int degree(int cell) const { return static_cast<int>(neighbors[static_cast<std::size_t>(cell)].size()); }
    int total_deficit() const;
};

/// rings = 0 is one cell; rings = 2 is the 19-cell layout.
HexTopology build_hex_topology(int rings);

/// Destination for a handoff that leaves the region: a boundary cell drawn
/// with probability proportional to its deficit. With `allow_self` false the
/// source is excluded unless it is the only candidate.
int handle_boundary_handoff(const HexTopology& topology, int from_cell, RandomStream& rng,
                            bool allow_self = true);

}  // namespace cac
