#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/scene.hpp"
#include "core/vec3.hpp"

namespace sucmpc {

// Per-particle neighbor lists in CSR form.  Lists hold only active particles
// strictly within the kernel radius, never the particle itself, sorted by
// index so results are independent of build order.
struct NeighborTable {
    std::vector<int32_t> offsets; // size n+1
    std::vector<int32_t> indices;

    std::span<const int32_t> neighbors(int i) const {
        return {indices.data() + offsets[i], static_cast<size_t>(offsets[i + 1] - offsets[i])};
    }
    int count(int i) const { return offsets[i + 1] - offsets[i]; }
    size_t memory_bytes() const {
        return offsets.capacity() * sizeof(int32_t) + indices.capacity() * sizeof(int32_t);
    }
};

// Scratch buffers reused across steps.
struct NeighborGrid {
    std::vector<int32_t> cell_start;
    std::vector<int32_t> cell_of;
    std::vector<int32_t> sorted;
};

// Uniform-grid neighbor search with cell size h over the given domain.
// Positions outside the domain are clamped to edge cells, which keeps the
// result identical to the all-pairs search for any input.
void build_neighbors(std::span<const Vec3> pos, std::span<const uint8_t> active, double h,
                     const Box& domain, NeighborTable& out, NeighborGrid& grid);

} // namespace sucmpc
