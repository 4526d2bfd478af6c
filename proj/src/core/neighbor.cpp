#include "core/neighbor.hpp"

#include <algorithm>
#include <cmath>

namespace sucmpc {

void build_neighbors(std::span<const Vec3> pos, std::span<const uint8_t> active, double h,
                     const Box& domain, NeighborTable& out, NeighborGrid& grid) {
    const int n = static_cast<int>(pos.size());
    const double inv_h = 1.0 / h;
    const double h2 = h * h;

    // one cell of padding so predicted positions slightly outside the domain
    // land in distinct edge cells
    const int nx = std::max(1, static_cast<int>(std::ceil((domain.max.x - domain.min.x) * inv_h))) + 2;
    const int ny = std::max(1, static_cast<int>(std::ceil((domain.max.y - domain.min.y) * inv_h))) + 2;
    const int nz = std::max(1, static_cast<int>(std::ceil((domain.max.z - domain.min.z) * inv_h))) + 2;
    const int ncells = nx * ny * nz;

    auto cell_coord = [&](double v, double lo, int dim) {
        int c = static_cast<int>(std::floor((v - lo) * inv_h)) + 1;
        return std::clamp(c, 0, dim - 1);
    };

    grid.cell_of.assign(n, -1);
    grid.cell_start.assign(ncells + 1, 0);
    for (int i = 0; i < n; ++i) {
        if (!active[i]) continue;
        const int cx = cell_coord(pos[i].x, domain.min.x, nx);
        const int cy = cell_coord(pos[i].y, domain.min.y, ny);
        const int cz = cell_coord(pos[i].z, domain.min.z, nz);
        grid.cell_of[i] = (cz * ny + cy) * nx + cx;
        ++grid.cell_start[grid.cell_of[i] + 1];
    }
    for (int c = 0; c < ncells; ++c) grid.cell_start[c + 1] += grid.cell_start[c];

    grid.sorted.assign(n, 0);
    {
        std::vector<int32_t> cursor(grid.cell_start.begin(), grid.cell_start.end() - 1);
        for (int i = 0; i < n; ++i)
            if (grid.cell_of[i] >= 0) grid.sorted[cursor[grid.cell_of[i]]++] = i;
    }

    out.offsets.assign(n + 1, 0);
    out.indices.clear();
    for (int i = 0; i < n; ++i) {
        out.offsets[i] = static_cast<int32_t>(out.indices.size());
        if (!active[i]) continue;
        const int cell = grid.cell_of[i];
        const int cx = cell % nx;
        const int cy = (cell / nx) % ny;
        const int cz = cell / (nx * ny);
        const size_t first = out.indices.size();
        for (int dz = -1; dz <= 1; ++dz) {
            const int z = cz + dz;
            if (z < 0 || z >= nz) continue;
            for (int dy = -1; dy <= 1; ++dy) {
                const int y = cy + dy;
                if (y < 0 || y >= ny) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = cx + dx;
                    if (x < 0 || x >= nx) continue;
                    const int c = (z * ny + y) * nx + x;
                    for (int s = grid.cell_start[c]; s < grid.cell_start[c + 1]; ++s) {
                        const int j = grid.sorted[s];
                        if (j == i) continue;
                        if (norm2(pos[i] - pos[j]) < h2) out.indices.push_back(j);
                    }
                }
            }
        }
        std::sort(out.indices.begin() + first, out.indices.end());
    }
    out.offsets[n] = static_cast<int32_t>(out.indices.size());
}

} // namespace sucmpc
