#pragma once

#include <span>

#include "core/neighbor.hpp"
#include "core/params.hpp"
#include "core/vec3.hpp"

// Density-constraint stages of the position-based fluid solver.  All
// functions are pure maps over frozen inputs; the step loop composes them.

namespace sucmpc {

// SPH density at particle i, including the self contribution.
double compute_density(int i, std::span<const Vec3> pos, const NeighborTable& nbr, double h);

// Constraint multiplier lambda_i = -C_i / (sum_k |grad_k C_i|^2 + eps) with
// C_i = rho_i/rho0 - 1; density via Poly6, constraint gradients via Spiky.
double compute_lambda(int i, std::span<const Vec3> pos, const NeighborTable& nbr,
                      const FluidParams& fp, double rho0);

// Artificial pressure term; <= 0, zero outside the kernel support.
double scorr(const Vec3& r, const FluidParams& fp);

// Position corrections dx_i = (1/rho0) sum_j (l_i + l_j + scorr) grad W_spiky.
// Inactive particles receive zero.
void solve_density_constraint(std::span<const Vec3> pos, std::span<const uint8_t> active,
                              const NeighborTable& nbr, std::span<const double> lambda,
                              const FluidParams& fp, double rho0, std::span<Vec3> out);

// Rest density for a particle embedded in an infinite lattice at the given
// spacing, used when the configured rest density is non-positive.
double calibrate_rest_density(double h, double spacing);

} // namespace sucmpc
