#pragma once

#include <cmath>
#include <span>

#include "core/kernels.hpp"
#include "core/params.hpp"
#include "core/vec3.hpp"

// Differentiable suction field: a vertical lift shaped like a 2D Gaussian
// over the horizontal plane, plus an inverse-square attraction toward the
// nozzle.  Both pieces are smooth everywhere outside the distance floor.

namespace sucmpc {

// Lift magnitude for a particle at `xi` under a nozzle at `xe`.  Depends only
// on the horizontal offsets; height does not matter.
inline double upward_displacement(const Vec3& xi, const Vec3& xe, const SuctionParams& sp) {
    const double dx = xi.x - xe.x;
    const double dz = xi.z - xe.z;
    const double ex = dx * dx / (2.0 * sp.sigma_x * sp.sigma_x);
    const double ez = dz * dz / (2.0 * sp.sigma_z * sp.sigma_z);
    return sp.strength * std::exp(-(ex + ez)) / (2.0 * kPi * sp.sigma_x * sp.sigma_z);
}

// Displacement toward the nozzle with softened inverse-square magnitude.
// Zero inside the distance floor.
inline Vec3 attraction_displacement(const Vec3& xi, const Vec3& xe, const SuctionParams& sp) {
    const Vec3 w = xe - xi;
    const double r2 = norm2(w);
    if (r2 < sp.distance_floor * sp.distance_floor) return {};
    const double r = std::sqrt(r2);
    return w * (1.0 / (r * (r2 + sp.softening)));
}

// d(attraction)/d(xe) as a symmetric matrix; d/d(xi) is its negation.
inline Mat3 attraction_jacobian(const Vec3& xi, const Vec3& xe, const SuctionParams& sp) {
    const Vec3 w = xe - xi;
    const double r2 = norm2(w);
    if (r2 < sp.distance_floor * sp.distance_floor) return {};
    const double r = std::sqrt(r2);
    const double denom = r * (r2 + sp.softening);
    const double phi = 1.0 / denom;
    const double dphi = -(3.0 * r2 + sp.softening) / (denom * denom);
    return iso_plus_outer(phi, dphi / r, w);
}

// Total per-particle suction displacement: up * lift + attraction.
inline Vec3 suction_displacement(const Vec3& xi, const Vec3& xe, const Vec3& up,
                                 const SuctionParams& sp) {
    return up * upward_displacement(xi, xe, sp) + attraction_displacement(xi, xe, sp);
}

void apply_suction(std::span<const Vec3> pos, std::span<const uint8_t> active, const Vec3& xe,
                   const Vec3& up, const SuctionParams& sp, std::span<Vec3> out);

} // namespace sucmpc
