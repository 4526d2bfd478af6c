#pragma once

#include <cmath>
#include <numbers>

#include "core/vec3.hpp"

// SPH kernels for the density constraint: Poly6 for density estimation,
// the Spiky gradient for constraint gradients.  Both have compact support
// of radius h.  The Jacobian/gradient variants feed the adjoint pass.

namespace sucmpc {

inline constexpr double kPi = std::numbers::pi;

// W(r,h) = 315/(64 pi h^9) (h^2 - |r|^2)^3 for |r| < h, else 0.
// Takes the squared distance; the vector overload is the usual entry point.
inline double poly6_sq(double r2, double h) {
    const double h2 = h * h;
    if (r2 >= h2) return 0.0;
    const double d = h2 - r2;
    const double h3 = h2 * h;
    return 315.0 / (64.0 * kPi * h3 * h3 * h3) * d * d * d;
}

inline double poly6(const Vec3& r, double h) { return poly6_sq(norm2(r), h); }

// grad W(r,h) = -945/(32 pi h^9) (h^2 - |r|^2)^2 * r
inline Vec3 poly6_grad(const Vec3& r, double h) {
    const double h2 = h * h;
    const double r2 = norm2(r);
    if (r2 >= h2) return {};
    const double d = h2 - r2;
    const double h3 = h2 * h;
    return r * (-945.0 / (32.0 * kPi * h3 * h3 * h3) * d * d);
}

// grad W_spiky(r,h) = -45/(pi h^6) (h - |r|)^2 r/|r| for floor < |r| < h,
// zero outside the support and inside the distance floor.  The sign is the
// true kernel gradient (the Spiky kernel decreases radially), which makes
// the density correction repel over-dense pairs; writing the magnitude with
// a +r/|r| orientation would turn the solve attractive and diverge.
inline Vec3 spiky_grad(const Vec3& r, double h, double dist_floor) {
    const double r2 = norm2(r);
    if (r2 >= h * h || r2 < dist_floor * dist_floor) return {};
    const double rn = std::sqrt(r2);
    const double d = h - rn;
    const double h3 = h * h * h;
    const double f = -45.0 / (kPi * h3 * h3) * d * d / rn;
    return r * f;
}

// d(spiky_grad)/dr as a symmetric 3x3 matrix: with f(|r|) = -c (h-|r|)^2/|r|,
// the Jacobian is f I + (f'/|r|) r r^T and f'(s) = c (h^2 - s^2)/s^2.
inline Mat3 spiky_grad_jacobian(const Vec3& r, double h, double dist_floor) {
    const double r2 = norm2(r);
    if (r2 >= h * h || r2 < dist_floor * dist_floor) return {};
    const double rn = std::sqrt(r2);
    const double d = h - rn;
    const double h3 = h * h * h;
    const double c = 45.0 / (kPi * h3 * h3);
    const double f = -c * d * d / rn;
    const double fp = c * (h * h - r2) / r2;
    return iso_plus_outer(f, fp / rn, r);
}

} // namespace sucmpc
