#pragma once

#include <cmath>

#include "core/vec3.hpp"

namespace sucmpc {

// Units: centimeters, seconds, unit particle mass.
struct FluidParams {
    double dt = 0.01;                  // s
    double kernel_radius = 1.0;        // h, cm
    double rest_density = 0.0;         // <= 0 selects lattice calibration at load
    double rest_spacing = 0.5;         // cm, used for calibration and seeding
    int solver_iterations = 4;
    double cfm_epsilon = 100.0;        // constraint relaxation
    double scorr_k = 0.1;
    int scorr_n = 4;
    double scorr_dq_ratio = 0.3;       // |dq| = ratio * h
    double boundary_margin = 0.01;     // cm
    double distance_floor = 1e-6;      // cm, spiky-gradient singularity guard

    bool valid() const {
        return dt > 0 && kernel_radius > 0 && solver_iterations >= 1 &&
               cfm_epsilon > 0 && scorr_dq_ratio > 0 && scorr_dq_ratio < 1 &&
               rest_spacing > 0 && boundary_margin >= 0 && distance_floor > 0;
    }
};

struct SuctionParams {
    double strength = 100.0;        // K
    double sigma_x = std::sqrt(0.5);
    double sigma_z = std::sqrt(0.5);
    double softening = 0.1;         // d, cm^2
    double distance_floor = 1e-6;   // cm

    bool valid() const {
        return strength > 0 && sigma_x > 0 && sigma_z > 0 && softening > 0 &&
               distance_floor > 0;
    }
};

} // namespace sucmpc
