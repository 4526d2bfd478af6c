#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/sim.hpp"
#include "core/tape.hpp"

namespace sucmpc {

// Runs one taped rollout, one step per control, mutating `sim` in place.
// The returned tape replays to the same final state bitwise; running with
// `tape == nullptr` gives the identical untaped trajectory.
void rollout(FluidSim& sim, std::span<const Vec3> controls, Tape* tape);

// Total loss of an untaped rollout from a copy of `base`; also reports the
// discrete-branch signature so callers can detect neighbor-set or branch
// changes between perturbed runs.
double rollout_loss(const FluidSim& base, std::span<const Vec3> controls,
                    uint64_t* signature = nullptr);

// Central finite differences of the rollout loss with respect to every
// control coordinate.  When a perturbation pair changes the discrete branch
// structure the step size is halved (up to `max_retries` times) until the
// pair agrees; coordinates that never stabilize are flagged.
struct FdOptions {
    double delta = 1e-4;
    int max_retries = 6;
};

struct FdResult {
    std::vector<Vec3> gradient;
    std::vector<uint8_t> crossed; // per coordinate (3 per step): 1 if unresolved
};

FdResult finite_difference_gradient(const FluidSim& base, std::span<const Vec3> controls,
                                    const FdOptions& opt = {});

// Adjoint/finite-difference comparison for the gradcheck interface.
struct GradientReport {
    std::vector<Vec3> analytic;
    std::vector<Vec3> finite_difference;
    std::vector<double> rel_error; // per coordinate, 3 per step
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    int worst_step = -1;
    int worst_axis = -1;
    double delta = 0.0;
    double threshold = 0.0;
    bool pass = false;

    std::string to_json() const;
};

// Relative error uses max(|analytic|, abs_floor) in the denominator.
GradientReport compare_gradients(std::span<const Vec3> analytic, std::span<const Vec3> fd,
                                 double threshold, double abs_floor = 1e-8);

} // namespace sucmpc
