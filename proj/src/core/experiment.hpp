#pragma once

#include <string>

#include "core/config.hpp"
#include "core/metrics.hpp"

namespace sucmpc {

// Runs warm-up plus the configured policy and writes result.json, curve.csv
// and trajectory.csv under cfg.out_dir.  Progress goes to stderr; data only
// to files.
RunResult run_simulate(const ExperimentConfig& cfg);

// One MPC run per emission-sweep point; writes sweep.csv plus per-point
// subdirectories.  Per-point failures land in the error column and the sweep
// continues.  Returns the number of failed points.
int run_sweep(const ExperimentConfig& cfg);

// Adjoint vs central finite differences on a small seeded scene; writes
// gradient_report.json.  Returns 0 when the maximum relative error is within
// the configured threshold, 1 otherwise.
int run_gradcheck(const ExperimentConfig& cfg);

// Builds the gradcheck scene/sim/controls (also used by the acceptance
// suite, which runs the same comparison on several seeds).
struct GradcheckSetup {
    Scene scene;
    FluidParams fluid;
    SuctionParams suction;
    std::vector<Vec3> controls;
};
GradcheckSetup make_gradcheck_setup(const ExperimentConfig& cfg);

} // namespace sucmpc
