#pragma once

#include <cstdint>
#include <string>

#include "core/control.hpp"
#include "core/params.hpp"
#include "core/scene.hpp"

namespace sucmpc {

struct GradcheckConfig {
    int particles = 80;
    int horizon = 4;
    int settle_steps = 5;
    double delta = 1e-4;
    double threshold = 1e-3;
    bool corrupt_adjoint = false; // test hook: forces a failing report
};

// Everything one experiment needs.  Resolution order: built-in defaults,
// then command-line flags, then the config file (the file wins).
struct ExperimentConfig {
    std::string scene_preset = "case1";
    std::string scene_path;        // overrides the preset when set
    std::string scene_inline_json; // overrides both when set

    Policy policy;
    FluidParams fluid;
    SuctionParams suction;
    MpcConfig mpc;

    int capacity = 2000;
    uint64_t seed = 0;
    int total_steps = -1; // includes warm-up; -1 picks warmup + 1000
    std::string out_dir = "out";
    int threads = 2;
    bool verbose = false;

    double sweep_spacing = 3.6;
    int sweep_steps = -1; // per-point total; -1 follows total_steps

    GradcheckConfig gradcheck;

    // Applies the fields present in `json_text` on top of this config.
    // Unknown fields are errors.
    void apply_json(const std::string& json_text);

    Scene resolve_scene() const;

    // canonical dump of the fully resolved configuration
    std::string canonical_json() const;

    // FNV-1a hash of the canonical form, hex-encoded; embedded in outputs
    std::string hash() const;
};

} // namespace sucmpc
