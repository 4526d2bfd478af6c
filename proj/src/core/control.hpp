#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/sim.hpp"
#include "core/vec3.hpp"

namespace sucmpc {

struct MpcConfig {
    int horizon = 10;               // planning steps per re-plan
    double learning_rate = 0.1;
    int grad_iterations = 20;
    double step_clamp = 0.05;       // cm per executed step
    int lookahead = 100;            // m, start-selection rollout length
    int samples = 10;               // Monte-Carlo start candidates
    int init_grad_iterations = 5;   // inner budget during start selection
    double nozzle_floor_offset = 0.5;
    size_t tape_budget_bytes = 512ull << 20;
    int threads = 1;                // candidate evaluation workers

    bool valid() const {
        return horizon >= 1 && learning_rate > 0 && grad_iterations >= 0 && step_clamp > 0 &&
               lookahead >= 1 && samples >= 1 && init_grad_iterations >= 0 &&
               nozzle_floor_offset >= 0 && threads >= 1;
    }
};

// Loss pieces (the cost the MPC descends).
inline double particle_loss(const Vec3& x, double y_goal) {
    return x.y < y_goal ? 0.5 * (y_goal - x.y) * (y_goal - x.y) : 0.0;
}

double total_loss(std::span<const Vec3> pos, std::span<const uint8_t> active, double y_goal);

// Scales the whole trajectory gradient so its largest component magnitude is
// exactly 1; an all-zero gradient is returned unchanged.
void normalize_gradient(std::span<Vec3> g);

// Limits the move from `current` to at most `clamp` centimeters.
Vec3 clamp_step(const Vec3& current, const Vec3& proposed, double clamp);

// Keeps the nozzle inside the container (with the configured floor offset)
// and below the goal height.
Vec3 project_nozzle(const Scene& scene, const MpcConfig& cfg, const Vec3& p);

struct MpcDiagnostics {
    std::vector<double> iteration_loss;
    int non_decreasing_iterations = 0;
    std::string to_json_line() const;
};

// One receding-horizon re-plan from the current state: initializes the
// trajectory as `previous` repeated, descends the rollout loss for
// grad_iterations with normalized gradients, projecting and chain-clamping
// the trajectory after every update, and returns the first trajectory point.
Vec3 mpc_step(const FluidSim& sim, const Vec3& previous, const MpcConfig& cfg,
              MpcDiagnostics* diag = nullptr);

struct CandidateOutcome {
    Vec3 start;
    int remaining = 0;
    int sample_index = 0;
};

// Monte-Carlo initial suction point: samples particle positions, runs the
// receding-horizon controller from each for `lookahead` steps on a copy of
// the state, and returns the sample leaving the fewest particles below the
// goal height (first index wins ties).
Vec3 select_initial_point(const FluidSim& sim, const MpcConfig& cfg, uint64_t seed,
                          std::vector<CandidateOutcome>* outcomes = nullptr);

enum class PolicyKind { mpc, fixed_emission, fixed_end, fixed_middle, end_to_emit };

struct Policy {
    PolicyKind kind = PolicyKind::mpc;
    double end_to_emit_rate = 0.0; // cm per step; <= 0 picks span/600
};

PolicyKind policy_kind_from_string(const std::string& name);
std::string policy_kind_to_string(PolicyKind kind);

// Nozzle position for a handcrafted policy at the given controlled step
// (0 = first step after warm-up).  Fixed policies hold one point; end-to-emit
// moves from the flow end to the emission point at a constant rate and then
// stays there.
Vec3 baseline_control(const Policy& policy, int step_index, const Scene& scene);

// Midpoint of the flow path by arc length; the "middle of the flow" point.
Vec3 flow_path_midpoint(const Scene& scene);

} // namespace sucmpc
