#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/neighbor.hpp"
#include "core/params.hpp"
#include "core/scene.hpp"
#include "core/sim.hpp"
#include "core/vec3.hpp"

namespace sucmpc {

// One recorded solver iteration: positions entering the iteration, the
// multipliers computed from them, and which coordinates the boundary
// projection clamped.
struct TapeIterRecord {
    std::vector<Vec3> p;
    std::vector<double> lambda;
    std::vector<uint8_t> clamp_mask;
};

// One recorded simulation step.  Neighbor lists and active flags are discrete
// structures: they are cached as constants and not differentiated through.
struct TapeStepRecord {
    std::vector<Vec3> x0, v0;      // state entering the step
    std::vector<uint8_t> active0;  // active at step start
    std::vector<Vec3> x1;          // committed positions
    std::vector<uint8_t> active1;  // active after removal
    bool suction_on = false;
    Vec3 nozzle;
    NeighborTable nbr;
    std::vector<TapeIterRecord> iters;
};

// Recorded computation graph of one rollout.  Nodes are vectorized sub-steps
// (predict, multipliers, corrections, suction, projection) and cache the
// forward values the reverse pass needs, so each step's adjoint is computed
// independently and chained backwards.
class Tape {
public:
    Tape(Scene scene, FluidParams fp, SuctionParams sp, double rho0,
         size_t memory_budget_bytes = kDefaultBudget);

    static constexpr size_t kDefaultBudget = 512ull << 20;

    const std::vector<TapeStepRecord>& steps() const { return steps_; }
    int horizon() const { return static_cast<int>(steps_.size()); }
    bool empty() const { return steps_.empty(); }
    size_t memory_bytes() const { return bytes_; }

    // recording interface (used by FluidSim::step)
    TapeStepRecord& begin_step(const SimState& s, const Vec3* nozzle);
    TapeIterRecord& begin_iteration(std::span<const Vec3> p, int n);
    void end_step(const SimState& s);
    void charge(size_t bytes); // throws TapeError past the budget

    // Loss over the recorded post-step states: sum over steps and active
    // particles of 1/2 (y_goal - y)^2 below the goal height, 0 otherwise.
    double loss_value() const;

    // Adjoint accumulation in reverse step order; returns dL/d(nozzle) for
    // every recorded step.  `state_weights`, when given, scales each post-step
    // state's loss term (size = horizon); used by linearity checks.
    std::vector<Vec3> backward(std::span<const double> state_weights = {}) const;

    // Re-runs every recorded step from its cached inputs and returns the
    // final state; bitwise equal to the recorded forward by construction.
    SimState replay() const;

    // test hook: corrupts one adjoint seed inside backward()
    void corrupt_adjoint_for_testing() { corrupt_ = true; }

private:
    Scene scene_;
    FluidParams fp_;
    SuctionParams sp_;
    double rho0_;
    size_t budget_;
    size_t bytes_ = 0;
    bool corrupt_ = false;
    std::vector<TapeStepRecord> steps_;
};

} // namespace sucmpc
