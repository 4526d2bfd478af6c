#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "core/neighbor.hpp"
#include "core/params.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"
#include "core/vec3.hpp"

namespace sucmpc {

class Tape;

// Particle state.  Arrays share one length (<= capacity); deactivated
// particles stay in place with their slot eligible for reuse by emission.
struct SimState {
    std::vector<Vec3> pos;
    std::vector<Vec3> vel;
    std::vector<uint8_t> active;

    int size() const { return static_cast<int>(pos.size()); }
    int active_count() const;
};

// Forward position-based fluid simulation with the embedded suction field.
// Owns the particle state plus reusable solver scratch; copyable so rollouts
// and candidate evaluations can fork cheaply.
class FluidSim {
public:
    FluidSim(Scene scene, FluidParams fp, SuctionParams sp, int capacity);

    const Scene& scene() const { return scene_; }
    const FluidParams& fluid_params() const { return fp_; }
    const SuctionParams& suction_params() const { return sp_; }
    int capacity() const { return capacity_; }
    double rest_density() const { return rho0_; }

    SimState& state() { return state_; }
    const SimState& state() const { return state_; }

    // Adds up to emission.rate particles at the emission point (jittered,
    // projected inside the boundary), reusing freed slots first.  Returns the
    // number emitted.
    int emit(SplitMix64& rng);

    // One full simulation step: gravity, prediction, one neighbor build, then
    // solver_iterations passes of constraint corrections + suction +
    // boundary projection, then the velocity update and removal of particles
    // at or above y_goal.  A null nozzle disables suction.  When `tape` is
    // given every differentiable sub-step is recorded; the taped step is
    // bitwise identical to the untaped one.  Returns the removed count.
    int step(const Vec3* nozzle, Tape* tape = nullptr);

    int active_below_goal() const;

    // deterministic summary of the discrete structure of the last step, used
    // by the gradient checker to detect branch crossings
    uint64_t branch_signature() const { return branch_signature_; }

private:
    Scene scene_;
    FluidParams fp_;
    SuctionParams sp_;
    int capacity_;
    double rho0_;
    SimState state_;
    std::vector<int32_t> free_slots_;

    // scratch
    NeighborTable nbr_;
    NeighborGrid grid_;
    std::vector<Vec3> pred_;
    std::vector<double> lambda_;
    std::vector<Vec3> corr_;
    std::vector<Vec3> suct_;
    std::vector<uint8_t> mask_;
    uint64_t branch_signature_ = 0;

    int first_nonfinite(std::span<const Vec3> p) const;
};

} // namespace sucmpc
