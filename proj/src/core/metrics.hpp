#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/vec3.hpp"

namespace sucmpc {

// Remaining-fluid fraction over time.  Fractions are normalized by the count
// at suction start t0, so they can transiently exceed 1 while emission keeps
// running.
struct SuctionCurve {
    std::vector<std::pair<int, double>> samples; // (step, fraction)
    int t0 = 0;
    int tf = 0;

    double final_fraction() const { return samples.empty() ? 1.0 : samples.back().second; }
    std::string to_csv() const; // header "step,fraction"
};

// Builds the curve from per-step below-goal counts, one count per step from
// t0 to tf inclusive.  The reference volume is the count at t0.
SuctionCurve record_curve(std::span<const int> below_goal_counts, int t0);

// Steps after t0 until the curve drops to (100-p)% of its start value, per
// the convergence-time metric; empty when never reached.
std::optional<int> convergence_time(const SuctionCurve& curve, double percent);

// Total path length of the executed nozzle trajectory.
double trajectory_length(std::span<const Vec3> controls);

struct RunResult {
    std::string policy;
    uint64_t seed = 0;
    std::string config_hash;
    double residual = 1.0;
    std::optional<int> tau50;
    std::optional<int> tau60;
    std::optional<int> tau90;
    double trajectory_length_cm = 0.0;
    bool emission_ongoing = false; // emission still active after t0
    int reference_count = 0;       // active particles at t0
    SuctionCurve curve;

    std::string to_json() const;
};

std::string trajectory_to_csv(std::span<const Vec3> controls, int t0);

} // namespace sucmpc
