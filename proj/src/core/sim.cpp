#include "core/sim.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"
#include "core/kernels.hpp"
#include "core/solver.hpp"
#include "core/suction.hpp"
#include "core/tape.hpp"

namespace sucmpc {

int SimState::active_count() const {
    int c = 0;
    for (uint8_t a : active) c += a;
    return c;
}

double compute_density(int i, std::span<const Vec3> pos, const NeighborTable& nbr, double h) {
    double rho = poly6_sq(0.0, h); // self contribution
    for (int32_t j : nbr.neighbors(i)) rho += poly6(pos[i] - pos[j], h);
    return rho;
}

double compute_lambda(int i, std::span<const Vec3> pos, const NeighborTable& nbr,
                      const FluidParams& fp, double rho0) {
    const double h = fp.kernel_radius;
    double rho = poly6_sq(0.0, h);
    Vec3 grad_sum{};
    double grad_sq = 0.0;
    for (int32_t j : nbr.neighbors(i)) {
        const Vec3 r = pos[i] - pos[j];
        rho += poly6(r, h);
        const Vec3 g = spiky_grad(r, h, fp.distance_floor);
        grad_sum += g;
        grad_sq += norm2(g);
    }
    const double c = rho / rho0 - 1.0;
    const double denom = (norm2(grad_sum) + grad_sq) / (rho0 * rho0) + fp.cfm_epsilon;
    return -c / denom;
}

double scorr(const Vec3& r, const FluidParams& fp) {
    const double h = fp.kernel_radius;
    const double w = poly6(r, h);
    if (w <= 0.0) return 0.0;
    const double dq = fp.scorr_dq_ratio * h;
    const double ratio = w / poly6_sq(dq * dq, h);
    double p = 1.0;
    for (int k = 0; k < fp.scorr_n; ++k) p *= ratio;
    return -fp.scorr_k * p;
}

void solve_density_constraint(std::span<const Vec3> pos, std::span<const uint8_t> active,
                              const NeighborTable& nbr, std::span<const double> lambda,
                              const FluidParams& fp, double rho0, std::span<Vec3> out) {
    const double h = fp.kernel_radius;
    const double inv_rho0 = 1.0 / rho0;
    const int n = static_cast<int>(pos.size());
    for (int i = 0; i < n; ++i) {
        if (!active[i]) {
            out[i] = {};
            continue;
        }
        Vec3 sum{};
        for (int32_t j : nbr.neighbors(i)) {
            const Vec3 r = pos[i] - pos[j];
            sum += (lambda[i] + lambda[j] + scorr(r, fp)) * spiky_grad(r, h, fp.distance_floor);
        }
        out[i] = sum * inv_rho0;
    }
}

void apply_suction(std::span<const Vec3> pos, std::span<const uint8_t> active, const Vec3& xe,
                   const Vec3& up, const SuctionParams& sp, std::span<Vec3> out) {
    const int n = static_cast<int>(pos.size());
    for (int i = 0; i < n; ++i)
        out[i] = active[i] ? suction_displacement(pos[i], xe, up, sp) : Vec3{};
}

double calibrate_rest_density(double h, double spacing) {
    const int m = static_cast<int>(std::ceil(h / spacing));
    double rho = 0.0;
    for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j)
            for (int k = -m; k <= m; ++k)
                rho += poly6_sq((i * i + j * j + k * k) * spacing * spacing, h);
    return rho;
}

FluidSim::FluidSim(Scene scene, FluidParams fp, SuctionParams sp, int capacity)
    : scene_(std::move(scene)), fp_(fp), sp_(sp), capacity_(capacity) {
    if (!fp_.valid()) throw ConfigError("invalid fluid parameters");
    if (!sp_.valid()) throw ConfigError("invalid suction parameters");
    if (capacity_ < 1) throw ConfigError("capacity must be >= 1");
    validate_scene(scene_);
    rho0_ = fp_.rest_density > 0 ? fp_.rest_density
                                 : calibrate_rest_density(fp_.kernel_radius, fp_.rest_spacing);
}

int FluidSim::emit(SplitMix64& rng) {
    const EmissionSpec& em = scene_.emission;
    const int room = capacity_ - state_.active_count();
    const int count = std::min(em.rate, std::max(0, room));
    for (int k = 0; k < count; ++k) {
        Vec3 p = em.point + rng.in_ball(em.jitter_radius);
        p = project_to_interior(scene_, p, fp_.boundary_margin);
        const Vec3 v = em.direction * em.speed;
        if (state_.size() < capacity_) {
            state_.pos.push_back(p);
            state_.vel.push_back(v);
            state_.active.push_back(1);
        } else {
            const int32_t s = free_slots_.back();
            free_slots_.pop_back();
            state_.pos[s] = p;
            state_.vel[s] = v;
            state_.active[s] = 1;
        }
    }
    return count;
}

int FluidSim::first_nonfinite(std::span<const Vec3> p) const {
    for (size_t i = 0; i < p.size(); ++i)
        if (state_.active[i] && !is_finite(p[i])) return static_cast<int>(i);
    return -1;
}

int FluidSim::step(const Vec3* nozzle, Tape* tape) {
    const int n = state_.size();
    const double dt = fp_.dt;
    const double h = fp_.kernel_radius;

    TapeStepRecord* rec = tape ? &tape->begin_step(state_, nozzle) : nullptr;

    pred_.resize(n);
    for (int i = 0; i < n; ++i)
        pred_[i] = state_.active[i]
                       ? state_.pos[i] + (state_.vel[i] + scene_.gravity * dt) * dt
                       : state_.pos[i];
    if (int bad = first_nonfinite(pred_); bad >= 0)
        throw SimError("non-finite particle state: particle " + std::to_string(bad) +
                       " during predict");

    // Neighbor lists are built once per step and frozen across solver
    // iterations.
    build_neighbors(pred_, state_.active, h, scene_.container, nbr_, grid_);
    if (rec) {
        rec->nbr = nbr_;
        tape->charge(rec->nbr.memory_bytes());
    }

    lambda_.resize(n);
    corr_.resize(n);
    suct_.resize(n);
    mask_.resize(n);

    uint64_t sig = branch_signature_;
    auto mix = [&sig](uint64_t v) {
        sig ^= v + 0x9e3779b97f4a7c15ULL + (sig << 6) + (sig >> 2);
    };
    for (int32_t j : nbr_.indices) mix(static_cast<uint64_t>(j));

    uint64_t clamp_count = 0;
    for (int iter = 0; iter < fp_.solver_iterations; ++iter) {
        TapeIterRecord* ir = tape ? &tape->begin_iteration(pred_, n) : nullptr;

        for (int i = 0; i < n; ++i)
            lambda_[i] = state_.active[i] ? compute_lambda(i, pred_, nbr_, fp_, rho0_) : 0.0;
        if (ir) ir->lambda = lambda_;

        solve_density_constraint(pred_, state_.active, nbr_, lambda_, fp_, rho0_, corr_);
        if (nozzle)
            apply_suction(pred_, state_.active, *nozzle, scene_.up, sp_, suct_);
        else
            std::fill(suct_.begin(), suct_.end(), Vec3{});

        for (int i = 0; i < n; ++i)
            if (state_.active[i]) pred_[i] += corr_[i] + suct_[i];
        if (int bad = first_nonfinite(pred_); bad >= 0)
            throw SimError("non-finite particle state: particle " + std::to_string(bad) +
                           " during solver iteration " + std::to_string(iter));

        for (int i = 0; i < n; ++i) {
            mask_[i] = 0;
            if (state_.active[i])
                pred_[i] = project_to_interior(scene_, pred_[i], fp_.boundary_margin, &mask_[i]);
            clamp_count += mask_[i] ? 1 : 0;
            mix(mask_[i]);
        }
        if (ir) ir->clamp_mask = mask_;
    }

    for (int i = 0; i < n; ++i) {
        if (!state_.active[i]) continue;
        state_.vel[i] = (pred_[i] - state_.pos[i]) / dt;
        state_.pos[i] = pred_[i];
    }

    int removed = 0;
    for (int i = 0; i < n; ++i) {
        if (state_.active[i] && state_.pos[i].y >= scene_.y_goal) {
            state_.active[i] = 0;
            state_.vel[i] = {};
            free_slots_.push_back(i);
            ++removed;
        }
    }
    if (rec) tape->end_step(state_);

    // per-particle branch flags after the step
    for (int i = 0; i < n; ++i) {
        mix(state_.active[i]);
        if (state_.active[i] && state_.pos[i].y < scene_.y_goal) mix(static_cast<uint64_t>(i));
    }
    mix(static_cast<uint64_t>(removed));
    mix(clamp_count);
    branch_signature_ = sig;

    return removed;
}

int FluidSim::active_below_goal() const {
    int c = 0;
    for (int i = 0; i < state_.size(); ++i)
        if (state_.active[i] && state_.pos[i].y < scene_.y_goal) ++c;
    return c;
}

} // namespace sucmpc
