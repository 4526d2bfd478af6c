#include "core/control.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/rollout.hpp"
#include "core/tape.hpp"

namespace sucmpc {

double total_loss(std::span<const Vec3> pos, std::span<const uint8_t> active, double y_goal) {
    double loss = 0.0;
    for (size_t i = 0; i < pos.size(); ++i)
        if (active[i]) loss += particle_loss(pos[i], y_goal);
    return loss;
}

void normalize_gradient(std::span<Vec3> g) {
    double max_abs = 0.0;
    for (const Vec3& v : g)
        max_abs = std::max({max_abs, std::abs(v.x), std::abs(v.y), std::abs(v.z)});
    if (max_abs == 0.0) return;
    const double inv = 1.0 / max_abs;
    for (Vec3& v : g) v *= inv;
}

Vec3 clamp_step(const Vec3& current, const Vec3& proposed, double clamp) {
    const Vec3 d = proposed - current;
    const double len = norm(d);
    if (len <= clamp) return proposed;
    return current + d * (clamp / len);
}

Vec3 project_nozzle(const Scene& scene, const MpcConfig& cfg, const Vec3& p) {
    const Box& c = scene.container;
    const double margin = 1e-6;
    return {std::clamp(p.x, c.min.x + margin, c.max.x - margin),
            std::clamp(p.y, c.min.y + cfg.nozzle_floor_offset, scene.y_goal),
            std::clamp(p.z, c.min.z + margin, c.max.z - margin)};
}

std::string MpcDiagnostics::to_json_line() const {
    nlohmann::ordered_json j;
    j["type"] = "mpc_step";
    j["iteration_loss"] = iteration_loss;
    j["non_decreasing_iterations"] = non_decreasing_iterations;
    return j.dump();
}

namespace {

// Projection plus sequential clamping from the executed position keeps the
// optimized trajectory feasible, so the rollout the gradient sees is the
// trajectory that could actually be executed.
void make_feasible(const Scene& scene, const MpcConfig& cfg, const Vec3& anchor,
                   std::vector<Vec3>& u) {
    Vec3 prev = anchor;
    for (Vec3& p : u) {
        p = project_nozzle(scene, cfg, p);
        p = clamp_step(prev, p, cfg.step_clamp);
        prev = p;
    }
}

} // namespace

Vec3 mpc_step(const FluidSim& sim, const Vec3& previous, const MpcConfig& cfg,
              MpcDiagnostics* diag) {
    if (!cfg.valid()) throw ConfigError("invalid MPC configuration");
    const Vec3 anchor = project_nozzle(sim.scene(), cfg, previous);
    std::vector<Vec3> u(static_cast<size_t>(cfg.horizon), anchor);

    double prev_loss = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.grad_iterations; ++it) {
        FluidSim work = sim;
        Tape tape(work.scene(), work.fluid_params(), work.suction_params(), work.rest_density(),
                  cfg.tape_budget_bytes);
        rollout(work, u, &tape);
        const double loss = tape.loss_value();
        if (diag) {
            diag->iteration_loss.push_back(loss);
            if (loss >= prev_loss) ++diag->non_decreasing_iterations;
        }
        prev_loss = loss;
        if (loss == 0.0) break; // nothing below the goal; gradient is zero

        std::vector<Vec3> grad = tape.backward();
        normalize_gradient(grad);
        for (int t = 0; t < cfg.horizon; ++t) u[t] -= grad[t] * cfg.learning_rate;
        make_feasible(sim.scene(), cfg, anchor, u);
    }
    return u.front();
}

Vec3 select_initial_point(const FluidSim& sim, const MpcConfig& cfg, uint64_t seed,
                          std::vector<CandidateOutcome>* outcomes) {
    const SimState& s = sim.state();
    std::vector<int> active_idx;
    for (int i = 0; i < s.size(); ++i)
        if (s.active[i]) active_idx.push_back(i);
    if (active_idx.empty())
        throw SimError("initial point selection needs at least one active particle");

    // sample without replacement when enough particles exist; candidates are
    // projected into nozzle bounds so evaluation matches later execution
    SplitMix64 rng(seed ^ 0xa02bdbf7bb3c0a7ULL);
    std::vector<Vec3> starts;
    if (static_cast<int>(active_idx.size()) <= cfg.samples) {
        for (int idx : active_idx) starts.push_back(project_nozzle(sim.scene(), cfg, s.pos[idx]));
    } else {
        std::vector<int> pool = active_idx;
        for (int k = 0; k < cfg.samples; ++k) {
            const size_t pick = k + static_cast<size_t>(rng.below(pool.size() - k));
            std::swap(pool[k], pool[pick]);
            starts.push_back(project_nozzle(sim.scene(), cfg, s.pos[pool[k]]));
        }
    }

    MpcConfig inner = cfg;
    inner.grad_iterations = cfg.init_grad_iterations;

    auto evaluate = [&](int k) {
        FluidSim fork = sim;
        Vec3 nozzle = starts[k];
        for (int t = 0; t < cfg.lookahead; ++t) {
            if (t > 0) nozzle = mpc_step(fork, nozzle, inner, nullptr);
            fork.step(&nozzle, nullptr);
        }
        return CandidateOutcome{starts[k], fork.active_below_goal(), k};
    };

    std::vector<CandidateOutcome> results(starts.size());
    if (cfg.threads > 1 && starts.size() > 1) {
        std::vector<std::future<CandidateOutcome>> futs;
        futs.reserve(starts.size());
        for (size_t k = 0; k < starts.size(); ++k)
            futs.push_back(std::async(std::launch::async, evaluate, static_cast<int>(k)));
        for (size_t k = 0; k < starts.size(); ++k) results[k] = futs[k].get();
    } else {
        for (size_t k = 0; k < starts.size(); ++k) results[k] = evaluate(static_cast<int>(k));
    }

    // order-independent reduction: (remaining, sample index) minimum
    int best = 0;
    for (size_t k = 1; k < results.size(); ++k)
        if (results[k].remaining < results[best].remaining) best = static_cast<int>(k);
    if (outcomes) *outcomes = results;
    return results[best].start;
}

PolicyKind policy_kind_from_string(const std::string& name) {
    if (name == "mpc") return PolicyKind::mpc;
    if (name == "fixed_emission") return PolicyKind::fixed_emission;
    if (name == "fixed_end") return PolicyKind::fixed_end;
    if (name == "fixed_middle") return PolicyKind::fixed_middle;
    if (name == "end_to_emit") return PolicyKind::end_to_emit;
    throw ConfigError("unknown policy '" + name + "'");
}

std::string policy_kind_to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::mpc: return "mpc";
        case PolicyKind::fixed_emission: return "fixed_emission";
        case PolicyKind::fixed_end: return "fixed_end";
        case PolicyKind::fixed_middle: return "fixed_middle";
        case PolicyKind::end_to_emit: return "end_to_emit";
    }
    return "unknown";
}

Vec3 flow_path_midpoint(const Scene& scene) {
    const auto& path = scene.flow_path;
    double total = 0.0;
    for (size_t i = 0; i + 1 < path.size(); ++i) total += norm(path[i + 1] - path[i]);
    if (total == 0.0) return path.front();
    double want = total * 0.5;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        const double seg = norm(path[i + 1] - path[i]);
        if (want <= seg) return path[i] + (path[i + 1] - path[i]) * (want / seg);
        want -= seg;
    }
    return path.back();
}

Vec3 baseline_control(const Policy& policy, int step_index, const Scene& scene) {
    switch (policy.kind) {
        case PolicyKind::fixed_emission:
            return scene.emission.point;
        case PolicyKind::fixed_end:
            return scene.flow_path.back();
        case PolicyKind::fixed_middle:
            return flow_path_midpoint(scene);
        case PolicyKind::end_to_emit: {
            const Vec3 start = scene.flow_path.back();
            const Vec3 target = scene.emission.point;
            const double span = norm(target - start);
            if (span == 0.0) return target;
            double rate = policy.end_to_emit_rate;
            if (rate <= 0.0) rate = span / 600.0;
            const double s = std::min(1.0, step_index * rate / span);
            return start + (target - start) * s;
        }
        case PolicyKind::mpc:
            throw ConfigError("mpc policy has no handcrafted control");
    }
    throw ConfigError("unknown policy kind");
}

} // namespace sucmpc
