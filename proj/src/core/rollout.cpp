#include "core/rollout.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "core/error.hpp"

namespace sucmpc {

void rollout(FluidSim& sim, std::span<const Vec3> controls, Tape* tape) {
    for (const Vec3& u : controls) sim.step(&u, tape);
}

double rollout_loss(const FluidSim& base, std::span<const Vec3> controls, uint64_t* signature) {
    FluidSim sim = base;
    const double goal = sim.scene().y_goal;
    double loss = 0.0;
    for (const Vec3& u : controls) {
        sim.step(&u, nullptr);
        const SimState& s = sim.state();
        for (int i = 0; i < s.size(); ++i) {
            if (!s.active[i]) continue;
            const double y = s.pos[i].y;
            if (y < goal) loss += 0.5 * (goal - y) * (goal - y);
        }
    }
    if (signature) *signature = sim.branch_signature();
    return loss;
}

FdResult finite_difference_gradient(const FluidSim& base, std::span<const Vec3> controls,
                                    const FdOptions& opt) {
    if (opt.delta <= 0) throw ConfigError("finite differences need delta > 0");
    const int steps = static_cast<int>(controls.size());
    FdResult res;
    res.gradient.resize(steps);
    res.crossed.assign(static_cast<size_t>(steps) * 3, 0);

    std::vector<Vec3> work(controls.begin(), controls.end());
    auto slope_at = [&](int t, int axis, double saved, double delta, bool* clean) {
        uint64_t sig_plus = 0, sig_minus = 0;
        work[t][axis] = saved + delta;
        const double lp = rollout_loss(base, work, &sig_plus);
        work[t][axis] = saved - delta;
        const double lm = rollout_loss(base, work, &sig_minus);
        work[t][axis] = saved;
        *clean = sig_plus == sig_minus;
        return (lp - lm) / (2.0 * delta);
    };

    for (int t = 0; t < steps; ++t) {
        for (int axis = 0; axis < 3; ++axis) {
            const double saved = work[t][axis];
            double delta = opt.delta;
            double slope = 0.0;
            bool settled = false;
            for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
                // a crossing shows up either as a discrete-branch difference
                // between the +/- runs or as inconsistency against the
                // half-step estimate
                bool clean_full = false, clean_half = false;
                const double full = slope_at(t, axis, saved, delta, &clean_full);
                const double half = slope_at(t, axis, saved, 0.5 * delta, &clean_half);
                slope = half;
                const double tol = 2e-4 * std::max(std::abs(half), 1e-8);
                if (clean_full && clean_half && std::abs(full - half) <= tol) {
                    settled = true;
                    break;
                }
                delta *= 0.5;
            }
            res.gradient[t][axis] = slope;
            if (!settled) res.crossed[static_cast<size_t>(t) * 3 + axis] = 1;
        }
    }
    return res;
}

GradientReport compare_gradients(std::span<const Vec3> analytic, std::span<const Vec3> fd,
                                 double threshold, double abs_floor) {
    if (analytic.size() != fd.size())
        throw ConfigError("gradient comparison: length mismatch");
    GradientReport rep;
    rep.analytic.assign(analytic.begin(), analytic.end());
    rep.finite_difference.assign(fd.begin(), fd.end());
    rep.threshold = threshold;
    for (size_t t = 0; t < analytic.size(); ++t) {
        for (int axis = 0; axis < 3; ++axis) {
            const double a = analytic[t][axis];
            const double b = fd[t][axis];
            const double abs_err = std::abs(a - b);
            const double rel = abs_err / std::max(std::abs(a), abs_floor);
            rep.rel_error.push_back(rel);
            rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_step = static_cast<int>(t);
                rep.worst_axis = axis;
            }
        }
    }
    rep.pass = rep.max_rel_error <= threshold;
    return rep;
}

std::string GradientReport::to_json() const {
    nlohmann::ordered_json j;
    auto vecs = [](const std::vector<Vec3>& vs) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const Vec3& v : vs) arr.push_back({v.x, v.y, v.z});
        return arr;
    };
    j["analytic"] = vecs(analytic);
    j["finite_difference"] = vecs(finite_difference);
    j["rel_error"] = rel_error;
    j["max_rel_error"] = max_rel_error;
    j["max_abs_error"] = max_abs_error;
    j["worst_step"] = worst_step;
    j["worst_axis"] = worst_axis;
    j["delta"] = delta;
    j["threshold"] = threshold;
    j["pass"] = pass;
    return j.dump(2) + "\n";
}

} // namespace sucmpc
