#include "core/tape.hpp"

#include <algorithm>
#include <string>

#include "core/error.hpp"
#include "core/kernels.hpp"
#include "core/solver.hpp"
#include "core/suction.hpp"

namespace sucmpc {

Tape::Tape(Scene scene, FluidParams fp, SuctionParams sp, double rho0, size_t memory_budget)
    : scene_(std::move(scene)), fp_(fp), sp_(sp), rho0_(rho0), budget_(memory_budget) {}

void Tape::charge(size_t bytes) {
    bytes_ += bytes;
    if (bytes_ > budget_)
        throw TapeError("tape memory budget exceeded: " + std::to_string(bytes_) + " > " +
                        std::to_string(budget_) + " bytes");
}

TapeStepRecord& Tape::begin_step(const SimState& s, const Vec3* nozzle) {
    TapeStepRecord& rec = steps_.emplace_back();
    rec.x0 = s.pos;
    rec.v0 = s.vel;
    rec.active0 = s.active;
    rec.suction_on = nozzle != nullptr;
    if (nozzle) rec.nozzle = *nozzle;
    charge(s.pos.size() * (2 * sizeof(Vec3) + 2) + sizeof(TapeStepRecord));
    return rec;
}

TapeIterRecord& Tape::begin_iteration(std::span<const Vec3> p, int n) {
    TapeIterRecord& ir = steps_.back().iters.emplace_back();
    ir.p.assign(p.begin(), p.end());
    charge(static_cast<size_t>(n) * (sizeof(Vec3) + sizeof(double) + 1));
    return ir;
}

void Tape::end_step(const SimState& s) {
    TapeStepRecord& rec = steps_.back();
    rec.x1 = s.pos;
    rec.active1 = s.active;
    charge(s.pos.size() * sizeof(Vec3));
}

double Tape::loss_value() const {
    const double goal = scene_.y_goal;
    double loss = 0.0;
    for (const TapeStepRecord& rec : steps_) {
        for (size_t i = 0; i < rec.x1.size(); ++i) {
            if (!rec.active1[i]) continue;
            const double y = rec.x1[i].y;
            if (y < goal) loss += 0.5 * (goal - y) * (goal - y);
        }
    }
    return loss;
}

std::vector<Vec3> Tape::backward(std::span<const double> state_weights) const {
    const int horizon_steps = horizon();
    std::vector<Vec3> grad(horizon_steps);
    if (horizon_steps == 0) return grad;
    if (!state_weights.empty() && static_cast<int>(state_weights.size()) != horizon_steps)
        throw TapeError("state weight count does not match the recorded horizon");

    const double goal = scene_.y_goal;
    const double dt = fp_.dt;
    const double h = fp_.kernel_radius;
    const double floor = fp_.distance_floor;
    const double inv_rho0 = 1.0 / rho0_;
    const size_t n = steps_[0].x0.size();
    const double wdq = poly6_sq(fp_.scorr_dq_ratio * fp_.scorr_dq_ratio * h * h, h);

    std::vector<Vec3> xbar(n), vbar(n), pbar(n), qbar(n), pnew(n), v_over_dt(n);
    std::vector<double> c_val(n), d_val(n), lam_bar(n);
    std::vector<Vec3> g_sum(n);

    for (int t = horizon_steps - 1; t >= 0; --t) {
        const TapeStepRecord& rec = steps_[t];
        if (rec.x0.size() != n)
            throw TapeError("particle count changed mid-tape; cannot run backward");
        const double wt = state_weights.empty() ? 1.0 : state_weights[t];

        // loss adjoint of the post-step state; removed particles are on the
        // zero branch and contribute nothing from this step on
        for (size_t i = 0; i < n; ++i) {
            if (!rec.active1[i]) continue;
            const double y = rec.x1[i].y;
            if (y < goal) xbar[i].y += wt * (y - goal);
        }

        // x_{t+1} = p_K and v_{t+1} = (p_K - x_t)/dt
        for (size_t i = 0; i < n; ++i) {
            if (!rec.active0[i]) continue;
            v_over_dt[i] = vbar[i] / dt;
            pbar[i] = xbar[i] + v_over_dt[i];
        }

        Vec3 nozzle_bar{};
        for (int k = static_cast<int>(rec.iters.size()) - 1; k >= 0; --k) {
            const TapeIterRecord& ir = rec.iters[k];
            const std::vector<Vec3>& p = ir.p;

            // projection: identity on free coordinates, zero on clamped ones
            for (size_t i = 0; i < n; ++i) {
                if (!rec.active0[i]) continue;
                Vec3 q = pbar[i];
                const uint8_t m = ir.clamp_mask[i];
                if (m & 1) q.x = 0.0;
                if (m & 2) q.y = 0.0;
                if (m & 4) q.z = 0.0;
                qbar[i] = q;
            }

            // recompute the density constraint pieces at this iteration's
            // positions (cheaper than caching them on the tape)
            for (size_t i = 0; i < n; ++i) {
                if (!rec.active0[i]) continue;
                double rho = poly6_sq(0.0, h);
                Vec3 gs{};
                double g2 = 0.0;
                for (int32_t j : rec.nbr.neighbors(static_cast<int>(i))) {
                    const Vec3 r = p[i] - p[j];
                    rho += poly6(r, h);
                    const Vec3 g = spiky_grad(r, h, floor);
                    gs += g;
                    g2 += norm2(g);
                }
                c_val[i] = rho * inv_rho0 - 1.0;
                d_val[i] = (norm2(gs) + g2) * inv_rho0 * inv_rho0 + fp_.cfm_epsilon;
                g_sum[i] = gs;
            }

            // adjoint of the multipliers: lambda_m appears in m's own
            // correction and, symmetrically, in each neighbor's
            for (size_t m = 0; m < n; ++m) {
                if (!rec.active0[m]) {
                    lam_bar[m] = 0.0;
                    continue;
                }
                double acc = 0.0;
                for (int32_t j : rec.nbr.neighbors(static_cast<int>(m))) {
                    const Vec3 g = spiky_grad(p[m] - p[j], h, floor);
                    acc += dot(qbar[m] - qbar[j], g);
                }
                lam_bar[m] = acc * inv_rho0;
            }

            // position adjoints: direct path through q = p + corr + suction,
            // then the pairwise correction terms (through the kernel gradient,
            // through scorr, and through lambda's own position dependence)
            for (size_t i = 0; i < n; ++i) pnew[i] = rec.active0[i] ? qbar[i] : Vec3{};

            for (size_t m = 0; m < n; ++m) {
                if (!rec.active0[m]) continue;
                const double cbar_coef = lam_bar[m] * (-1.0 / d_val[m]) * inv_rho0;
                const double dbar_coef =
                    lam_bar[m] * (c_val[m] / (d_val[m] * d_val[m])) * 2.0 * inv_rho0 * inv_rho0;
                for (int32_t j : rec.nbr.neighbors(static_cast<int>(m))) {
                    const Vec3 r = p[m] - p[j];
                    const Vec3 g = spiky_grad(r, h, floor);
                    const Mat3 hess = spiky_grad_jacobian(r, h, floor);
                    const Vec3 wp_grad = poly6_grad(r, h);

                    // correction term (1/rho0)(l_m + l_j + scorr) g consumed
                    // by qbar[m]
                    const double w_pair = ir.lambda[m] + ir.lambda[j] + scorr(r, fp_);
                    double s_coef = 0.0;
                    const double wp = poly6(r, h);
                    if (wp > 0.0) {
                        double ratio_pow = 1.0;
                        for (int q = 0; q < fp_.scorr_n - 1; ++q) ratio_pow *= wp / wdq;
                        s_coef = -fp_.scorr_k * fp_.scorr_n * ratio_pow / wdq;
                    }
                    Vec3 v = (hess * qbar[m]) * w_pair + wp_grad * (s_coef * dot(qbar[m], g));
                    v *= inv_rho0;

                    // lambda paths: C_m depends on |r| via Poly6, D_m via the
                    // Spiky Hessian
                    v += wp_grad * cbar_coef;
                    v += (hess * (g_sum[m] + g)) * dbar_coef;

                    pnew[m] += v;
                    pnew[j] -= v;
                }
            }

            // suction adjoints: particles and the nozzle
            if (rec.suction_on) {
                const Vec3& xe = rec.nozzle;
                const double inv_sx2 = 1.0 / (sp_.sigma_x * sp_.sigma_x);
                const double inv_sz2 = 1.0 / (sp_.sigma_z * sp_.sigma_z);
                for (size_t m = 0; m < n; ++m) {
                    if (!rec.active0[m]) continue;
                    const double ubar = dot(qbar[m], scene_.up);
                    const double du = upward_displacement(p[m], xe, sp_);
                    const double ddx = -du * (p[m].x - xe.x) * inv_sx2;
                    const double ddz = -du * (p[m].z - xe.z) * inv_sz2;
                    pnew[m].x += ubar * ddx;
                    pnew[m].z += ubar * ddz;
                    nozzle_bar.x -= ubar * ddx;
                    nozzle_bar.z -= ubar * ddz;

                    const Mat3 jac = attraction_jacobian(p[m], xe, sp_);
                    const Vec3 v = jac * qbar[m];
                    nozzle_bar += v;
                    pnew[m] -= v;
                }
            }

            for (size_t i = 0; i < n; ++i)
                if (rec.active0[i]) pbar[i] = pnew[i];
        }

        // predict: p_0 = x_t + dt (v_t + dt g)
        for (size_t i = 0; i < n; ++i) {
            if (!rec.active0[i]) continue;
            xbar[i] = pbar[i] - v_over_dt[i];
            vbar[i] = pbar[i] * dt;
        }

        grad[t] = nozzle_bar;
    }

    if (corrupt_ && !grad.empty()) grad[0] = grad[0] * 1.5 + Vec3{1.0, 0.0, 0.0};

    for (const Vec3& g : grad)
        if (!is_finite(g)) throw TapeError("non-finite adjoint in backward pass");
    return grad;
}

SimState Tape::replay() const {
    SimState final_state;
    for (const TapeStepRecord& rec : steps_) {
        FluidSim sim(scene_, fp_, sp_, std::max<int>(1, static_cast<int>(rec.x0.size())));
        sim.state().pos = rec.x0;
        sim.state().vel = rec.v0;
        sim.state().active = rec.active0;
        sim.step(rec.suction_on ? &rec.nozzle : nullptr, nullptr);
        final_state = std::move(sim.state());
    }
    return final_state;
}

} // namespace sucmpc
