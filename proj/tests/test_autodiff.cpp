#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/rollout.hpp"
#include "core/scene.hpp"
#include "core/sim.hpp"
#include "core/suction.hpp"
#include "core/tape.hpp"

using namespace sucmpc;

namespace {

Scene tall_box(double y_goal) {
    Scene s;
    s.container = {{0, 0, 0}, {16, 60, 16}};
    s.emission = {{8, 5, 8}, {0, -1, 0}, 4, 20.0, 0.2};
    s.flow_path = {{2, 1, 8}, {14, 1, 8}};
    s.warmup_steps = 0;
    s.y_goal = y_goal;
    return s;
}

SuctionParams gentle_suction() {
    SuctionParams sp;
    sp.strength = 2.0;
    sp.softening = 1.0;
    return sp;
}

FluidSim make_blob_sim(const Scene& scene, const FluidParams& fp, const SuctionParams& sp,
                       int count, uint64_t seed, const Vec3& center) {
    FluidSim sim(scene, fp, sp, count);
    SplitMix64 rng(seed);
    const int side = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(count))));
    for (int i = 0; i < count; ++i) {
        Vec3 p = center + Vec3{(i % side - side / 2.0) * fp.rest_spacing,
                               ((i / side) % side - side / 2.0) * fp.rest_spacing,
                               (i / (side * side) - side / 2.0) * fp.rest_spacing};
        p += rng.in_ball(0.05 * fp.rest_spacing);
        sim.state().pos.push_back(p);
        sim.state().vel.push_back({});
        sim.state().active.push_back(1);
    }
    return sim;
}

std::vector<Vec3> drift_controls(const Vec3& start, int horizon, uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Vec3> u;
    Vec3 p = start;
    for (int t = 0; t < horizon; ++t) {
        p += Vec3{0.03 + rng.uniform(-0.01, 0.01), 0.01 + rng.uniform(-0.01, 0.01),
                  -0.02 + rng.uniform(-0.01, 0.01)};
        u.push_back(p);
    }
    return u;
}

bool states_equal(const SimState& a, const SimState& b) {
    if (a.size() != b.size()) return false;
    for (int i = 0; i < a.size(); ++i)
        if (!(a.pos[i] == b.pos[i]) || !(a.vel[i] == b.vel[i]) || a.active[i] != b.active[i])
            return false;
    return true;
}

} // namespace

TEST_CASE("taped and untaped rollouts are bitwise identical") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    const SuctionParams sp = gentle_suction();
    FluidSim base = make_blob_sim(scene, fp, sp, 40, 3, {8, 10, 8});
    const std::vector<Vec3> controls = drift_controls({8.5, 12, 7.7}, 3, 4);

    FluidSim plain = base;
    rollout(plain, controls, nullptr);

    FluidSim taped = base;
    Tape tape(base.scene(), fp, sp, base.rest_density());
    rollout(taped, controls, &tape);

    CHECK(states_equal(plain.state(), taped.state()));
    CHECK(tape.horizon() == 3);
}

TEST_CASE("tape replay reproduces the recorded trajectory bitwise") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    const SuctionParams sp = gentle_suction();
    FluidSim sim = make_blob_sim(scene, fp, sp, 30, 5, {8, 8, 8});
    const std::vector<Vec3> controls = drift_controls({8.2, 10, 8.1}, 4, 6);

    Tape tape(scene, fp, sp, sim.rest_density());
    rollout(sim, controls, &tape);

    const SimState replayed = tape.replay();
    CHECK(states_equal(replayed, sim.state()));
}

TEST_CASE("horizon zero leaves the state untouched and the tape empty") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    FluidSim sim = make_blob_sim(scene, fp, gentle_suction(), 10, 7, {8, 6, 8});
    const SimState before = sim.state();

    Tape tape(scene, fp, sim.suction_params(), sim.rest_density());
    rollout(sim, {}, &tape);
    CHECK(states_equal(sim.state(), before));
    CHECK(tape.empty());
    CHECK(tape.loss_value() == 0.0);
    CHECK(tape.backward().empty());
}

TEST_CASE("all particles above the goal mean zero loss and zero gradient") {
    const Scene scene = tall_box(5.0); // blob sits above the goal height
    FluidParams fp;
    FluidSim sim = make_blob_sim(scene, fp, gentle_suction(), 12, 9, {8, 20, 8});
    const std::vector<Vec3> controls = drift_controls({8, 22, 8}, 3, 10);

    Tape tape(scene, fp, sim.suction_params(), sim.rest_density());
    rollout(sim, controls, &tape);
    CHECK(tape.loss_value() == 0.0);
    for (const Vec3& g : tape.backward()) CHECK(norm(g) == 0.0);
}

TEST_CASE("single particle, single iteration: gradient matches the closed form") {
    Scene scene = tall_box(30.0);
    scene.gravity = {0, 0, 0};
    FluidParams fp;
    fp.solver_iterations = 1;
    const SuctionParams sp = gentle_suction();
    FluidSim sim(scene, fp, sp, 1);
    const Vec3 x{8, 6, 8};
    sim.state().pos.push_back(x);
    sim.state().vel.push_back({});
    sim.state().active.push_back(1);

    const Vec3 e{8.8, 7.5, 7.4};
    Tape tape(scene, fp, sp, sim.rest_density());
    rollout(sim, std::vector<Vec3>{e}, &tape);
    const std::vector<Vec3> grad = tape.backward();
    REQUIRE(grad.size() == 1);

    // independent derivation: q = x + up*du + dp, L = 1/2 (goal - q_y)^2
    const double du = upward_displacement(x, e, sp);
    const Vec3 w = e - x;
    const double r = norm(w);
    const double phi = 1.0 / (r * (r * r + sp.softening));
    const double dphi =
        -(3.0 * r * r + sp.softening) / std::pow(r * (r * r + sp.softening), 2);
    const double qy = x.y + du + w.y * phi;
    const double lbar = qy - scene.y_goal;
    // d(q_y)/de_k = du (x_k - e_k)/sigma^2 on the horizontal axes
    //             + phi delta_{yk} + (dphi/r) w_y w_k
    const double sx2 = sp.sigma_x * sp.sigma_x;
    const double sz2 = sp.sigma_z * sp.sigma_z;
    const Vec3 expect{lbar * (du * (x.x - e.x) / sx2 + (dphi / r) * w.y * w.x),
                      lbar * (phi + (dphi / r) * w.y * w.y),
                      lbar * (du * (x.z - e.z) / sz2 + (dphi / r) * w.y * w.z)};

    CHECK(grad[0].x == doctest::Approx(expect.x).epsilon(1e-10));
    CHECK(grad[0].y == doctest::Approx(expect.y).epsilon(1e-10));
    CHECK(grad[0].z == doctest::Approx(expect.z).epsilon(1e-10));
}

TEST_CASE("adjoint agrees with central finite differences on small scenes") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    const SuctionParams sp = gentle_suction();

    for (const uint64_t seed : {11u, 12u, 13u}) {
        FluidSim sim = make_blob_sim(scene, fp, sp, 50, seed, {8, 10, 8});
        for (int t = 0; t < 3; ++t) sim.step(nullptr, nullptr); // settle a little
        const std::vector<Vec3> controls = drift_controls({8.6, 12.2, 7.6}, 3, seed + 100);

        FluidSim taped = sim;
        Tape tape(scene, fp, sp, sim.rest_density());
        rollout(taped, controls, &tape);
        const std::vector<Vec3> analytic = tape.backward();

        const FdResult fd = finite_difference_gradient(sim, controls, {});
        const GradientReport rep = compare_gradients(analytic, fd.gradient, 1e-3);
        CAPTURE(seed);
        CAPTURE(rep.max_rel_error);
        CHECK(rep.pass);
    }
}

TEST_CASE("backward is linear in the per-state loss weights") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    FluidSim sim = make_blob_sim(scene, fp, gentle_suction(), 30, 21, {8, 9, 8});
    const std::vector<Vec3> controls = drift_controls({8.4, 11, 7.9}, 3, 22);

    Tape tape(scene, fp, sim.suction_params(), sim.rest_density());
    rollout(sim, controls, &tape);

    const std::vector<double> w1{1.0, 0.0, 0.5};
    const std::vector<double> w2{0.0, 2.0, 1.0};
    const double a = 0.7, b = -1.3;
    std::vector<double> mix(3);
    for (int i = 0; i < 3; ++i) mix[i] = a * w1[i] + b * w2[i];

    const std::vector<Vec3> g1 = tape.backward(w1);
    const std::vector<Vec3> g2 = tape.backward(w2);
    const std::vector<Vec3> gm = tape.backward(mix);
    for (int t = 0; t < 3; ++t) {
        const Vec3 combo = a * g1[t] + b * g2[t];
        CHECK(norm(gm[t] - combo) <= 1e-12 * std::max(1.0, norm(combo)));
    }

    CHECK_THROWS_AS((void)tape.backward(std::vector<double>{1.0}), TapeError);
}

TEST_CASE("tape memory budget is enforced, not silently truncated") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    FluidSim sim = make_blob_sim(scene, fp, gentle_suction(), 40, 31, {8, 8, 8});
    Tape tape(scene, fp, sim.suction_params(), sim.rest_density(), 4096);
    const std::vector<Vec3> controls = drift_controls({8, 10, 8}, 5, 32);
    CHECK_THROWS_AS(rollout(sim, controls, &tape), TapeError);
}

TEST_CASE("corrupted adjoint hook makes the comparison fail") {
    const Scene scene = tall_box(25.0);
    FluidParams fp;
    const SuctionParams sp = gentle_suction();
    FluidSim sim = make_blob_sim(scene, fp, sp, 20, 41, {8, 9, 8});
    const std::vector<Vec3> controls = drift_controls({8.3, 10.5, 8}, 2, 42);

    FluidSim taped = sim;
    Tape tape(scene, fp, sp, sim.rest_density());
    tape.corrupt_adjoint_for_testing();
    rollout(taped, controls, &tape);
    const std::vector<Vec3> analytic = tape.backward();
    const FdResult fd = finite_difference_gradient(sim, controls, {});
    const GradientReport rep = compare_gradients(analytic, fd.gradient, 1e-3);
    CHECK(!rep.pass);
}
