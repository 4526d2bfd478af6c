// Acceptance suite: runs the paper-style studies at desk scale and checks
// every shipped claim at its stated tolerance, printing one line per
// criterion.  Exit code 0 only if all criteria hold.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/control.hpp"
#include "core/experiment.hpp"
#include "core/metrics.hpp"
#include "core/neighbor.hpp"
#include "core/rng.hpp"
#include "core/rollout.hpp"
#include "core/scene.hpp"
#include "core/sim.hpp"
#include "core/solver.hpp"
#include "core/tape.hpp"

using namespace sucmpc;
namespace fs = std::filesystem;

namespace {

int g_failed = 0;
int g_total = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    ++g_total;
    if (!pass) ++g_failed;
    std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string fmt_tau(const std::optional<int>& t) {
    return t ? std::to_string(*t) : std::string("--");
}

// ---- criterion 1: adjoint vs central finite differences --------------------

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        int particles;
        int horizon;
        uint64_t seed;
    };
    const Case cases[] = {{60, 3, 1}, {80, 4, 2}, {100, 5, 3}};
    double worst = 0.0;
    bool pass = true;
    for (const Case& c : cases) {
        ExperimentConfig cfg;
        cfg.seed = c.seed;
        cfg.gradcheck.particles = c.particles;
        cfg.gradcheck.horizon = c.horizon;
        cfg.gradcheck.delta = 1e-4;
        GradcheckSetup setup = make_gradcheck_setup(cfg);

        FluidSim sim(setup.scene, setup.fluid, setup.suction, c.particles);
        SplitMix64 rng(c.seed ^ 0x67d5ad3f5c1e8aULL);
        const Vec3 center = setup.scene.emission.point;
        const int side = static_cast<int>(std::ceil(std::cbrt(double(c.particles))));
        Vec3 centroid{};
        for (int i = 0; i < c.particles; ++i) {
            Vec3 p = center + Vec3{(i % side - side / 2.0) * setup.fluid.rest_spacing,
                                   ((i / side) % side - side / 2.0) * setup.fluid.rest_spacing,
                                   (i / (side * side) - side / 2.0) * setup.fluid.rest_spacing};
            p += rng.in_ball(0.05 * setup.fluid.rest_spacing);
            p = project_to_interior(setup.scene, p, setup.fluid.boundary_margin);
            sim.state().pos.push_back(p);
            sim.state().vel.push_back({});
            sim.state().active.push_back(1);
            centroid += p;
        }
        centroid = centroid / c.particles;
        for (int t = 0; t < 5; ++t) sim.step(nullptr, nullptr);

        std::vector<Vec3> controls;
        Vec3 nozzle = centroid + Vec3{0.7, 2.2, -0.4};
        for (int t = 0; t < c.horizon; ++t) {
            nozzle += Vec3{0.03 + rng.uniform(-0.01, 0.01), 0.01 + rng.uniform(-0.01, 0.01),
                           -0.02 + rng.uniform(-0.01, 0.01)};
            controls.push_back(nozzle);
        }

        FluidSim taped = sim;
        Tape tape(setup.scene, setup.fluid, setup.suction, sim.rest_density());
        rollout(taped, controls, &tape);
        const std::vector<Vec3> analytic = tape.backward();
        FdOptions opt;
        opt.delta = 1e-4;
        const FdResult fd = finite_difference_gradient(sim, controls, opt);
        const GradientReport rep = compare_gradients(analytic, fd.gradient, 1e-3);
        worst = std::max(worst, rep.max_rel_error);
        pass = pass && rep.pass;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pass = pass && secs < 120.0;
    report(1, "gradient correctness (3 scenes, 50-100 particles, horizon 3-5)", pass,
           "max rel error " + fmt(worst) + " vs 1e-3, runtime " + fmt(secs) + "s");
}

// ---- criterion 2: momentum antisymmetry ------------------------------------

void criterion_momentum() {
    FluidParams fp;
    const Box domain{{-10, -10, -10}, {30, 30, 30}};
    const double rho0 = calibrate_rest_density(fp.kernel_radius, fp.rest_spacing);
    SplitMix64 rng(20240601);
    NeighborTable nbr;
    NeighborGrid grid;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(46));
        std::vector<Vec3> pos;
        std::vector<uint8_t> active(n, 1);
        for (int i = 0; i < n; ++i) pos.push_back(Vec3{10, 10, 10} + rng.in_ball(1.8));
        build_neighbors(pos, active, fp.kernel_radius, domain, nbr, grid);
        std::vector<double> lam(n);
        for (int i = 0; i < n; ++i) lam[i] = compute_lambda(i, pos, nbr, fp, rho0);
        std::vector<Vec3> out(n);
        solve_density_constraint(pos, active, nbr, lam, fp, rho0, out);
        Vec3 total{};
        double max_norm = 0.0;
        for (const Vec3& d : out) {
            total += d;
            max_norm = std::max(max_norm, norm(d));
        }
        if (max_norm > 0) worst_ratio = std::max(worst_ratio, norm(total) / (n * max_norm));
    }
    report(2, "momentum antisymmetry of the density corrections", worst_ratio <= 1e-10,
           "worst |sum|/(N max) = " + fmt(worst_ratio) + " vs 1e-10");
}

// ---- criterion 3: neighbor search equals brute force ------------------------

void criterion_neighbors() {
    const Box domain{{0, 0, 0}, {8, 8, 8}};
    NeighborTable table;
    NeighborGrid grid;
    SplitMix64 rng(777);
    bool all_equal = true;
    for (int trial = 0; trial < 50 && all_equal; ++trial) {
        const int n = 20 + static_cast<int>(rng.below(481));
        std::vector<Vec3> pos;
        std::vector<uint8_t> active;
        for (int i = 0; i < n; ++i) {
            pos.push_back({rng.uniform(-1, 9), rng.uniform(-1, 9), rng.uniform(-1, 9)});
            active.push_back(rng.uniform01() < 0.95 ? 1 : 0);
        }
        const double h = 0.5 + rng.uniform01();
        build_neighbors(pos, active, h, domain, table, grid);
        for (int i = 0; i < n && all_equal; ++i) {
            std::set<int> want;
            if (active[i])
                for (int j = 0; j < n; ++j)
                    if (j != i && active[j] && norm2(pos[i] - pos[j]) < h * h) want.insert(j);
            const auto got_span = table.neighbors(i);
            const std::set<int> got(got_span.begin(), got_span.end());
            if (got != want) all_equal = false;
        }
    }
    report(3, "spatial hash equals all-pairs search (50 clouds, N<=500)", all_equal,
           all_equal ? "exact set equality on every cloud" : "mismatch found");
}

// ---- criteria 4-6, 8: desk-scale preset studies -----------------------------

struct Study {
    std::map<std::string, std::vector<RunResult>> results; // policy -> per-seed
    std::map<std::string, std::vector<fs::path>> run_dirs;
};

Study run_study(const std::string& preset_name, const std::vector<std::string>& policies,
                const std::vector<uint64_t>& seeds, const fs::path& root) {
    Study study;
    struct Job {
        std::string policy;
        size_t seed_idx;
    };
    std::vector<Job> jobs;
    for (const std::string& p : policies) {
        study.results[p].resize(seeds.size());
        study.run_dirs[p].resize(seeds.size());
        for (size_t i = 0; i < seeds.size(); ++i) jobs.push_back({p, i});
    }

    auto run_job = [&](const Job& job) {
        ExperimentConfig cfg;
        cfg.scene_preset = preset_name;
        cfg.policy.kind = policy_kind_from_string(job.policy);
        cfg.capacity = 600;
        cfg.seed = seeds[job.seed_idx];
        cfg.total_steps = 1200; // warm-up 200 + 1000 controlled
        cfg.threads = 1;
        cfg.out_dir = (root / (preset_name + "_" + job.policy + "_s" +
                               std::to_string(seeds[job.seed_idx])))
                          .string();
        study.results[job.policy][job.seed_idx] = run_simulate(cfg);
        study.run_dirs[job.policy][job.seed_idx] = cfg.out_dir;
    };

    // two runs in flight, matching the available cores
    for (size_t k = 0; k < jobs.size(); k += 2) {
        std::future<void> other;
        if (k + 1 < jobs.size()) other = std::async(std::launch::async, run_job, jobs[k + 1]);
        run_job(jobs[k]);
        if (other.valid()) other.get();
        std::fprintf(stderr, "[acceptance] %s study: %zu/%zu runs done\n", preset_name.c_str(),
                     std::min(jobs.size(), k + 2), jobs.size());
    }
    return study;
}

double mean_residual(const std::vector<RunResult>& rs) {
    double m = 0;
    for (const RunResult& r : rs) m += r.residual;
    return m / rs.size();
}

bool all_reach_tau90(const std::vector<RunResult>& rs) {
    return std::all_of(rs.begin(), rs.end(), [](const RunResult& r) { return bool(r.tau90); });
}

bool none_reach_tau90(const std::vector<RunResult>& rs) {
    return std::none_of(rs.begin(), rs.end(), [](const RunResult& r) { return bool(r.tau90); });
}

std::string tau_list(const std::vector<RunResult>& rs) {
    std::string out;
    for (size_t i = 0; i < rs.size(); ++i) out += (i ? "/" : "") + fmt_tau(rs[i].tau90);
    return out;
}

// per-seed tau90 comparison: true iff both reach and mpc is strictly faster
bool mpc_faster_each_seed(const Study& s, std::string* detail) {
    const auto& mpc = s.results.at("mpc");
    const auto& e2e = s.results.at("end_to_emit");
    bool ok = true;
    for (size_t i = 0; i < mpc.size(); ++i) {
        const bool seed_ok = mpc[i].tau90 && e2e[i].tau90 && *mpc[i].tau90 < *e2e[i].tau90;
        ok = ok && seed_ok;
        *detail += (i ? ", " : "") + fmt_tau(mpc[i].tau90) + "<" + fmt_tau(e2e[i].tau90);
    }
    return ok;
}

void criterion_case1(const Study& s) {
    const double mpc = mean_residual(s.results.at("mpc"));
    const double fend = mean_residual(s.results.at("fixed_end"));
    const double fmid = mean_residual(s.results.at("fixed_middle"));
    const bool residual_order = mpc < fend && mpc <= fmid;
    const bool tau_order = all_reach_tau90(s.results.at("mpc")) &&
                           none_reach_tau90(s.results.at("fixed_emission")) &&
                           none_reach_tau90(s.results.at("fixed_end")) &&
                           none_reach_tau90(s.results.at("fixed_middle"));
    report(4, "case-1 policy ordering at desk scale", residual_order && tau_order,
           "mean residual mpc " + fmt(100 * mpc) + "% vs end " + fmt(100 * fend) + "% / middle " +
               fmt(100 * fmid) + "%; tau90 mpc " + tau_list(s.results.at("mpc")) +
               ", emission/end/middle " + tau_list(s.results.at("fixed_emission")) + " " +
               tau_list(s.results.at("fixed_end")) + " " +
               tau_list(s.results.at("fixed_middle")));
}

void criterion_case1_speed(const Study& s) {
    std::string detail;
    const bool ok = mpc_faster_each_seed(s, &detail);
    report(5, "case-1 suction speed: mpc tau90 beats end-to-emit per seed", ok,
           "tau90 per seed: " + detail);
}

void criterion_case2(const Study& s) {
    std::string speed_detail;
    const bool speed_ok = mpc_faster_each_seed(s, &speed_detail);
    const bool reach_ok = all_reach_tau90(s.results.at("mpc")) &&
                          all_reach_tau90(s.results.at("fixed_emission")) &&
                          none_reach_tau90(s.results.at("fixed_end"));
    report(6, "case-2 policy ordering at desk scale", reach_ok && speed_ok,
           "tau90 mpc " + tau_list(s.results.at("mpc")) + ", emission " +
               tau_list(s.results.at("fixed_emission")) + ", end " +
               tau_list(s.results.at("fixed_end")) + "; mpc vs end-to-emit: " + speed_detail);
}

void criterion_feasibility(const std::vector<const Study*>& studies) {
    int pairs = 0;
    int violations = 0;
    double worst = 0.0;
    for (const Study* s : studies) {
        for (const fs::path& dir : s->run_dirs.at("mpc")) {
            std::ifstream in(dir / "trajectory.csv");
            std::string line;
            std::getline(in, line); // header
            std::vector<Vec3> traj;
            while (std::getline(in, line)) {
                Vec3 p;
                int step;
                if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &step, &p.x, &p.y, &p.z) == 4)
                    traj.push_back(p);
            }
            for (size_t i = 0; i + 1 < traj.size(); ++i) {
                const double d = norm(traj[i + 1] - traj[i]);
                worst = std::max(worst, d);
                ++pairs;
                if (d > 0.05 + 1e-9) ++violations;
            }
        }
    }
    report(8, "every executed MPC step honors the 0.05 cm clamp", pairs > 0 && violations == 0,
           std::to_string(pairs) + " steps, " + std::to_string(violations) +
               " violations, max step " + fmt(worst) + " cm");
}

// ---- criterion 7: emission sweep heatmap shape ------------------------------

void criterion_sweep(const fs::path& root) {
    ExperimentConfig cfg;
    cfg.scene_preset = "case1";
    cfg.policy.kind = PolicyKind::mpc;
    cfg.capacity = 600;
    cfg.seed = 1;
    cfg.total_steps = 1200;
    cfg.sweep_spacing = 4.5; // 12 perimeter points on the preset cavity
    cfg.threads = 2;
    cfg.out_dir = (root / "sweep").string();
    run_sweep(cfg);

    const Scene scene = preset("case1");
    const auto specs = emission_sweep(scene, cfg.sweep_spacing);
    if (specs.size() != 12) {
        report(7, "sweep: central emissions give shorter trajectories", false,
               "expected 12 sweep points, got " + std::to_string(specs.size()));
        return;
    }

    std::vector<double> lengths(specs.size(), -1.0);
    {
        std::ifstream in(root / "sweep" / "sweep.csv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            int idx;
            double ex, ez, len;
            if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &idx, &ex, &ez, &len) == 4)
                if (idx >= 0 && idx < static_cast<int>(lengths.size())) lengths[idx] = len;
        }
    }
    for (double v : lengths)
        if (v < 0) {
            report(7, "sweep: central emissions give shorter trajectories", false,
                   "a sweep point failed; see sweep.csv");
            return;
        }

    // middle points sit nearest the wall projections of the cavity center;
    // corner points nearest a corner; first index wins ties
    const Box& c = scene.container;
    const Vec3 center = c.center();
    const Vec3 proj[4] = {{center.x, 0, c.min.z},
                          {center.x, 0, c.max.z},
                          {c.min.x, 0, center.z},
                          {c.max.x, 0, center.z}};
    const Vec3 corners[4] = {{c.min.x, 0, c.min.z},
                             {c.min.x, 0, c.max.z},
                             {c.max.x, 0, c.min.z},
                             {c.max.x, 0, c.max.z}};
    auto horizontal_dist = [](const Vec3& a, const Vec3& b) {
        const double dx = a.x - b.x, dz = a.z - b.z;
        return std::sqrt(dx * dx + dz * dz);
    };
    std::vector<std::pair<double, int>> by_center, by_corner;
    for (size_t i = 0; i < specs.size(); ++i) {
        double dc = 1e18, dk = 1e18;
        for (const Vec3& p : proj) dc = std::min(dc, horizontal_dist(specs[i].point, p));
        for (const Vec3& p : corners) dk = std::min(dk, horizontal_dist(specs[i].point, p));
        by_center.emplace_back(dc, static_cast<int>(i));
        by_corner.emplace_back(dk, static_cast<int>(i));
    }
    std::stable_sort(by_center.begin(), by_center.end());
    std::stable_sort(by_corner.begin(), by_corner.end());
    std::set<int> middle;
    for (int k = 0; k < 3; ++k) middle.insert(by_center[k].second);
    std::vector<int> corner;
    for (const auto& [d, i] : by_corner) {
        if (corner.size() == 3) break;
        if (!middle.count(i)) corner.push_back(i);
    }
    double mean_mid = 0, mean_corner = 0;
    std::string mids, cors;
    for (int i : middle) {
        mean_mid += lengths[i] / 3.0;
        mids += std::to_string(i) + ":" + fmt(lengths[i]) + " ";
    }
    for (int i : corner) {
        mean_corner += lengths[i] / 3.0;
        cors += std::to_string(i) + ":" + fmt(lengths[i]) + " ";
    }
    report(7, "sweep: central emissions give shorter trajectories", mean_mid < mean_corner,
           "middle mean " + fmt(mean_mid) + " cm {" + mids + "} vs corner mean " +
               fmt(mean_corner) + " cm {" + cors + "}");
}

// ---- criterion 9: convergence-time unit examples ----------------------------

void criterion_metric_examples() {
    bool ok = true;

    SuctionCurve a;
    a.t0 = 0;
    a.tf = 4;
    const double fa[] = {1.0, 0.9, 0.6, 0.45, 0.2};
    for (int t = 0; t <= 4; ++t) a.samples.emplace_back(t, fa[t]);
    ok = ok && convergence_time(a, 50.0) == std::optional<int>(3);

    SuctionCurve b;
    b.t0 = 0;
    b.tf = 2;
    b.samples = {{0, 1.0}, {1, 0.95}, {2, 0.9}};
    ok = ok && !convergence_time(b, 50.0).has_value();

    SuctionCurve c;
    c.t0 = 10;
    c.tf = 13;
    c.samples = {{10, 0.4}, {11, 0.3}, {12, 0.2}, {13, 0.19}};
    ok = ok && convergence_time(c, 50.0) == std::optional<int>(2);

    report(9, "convergence-time examples", ok,
           ok ? "all three examples exact" : "an example value disagrees");
}

// ---- criterion 10: byte-identical reruns -------------------------------------

void criterion_determinism(const fs::path& root) {
    auto run_once = [&](const std::string& tag) {
        ExperimentConfig cfg;
        cfg.scene_preset = "case1";
        cfg.policy.kind = PolicyKind::mpc;
        cfg.capacity = 600;
        cfg.seed = 11;
        cfg.total_steps = 240; // warm-up plus a short controlled phase
        cfg.threads = 2;       // candidate evaluation runs in parallel
        cfg.out_dir = (root / "determinism" / tag).string();
        run_simulate(cfg);
        return fs::path(cfg.out_dir);
    };
    const fs::path a = run_once("a");
    const fs::path b = run_once("b");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    bool ok = true;
    for (const char* name : {"result.json", "curve.csv", "trajectory.csv"})
        ok = ok && slurp(a / name) == slurp(b / name) && !slurp(a / name).empty();

    ExperimentConfig gc;
    gc.seed = 4;
    gc.gradcheck.particles = 50;
    gc.gradcheck.horizon = 3;
    gc.out_dir = (root / "determinism" / "gc_a").string();
    run_gradcheck(gc);
    gc.out_dir = (root / "determinism" / "gc_b").string();
    run_gradcheck(gc);
    ok = ok && slurp(root / "determinism" / "gc_a" / "gradient_report.json") ==
                   slurp(root / "determinism" / "gc_b" / "gradient_report.json");

    report(10, "repeated runs are byte-identical", ok,
           ok ? "simulate (threads=2) and gradcheck outputs match exactly"
              : "outputs differ between reruns");
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path root = fs::temp_directory_path() / "sucmpc_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    criterion_gradients();
    criterion_momentum();
    criterion_neighbors();
    criterion_metric_examples();
    criterion_determinism(root);

    const std::vector<uint64_t> seeds{1, 2, 3};
    std::fprintf(stderr, "[acceptance] running the case-1 desk-scale study...\n");
    const Study case1 = run_study(
        "case1", {"mpc", "fixed_emission", "fixed_end", "fixed_middle", "end_to_emit"}, seeds,
        root / "case1");
    criterion_case1(case1);
    criterion_case1_speed(case1);

    std::fprintf(stderr, "[acceptance] running the case-2 desk-scale study...\n");
    const Study case2 = run_study("case2", {"mpc", "fixed_emission", "fixed_end", "end_to_emit"},
                                  seeds, root / "case2");
    criterion_case2(case2);

    criterion_feasibility({&case1, &case2});

    std::fprintf(stderr, "[acceptance] running the emission-point sweep...\n");
    criterion_sweep(root);

    const double minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    std::printf("%d/%d criteria passed in %.1f minutes\n", g_total - g_failed, g_total, minutes);
    return g_failed == 0 ? 0 : 1;
}
