// suction-mpc: experiment harness for the suction MPC library.
//
// Subcommands: simulate, sweep, gradcheck.  Flags assemble a config fragment;
// a --config file is applied afterwards and therefore takes precedence.
// Exit codes: 0 success, 1 threshold/simulation failure, 2 usage/config error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "suction/suction.h"

namespace {

struct CommonFlags {
    std::string preset;
    std::string scene_path;
    std::string policy;
    uint64_t seed = 0;
    bool seed_set = false;
    int steps = -1;
    std::string out_dir;
    std::string config_path;
    int threads = 0;
    bool verbose = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    auto* preset = cmd->add_option("--preset", f.preset, "Built-in scene preset (case1 or case2)");
    cmd->add_option("--scene", f.scene_path, "Scene config file path")->excludes(preset);
    cmd->add_option("--policy", f.policy,
                    "Control policy: mpc, fixed_emission, fixed_end, fixed_middle, end_to_emit");
    cmd->add_option("--seed", f.seed, "Random seed (64-bit)")->each([&](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--steps", f.steps, "Total steps including warm-up");
    cmd->add_option("--out", f.out_dir, "Output directory");
    cmd->add_option("--config", f.config_path, "Config file (overrides flags)");
    cmd->add_option("--threads", f.threads, "Worker threads for independent runs");
    cmd->add_flag("--verbose", f.verbose, "Per-step diagnostics on standard error");
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

// config fragment equivalent to the given flags
std::string flags_to_json(const CommonFlags& f) {
    std::ostringstream j;
    j << "{";
    bool first = true;
    auto field = [&](const std::string& text) {
        if (!first) j << ",";
        first = false;
        j << text;
    };
    if (!f.scene_path.empty())
        field("\"scene\":{\"path\":\"" + json_escape(f.scene_path) + "\"}");
    else if (!f.preset.empty())
        field("\"scene\":{\"preset\":\"" + json_escape(f.preset) + "\"}");
    if (!f.policy.empty()) field("\"policy\":\"" + json_escape(f.policy) + "\"");
    if (f.seed_set) field("\"seed\":" + std::to_string(f.seed));
    if (f.steps >= 0) field("\"total_steps\":" + std::to_string(f.steps));
    if (!f.out_dir.empty()) field("\"out_dir\":\"" + json_escape(f.out_dir) + "\"");
    if (f.threads > 0) field("\"threads\":" + std::to_string(f.threads));
    if (f.verbose) field("\"verbose\":true");
    j << "}";
    return j.str();
}

int fail_with(int code, const std::string& stage) {
    std::fprintf(stderr, "{\"error\":\"%s: %s\"}\n", stage.c_str(),
                 json_escape(suction_last_error()).c_str());
    return code == SUCTION_ERR_CONFIG ? 2 : 1;
}

int build_experiment(const CommonFlags& f, suction_experiment** exp, const char* extra_json) {
    if (int rc = suction_experiment_create(flags_to_json(f).c_str(), exp); rc != SUCTION_OK)
        return fail_with(rc, "flags");
    if (extra_json && *extra_json) {
        if (int rc = suction_experiment_apply(*exp, extra_json); rc != SUCTION_OK) {
            suction_experiment_free(*exp);
            return fail_with(rc, "options");
        }
    }
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) {
            std::fprintf(stderr, "{\"error\":\"cannot open config file %s\"}\n",
                         f.config_path.c_str());
            suction_experiment_free(*exp);
            return 2;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        if (int rc = suction_experiment_apply(*exp, ss.str().c_str()); rc != SUCTION_OK) {
            suction_experiment_free(*exp);
            return fail_with(rc, "config file");
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable-fluid suction trajectory experiments"};
    app.require_subcommand(1);

    CommonFlags sim_flags, sweep_flags, grad_flags;
    double spacing = 0.0;
    int sweep_steps = -1;
    int grad_particles = 0, grad_horizon = 0;
    double grad_delta = 0.0;

    CLI::App* simulate = app.add_subcommand("simulate", "Run warm-up plus one control policy");
    add_common_flags(simulate, sim_flags);

    CLI::App* sweep = app.add_subcommand("sweep", "MPC runs over perimeter emission points");
    add_common_flags(sweep, sweep_flags);
    sweep->add_option("--spacing", spacing, "Perimeter spacing between emission points (cm)");
    sweep->add_option("--sweep-steps", sweep_steps, "Total steps per sweep point");

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "Compare adjoint and finite-difference gradients");
    add_common_flags(gradcheck, grad_flags);
    gradcheck->add_option("--particles", grad_particles, "Seeded particle count (<= 200)");
    gradcheck->add_option("--horizon", grad_horizon, "Control steps to differentiate (<= 5)");
    gradcheck->add_option("--delta", grad_delta, "Finite-difference step (cm)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (simulate->parsed()) {
        suction_experiment* exp = nullptr;
        if (int rc = build_experiment(sim_flags, &exp, nullptr); rc != 0) return rc;
        char* result = nullptr;
        const int rc = suction_experiment_simulate(exp, &result);
        if (rc == SUCTION_OK) {
            std::fprintf(stderr, "[simulate] done\n");
            suction_string_free(result);
        }
        suction_experiment_free(exp);
        return rc == SUCTION_OK ? 0 : fail_with(rc, "simulate");
    }

    if (sweep->parsed()) {
        std::string extra;
        if (spacing > 0 || sweep_steps >= 0) {
            extra = "{\"sweep\":{";
            if (spacing > 0) extra += "\"spacing\":" + std::to_string(spacing);
            if (sweep_steps >= 0) {
                if (spacing > 0) extra += ",";
                extra += "\"steps\":" + std::to_string(sweep_steps);
            }
            extra += "}}";
        }
        suction_experiment* exp = nullptr;
        if (int rc = build_experiment(sweep_flags, &exp, extra.empty() ? nullptr : extra.c_str());
            rc != 0)
            return rc;
        int32_t failed = 0;
        const int rc = suction_experiment_sweep(exp, &failed);
        if (rc == SUCTION_OK && failed > 0)
            std::fprintf(stderr, "[sweep] %d point(s) failed; see the error column\n", failed);
        suction_experiment_free(exp);
        return rc == SUCTION_OK ? 0 : fail_with(rc, "sweep");
    }

    // gradcheck
    std::string extra;
    if (grad_particles > 0 || grad_horizon > 0 || grad_delta > 0) {
        extra = "{\"gradcheck\":{";
        bool first = true;
        auto field = [&](const std::string& text) {
            if (!first) extra += ",";
            first = false;
            extra += text;
        };
        if (grad_particles > 0) field("\"particles\":" + std::to_string(grad_particles));
        if (grad_horizon > 0) field("\"horizon\":" + std::to_string(grad_horizon));
        if (grad_delta > 0) field("\"delta\":" + std::to_string(grad_delta));
        extra += "}}";
    }
    suction_experiment* exp = nullptr;
    if (int rc = build_experiment(grad_flags, &exp, extra.empty() ? nullptr : extra.c_str());
        rc != 0)
        return rc;
    const int rc = suction_experiment_gradcheck(exp);
    suction_experiment_free(exp);
    if (rc == SUCTION_OK) return 0;
    if (rc == SUCTION_ERR_THRESHOLD) return 1;
    return fail_with(rc, "gradcheck");
}
