#include "suction/suction.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/experiment.hpp"
#include "core/rng.hpp"
#include "core/scene.hpp"
#include "core/sim.hpp"

using namespace sucmpc;

struct suction_scene {
    Scene scene;
};

struct suction_sim {
    FluidSim sim;
    SplitMix64 rng;
};

struct suction_experiment {
    ExperimentConfig config;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Exceptions never cross the C boundary.
template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        return set_error(SUCTION_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return set_error(SUCTION_ERR_RUNTIME, e.what());
    } catch (...) {
        return set_error(SUCTION_ERR_RUNTIME, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* suction_version(void) { return "0.1.0"; }

const char* suction_last_error(void) { return g_last_error.c_str(); }

void suction_string_free(char* s) { std::free(s); }

int suction_scene_preset(const char* name, suction_scene** out) {
    return guarded([&] {
        if (!name || !out) return set_error(SUCTION_ERR_CONFIG, "null argument");
        *out = new suction_scene{preset(name)};
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_scene_load(const char* json_text, suction_scene** out) {
    return guarded([&] {
        if (!json_text || !out) return set_error(SUCTION_ERR_CONFIG, "null argument");
        *out = new suction_scene{load_scene(json_text)};
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_scene_load_file(const char* path, suction_scene** out) {
    return guarded([&] {
        if (!path || !out) return set_error(SUCTION_ERR_CONFIG, "null argument");
        std::ifstream in(path);
        if (!in) return set_error(SUCTION_ERR_CONFIG, std::string("cannot open ") + path);
        std::stringstream ss;
        ss << in.rdbuf();
        *out = new suction_scene{load_scene(ss.str())};
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_scene_to_json(const suction_scene* scene, char** out_json) {
    return guarded([&] {
        if (!scene || !out_json) return set_error(SUCTION_ERR_CONFIG, "null argument");
        *out_json = dup_string(scene_to_json(scene->scene));
        return static_cast<int>(SUCTION_OK);
    });
}

void suction_scene_free(suction_scene* scene) { delete scene; }

int suction_sim_create(const suction_scene* scene, const char* params_json, int capacity,
                       uint64_t seed, suction_sim** out) {
    return guarded([&] {
        if (!scene || !out) return set_error(SUCTION_ERR_CONFIG, "null argument");
        ExperimentConfig cfg;
        if (params_json) cfg.apply_json(params_json);
        *out = new suction_sim{FluidSim(scene->scene, cfg.fluid, cfg.suction, capacity),
                               SplitMix64(seed)};
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_sim_step(suction_sim* sim, const double nozzle_xyz[3], int32_t* removed_out) {
    return guarded([&] {
        if (!sim) return set_error(SUCTION_ERR_CONFIG, "null argument");
        const Vec3 nozzle = nozzle_xyz ? Vec3{nozzle_xyz[0], nozzle_xyz[1], nozzle_xyz[2]}
                                       : Vec3{};
        const int removed = sim->sim.step(nozzle_xyz ? &nozzle : nullptr, nullptr);
        if (removed_out) *removed_out = removed;
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_sim_emit(suction_sim* sim, int32_t* emitted_out) {
    return guarded([&] {
        if (!sim) return set_error(SUCTION_ERR_CONFIG, "null argument");
        const int emitted = sim->sim.emit(sim->rng);
        if (emitted_out) *emitted_out = emitted;
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_sim_counts(const suction_sim* sim, int32_t* active_out, int32_t* below_goal_out) {
    return guarded([&] {
        if (!sim) return set_error(SUCTION_ERR_CONFIG, "null argument");
        if (active_out) *active_out = sim->sim.state().active_count();
        if (below_goal_out) *below_goal_out = sim->sim.active_below_goal();
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_sim_positions(const suction_sim* sim, double* xyz_out, int32_t max_particles,
                          int32_t* written_out) {
    return guarded([&] {
        if (!sim || !xyz_out) return set_error(SUCTION_ERR_CONFIG, "null argument");
        const SimState& s = sim->sim.state();
        int32_t written = 0;
        for (int i = 0; i < s.size() && written < max_particles; ++i) {
            if (!s.active[i]) continue;
            xyz_out[written * 3 + 0] = s.pos[i].x;
            xyz_out[written * 3 + 1] = s.pos[i].y;
            xyz_out[written * 3 + 2] = s.pos[i].z;
            ++written;
        }
        if (written_out) *written_out = written;
        return static_cast<int>(SUCTION_OK);
    });
}

void suction_sim_free(suction_sim* sim) { delete sim; }

int suction_experiment_create(const char* config_json, suction_experiment** out) {
    return guarded([&] {
        if (!out) return set_error(SUCTION_ERR_CONFIG, "null argument");
        auto exp = std::make_unique<suction_experiment>();
        if (config_json) exp->config.apply_json(config_json);
        *out = exp.release();
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_experiment_apply(suction_experiment* exp, const char* config_json) {
    return guarded([&] {
        if (!exp || !config_json) return set_error(SUCTION_ERR_CONFIG, "null argument");
        exp->config.apply_json(config_json);
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_experiment_simulate(suction_experiment* exp, char** out_result_json) {
    return guarded([&] {
        if (!exp) return set_error(SUCTION_ERR_CONFIG, "null argument");
        const RunResult result = run_simulate(exp->config);
        if (out_result_json) *out_result_json = dup_string(result.to_json());
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_experiment_sweep(suction_experiment* exp, int32_t* failed_points_out) {
    return guarded([&] {
        if (!exp) return set_error(SUCTION_ERR_CONFIG, "null argument");
        const int failed = run_sweep(exp->config);
        if (failed_points_out) *failed_points_out = failed;
        return static_cast<int>(SUCTION_OK);
    });
}

int suction_experiment_gradcheck(suction_experiment* exp) {
    return guarded([&] {
        if (!exp) return set_error(SUCTION_ERR_CONFIG, "null argument");
        if (run_gradcheck(exp->config) != 0)
            return set_error(SUCTION_ERR_THRESHOLD, "gradient check exceeded threshold");
        return static_cast<int>(SUCTION_OK);
    });
}

void suction_experiment_free(suction_experiment* exp) { delete exp; }

} // extern "C"
