/* suction: differentiable position-based fluid simulation with suction MPC.
 *
 * C API over the C++ core.  All objects are opaque handles created and
 * destroyed through this interface; functions return a status code and the
 * per-thread message from suction_last_error() describes the most recent
 * failure.  Strings returned through char** outputs are heap-allocated and
 * must be released with suction_string_free().
 */
#ifndef SUCTION_H
#define SUCTION_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SUCTION_API __declspec(dllexport)
#else
#define SUCTION_API __attribute__((visibility("default")))
#endif

/* Status codes.  Threshold failures mirror the CLI exit code contract:
 * 0 success, 1 threshold/acceptance failure, 2 usage/config error,
 * 3 runtime failure. */
enum suction_status {
    SUCTION_OK = 0,
    SUCTION_ERR_THRESHOLD = 1,
    SUCTION_ERR_CONFIG = 2,
    SUCTION_ERR_RUNTIME = 3
};

typedef struct suction_scene suction_scene;
typedef struct suction_sim suction_sim;
typedef struct suction_experiment suction_experiment;

SUCTION_API const char* suction_version(void);

/* Message describing the most recent failure on this thread. */
SUCTION_API const char* suction_last_error(void);

SUCTION_API void suction_string_free(char* s);

/* ---- scenes ---------------------------------------------------------- */

SUCTION_API int suction_scene_preset(const char* name, suction_scene** out);
SUCTION_API int suction_scene_load(const char* json_text, suction_scene** out);
SUCTION_API int suction_scene_load_file(const char* path, suction_scene** out);
SUCTION_API int suction_scene_to_json(const suction_scene* scene, char** out_json);
SUCTION_API void suction_scene_free(suction_scene* scene);

/* ---- simulation ------------------------------------------------------ */

/* params_json may be NULL or a JSON object with optional "fluid" and
 * "suction" sections (same schema as the experiment config). */
SUCTION_API int suction_sim_create(const suction_scene* scene, const char* params_json,
                                   int capacity, uint64_t seed, suction_sim** out);

/* One simulation step; nozzle_xyz may be NULL to step without suction.
 * removed_out (optional) receives the number of particles lifted past the
 * goal height this step. */
SUCTION_API int suction_sim_step(suction_sim* sim, const double nozzle_xyz[3],
                                 int32_t* removed_out);

/* Emits up to the scene's per-step emission rate, honoring capacity. */
SUCTION_API int suction_sim_emit(suction_sim* sim, int32_t* emitted_out);

SUCTION_API int suction_sim_counts(const suction_sim* sim, int32_t* active_out,
                                   int32_t* below_goal_out);

/* Copies up to `max_particles` active particle positions as xyz triples and
 * stores the copied count in written_out. */
SUCTION_API int suction_sim_positions(const suction_sim* sim, double* xyz_out,
                                      int32_t max_particles, int32_t* written_out);

SUCTION_API void suction_sim_free(suction_sim* sim);

/* ---- experiments ----------------------------------------------------- */

/* config_json uses the experiment config schema (see the README); NULL means
 * all defaults.  Flags-derived fragments can be layered with _apply before
 * the config file text, which takes precedence by being applied last. */
SUCTION_API int suction_experiment_create(const char* config_json, suction_experiment** out);
SUCTION_API int suction_experiment_apply(suction_experiment* exp, const char* config_json);

/* Warm-up plus the configured policy; writes result.json, curve.csv and
 * trajectory.csv under the configured output directory and returns the
 * result document in out_result_json when non-NULL. */
SUCTION_API int suction_experiment_simulate(suction_experiment* exp, char** out_result_json);

/* One MPC run per perimeter emission point; writes sweep.csv plus per-point
 * outputs.  failed_points_out (optional) receives the failed row count. */
SUCTION_API int suction_experiment_sweep(suction_experiment* exp, int32_t* failed_points_out);

/* Adjoint vs finite-difference check; writes gradient_report.json.  Returns
 * SUCTION_OK when within threshold, SUCTION_ERR_THRESHOLD otherwise. */
SUCTION_API int suction_experiment_gradcheck(suction_experiment* exp);

SUCTION_API void suction_experiment_free(suction_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* SUCTION_H */
