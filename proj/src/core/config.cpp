#include "core/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"

namespace sucmpc {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
}

void check_fields(const json& j, const std::string& where,
                  std::initializer_list<const char*> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) fail(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void ExperimentConfig::apply_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    if (!j.is_object()) fail("document", "expected a JSON object");
    check_fields(j, "",
                 {"schema_version", "scene", "policy", "fluid", "suction", "mpc", "capacity",
                  "seed", "total_steps", "out_dir", "threads", "verbose", "sweep", "gradcheck"});

    if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1)
        fail("schema_version", "unsupported version");

    if (j.contains("scene")) {
        const json& s = j.at("scene");
        if (s.is_string()) {
            scene_preset = s.get<std::string>();
            scene_path.clear();
            scene_inline_json.clear();
        } else if (s.is_object()) {
            check_fields(s, "scene", {"preset", "path", "inline"});
            if (s.contains("inline")) {
                scene_inline_json = s.at("inline").dump();
            } else if (s.contains("path")) {
                scene_path = s.at("path").get<std::string>();
                scene_inline_json.clear();
            } else if (s.contains("preset")) {
                scene_preset = s.at("preset").get<std::string>();
                scene_path.clear();
                scene_inline_json.clear();
            }
        } else {
            fail("scene", "expected a preset name or an object");
        }
    }

    if (j.contains("policy")) {
        const json& p = j.at("policy");
        if (p.is_string()) {
            policy.kind = policy_kind_from_string(p.get<std::string>());
        } else if (p.is_object()) {
            check_fields(p, "policy", {"kind", "end_to_emit_rate"});
            if (p.contains("kind"))
                policy.kind = policy_kind_from_string(p.at("kind").get<std::string>());
            maybe(p, "end_to_emit_rate", policy.end_to_emit_rate);
        } else {
            fail("policy", "expected a policy name or an object");
        }
    }

    if (j.contains("fluid")) {
        const json& f = j.at("fluid");
        check_fields(f, "fluid",
                     {"dt", "kernel_radius", "rest_density", "rest_spacing", "solver_iterations",
                      "cfm_epsilon", "scorr_k", "scorr_n", "scorr_dq_ratio",
                      "boundary_margin", "distance_floor"});
        maybe(f, "dt", fluid.dt);
        maybe(f, "kernel_radius", fluid.kernel_radius);
        maybe(f, "rest_density", fluid.rest_density);
        maybe(f, "rest_spacing", fluid.rest_spacing);
        maybe(f, "solver_iterations", fluid.solver_iterations);
        maybe(f, "cfm_epsilon", fluid.cfm_epsilon);
        maybe(f, "scorr_k", fluid.scorr_k);
        maybe(f, "scorr_n", fluid.scorr_n);
        maybe(f, "scorr_dq_ratio", fluid.scorr_dq_ratio);
        maybe(f, "boundary_margin", fluid.boundary_margin);
        maybe(f, "distance_floor", fluid.distance_floor);
        if (!fluid.valid()) fail("fluid", "invalid parameter combination");
    }

    if (j.contains("suction")) {
        const json& s = j.at("suction");
        check_fields(s, "suction",
                     {"strength", "sigma_x", "sigma_z", "softening", "distance_floor"});
        maybe(s, "strength", suction.strength);
        maybe(s, "sigma_x", suction.sigma_x);
        maybe(s, "sigma_z", suction.sigma_z);
        maybe(s, "softening", suction.softening);
        maybe(s, "distance_floor", suction.distance_floor);
        if (!suction.valid()) fail("suction", "invalid parameter combination");
    }

    if (j.contains("mpc")) {
        const json& m = j.at("mpc");
        check_fields(m, "mpc",
                     {"horizon", "learning_rate", "grad_iterations", "step_clamp", "lookahead",
                      "samples", "init_grad_iterations", "nozzle_floor_offset",
                      "tape_budget_mb"});
        maybe(m, "horizon", mpc.horizon);
        maybe(m, "learning_rate", mpc.learning_rate);
        maybe(m, "grad_iterations", mpc.grad_iterations);
        maybe(m, "step_clamp", mpc.step_clamp);
        maybe(m, "lookahead", mpc.lookahead);
        maybe(m, "samples", mpc.samples);
        maybe(m, "init_grad_iterations", mpc.init_grad_iterations);
        maybe(m, "nozzle_floor_offset", mpc.nozzle_floor_offset);
        if (m.contains("tape_budget_mb"))
            mpc.tape_budget_bytes = m.at("tape_budget_mb").get<size_t>() << 20;
        if (!mpc.valid()) fail("mpc", "invalid parameter combination");
    }

    maybe(j, "capacity", capacity);
    maybe(j, "seed", seed);
    maybe(j, "total_steps", total_steps);
    maybe(j, "out_dir", out_dir);
    maybe(j, "threads", threads);
    maybe(j, "verbose", verbose);
    if (capacity < 1) fail("capacity", "must be >= 1");
    if (threads < 1) fail("threads", "must be >= 1");

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_fields(s, "sweep", {"spacing", "steps"});
        maybe(s, "spacing", sweep_spacing);
        maybe(s, "steps", sweep_steps);
        if (sweep_spacing <= 0) fail("sweep.spacing", "must be > 0");
    }

    if (j.contains("gradcheck")) {
        const json& g = j.at("gradcheck");
        check_fields(g, "gradcheck",
                     {"particles", "horizon", "settle_steps", "delta", "threshold",
                      "corrupt_adjoint"});
        maybe(g, "particles", gradcheck.particles);
        maybe(g, "horizon", gradcheck.horizon);
        maybe(g, "settle_steps", gradcheck.settle_steps);
        maybe(g, "delta", gradcheck.delta);
        maybe(g, "threshold", gradcheck.threshold);
        maybe(g, "corrupt_adjoint", gradcheck.corrupt_adjoint);
        if (gradcheck.particles < 1 || gradcheck.particles > 200)
            fail("gradcheck.particles", "must be in [1, 200]");
        if (gradcheck.horizon < 1 || gradcheck.horizon > 5)
            fail("gradcheck.horizon", "must be in [1, 5]");
        if (gradcheck.delta <= 0) fail("gradcheck.delta", "must be > 0");
    }
}

Scene ExperimentConfig::resolve_scene() const {
    if (!scene_inline_json.empty()) return load_scene(scene_inline_json);
    if (!scene_path.empty()) {
        std::ifstream in(scene_path);
        if (!in) throw ConfigError("config: scene.path: cannot open '" + scene_path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return load_scene(ss.str());
    }
    return preset(scene_preset);
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["schema_version"] = 1;
    if (!scene_inline_json.empty())
        j["scene"] = {{"inline", json::parse(scene_inline_json)}};
    else if (!scene_path.empty())
        j["scene"] = {{"path", scene_path}};
    else
        j["scene"] = {{"preset", scene_preset}};
    j["policy"] = {{"kind", policy_kind_to_string(policy.kind)},
                   {"end_to_emit_rate", policy.end_to_emit_rate}};
    j["fluid"] = {{"dt", fluid.dt},
                  {"kernel_radius", fluid.kernel_radius},
                  {"rest_density", fluid.rest_density},
                  {"rest_spacing", fluid.rest_spacing},
                  {"solver_iterations", fluid.solver_iterations},
                  {"cfm_epsilon", fluid.cfm_epsilon},
                  {"scorr_k", fluid.scorr_k},
                  {"scorr_n", fluid.scorr_n},
                  {"scorr_dq_ratio", fluid.scorr_dq_ratio},
                  {"boundary_margin", fluid.boundary_margin},
                  {"distance_floor", fluid.distance_floor}};
    j["suction"] = {{"strength", suction.strength},
                    {"sigma_x", suction.sigma_x},
                    {"sigma_z", suction.sigma_z},
                    {"softening", suction.softening},
                    {"distance_floor", suction.distance_floor}};
    j["mpc"] = {{"horizon", mpc.horizon},
                {"learning_rate", mpc.learning_rate},
                {"grad_iterations", mpc.grad_iterations},
                {"step_clamp", mpc.step_clamp},
                {"lookahead", mpc.lookahead},
                {"samples", mpc.samples},
                {"init_grad_iterations", mpc.init_grad_iterations},
                {"nozzle_floor_offset", mpc.nozzle_floor_offset}};
    j["capacity"] = capacity;
    j["seed"] = seed;
    j["total_steps"] = total_steps;
    j["sweep"] = {{"spacing", sweep_spacing}, {"steps", sweep_steps}};
    j["gradcheck"] = {{"particles", gradcheck.particles},
                      {"horizon", gradcheck.horizon},
                      {"settle_steps", gradcheck.settle_steps},
                      {"delta", gradcheck.delta},
                      {"threshold", gradcheck.threshold}};
    return j.dump();
}

std::string ExperimentConfig::hash() const {
    const std::string text = canonical_json();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

} // namespace sucmpc
