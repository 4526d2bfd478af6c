#include "core/scene.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "core/error.hpp"

namespace sucmpc {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("scene: " + where + ": " + what);
}

Vec3 parse_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number())
        fail(where, "expected an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Box parse_box(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object with min/max");
    if (!j.contains("min") || !j.contains("max")) fail(where, "missing min or max");
    Box b{parse_vec3(j.at("min"), where + ".min"), parse_vec3(j.at("max"), where + ".max")};
    if (!b.valid()) fail(where, "min must be strictly below max on every axis");
    return b;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

// The two presets share every field except "emission".  Dimensions live in
// this config text, not in code.
//
// The cavity is a terraced pocket: a raised shelf on the right, a middle
// terrace carrying the central pillar, and a deep pool at the left end, each
// step guarded by a low lip.  Emitted fluid cascades down the terraces (the
// momentum of the stream crests each lip) while pulling fluid back up a
// terrace requires climbing, so pools stay separated under suction.
constexpr const char* kPresetGeometry = R"({
  "schema_version": 1,
  "container": {"min": [0, 0, 0], "max": [24, 14, 7]},
  "obstacles": [
    {"min": [10.5, 0, 2], "max": [13.5, 5, 5]},
    {"min": [16.5, 0, 0], "max": [24, 2.2, 7]},
    {"min": [16.1, 0, 0], "max": [16.5, 3.0, 7]},
    {"min": [8, 0, 0], "max": [16.1, 0.9, 7]},
    {"min": [7.6, 0, 0], "max": [8, 2.8, 7]}
  ],
  "up": [0, 1, 0],
  "gravity": [0, -981, 0],
  "flow_path": [[23.0, 3.4, 3.5], [19.0, 3.2, 3.5], [15.5, 2.5, 1.2], [9.5, 2.2, 1.2], [7.9, 2.0, 2.5], [5.5, 1.8, 3.5], [3.5, 1.5, 5.2], [1.8, 1.5, 2.2], [1.4, 1.5, 5.6]],
  "warmup_steps": 200,
  "y_goal": 10.0
})";

constexpr const char* kPresetCase1Emission = R"({
  "point": [23.0, 3.4, 3.5],
  "direction": [-1, 0, 0],
  "rate": 4,
  "speed": 20,
  "jitter_radius": 0.2
})";

constexpr const char* kPresetCase2Emission = R"({
  "point": [12.0, 1.9, 1.0],
  "direction": [0, -1, 0],
  "rate": 4,
  "speed": 5,
  "jitter_radius": 0.2
})";

} // namespace

void validate_scene(const Scene& scene) {
    if (scene.schema_version != 1) fail("schema_version", "unsupported version");
    if (!scene.container.valid()) fail("container", "min must be strictly below max");
    if (std::abs(norm(scene.up) - 1.0) > 1e-9) fail("up", "must be unit length");
    if (!(scene.up == Vec3{0, 1, 0}))
        fail("up", "only the global +y up direction is supported");
    for (size_t i = 0; i < scene.obstacles.size(); ++i) {
        const Box& b = scene.obstacles[i];
        const std::string where = "obstacles[" + std::to_string(i) + "]";
        if (!b.valid()) fail(where, "min must be strictly below max");
        if (!scene.container.contains_box(b)) fail(where, "must be contained in the container");
    }
    if (!scene.container.inside(scene.emission.point, 0.0))
        fail("emission", "point must be strictly inside the container");
    for (size_t i = 0; i < scene.obstacles.size(); ++i) {
        if (scene.obstacles[i].inside(scene.emission.point, 0.0))
            fail("emission", "point lies inside obstacles[" + std::to_string(i) + "]");
    }
    if (std::abs(norm(scene.emission.direction) - 1.0) > 1e-9)
        fail("emission.direction", "must be unit length");
    if (scene.emission.rate < 0) fail("emission.rate", "must be >= 0");
    if (scene.emission.speed < 0) fail("emission.speed", "must be >= 0");
    if (scene.emission.jitter_radius < 0) fail("emission.jitter_radius", "must be >= 0");
    if (scene.flow_path.size() < 2) fail("flow_path", "needs at least 2 vertices");
    if (scene.warmup_steps < 0) fail("warmup_steps", "must be >= 0");
    if (scene.y_goal <= scene.container.min.y) fail("y_goal", "must sit above the cavity floor");
}

Scene load_scene(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scene: parse error: ") + e.what());
    }
    if (!j.is_object()) fail("document", "expected a JSON object");

    static const char* known[] = {"schema_version", "container", "obstacles", "up",
                                  "gravity",        "emission",  "flow_path", "warmup_steps",
                                  "y_goal"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return it.key() == k; }) == std::end(known))
            fail(it.key(), "unknown field");
    }

    Scene s;
    if (j.contains("schema_version")) s.schema_version = j.at("schema_version").get<int>();
    if (!j.contains("container")) fail("container", "missing");
    s.container = parse_box(j.at("container"), "container");
    if (j.contains("obstacles")) {
        const json& arr = j.at("obstacles");
        if (!arr.is_array()) fail("obstacles", "expected an array");
        for (size_t i = 0; i < arr.size(); ++i)
            s.obstacles.push_back(parse_box(arr[i], "obstacles[" + std::to_string(i) + "]"));
    }
    if (j.contains("up")) s.up = parse_vec3(j.at("up"), "up");
    if (j.contains("gravity")) s.gravity = parse_vec3(j.at("gravity"), "gravity");
    if (!j.contains("emission")) fail("emission", "missing");
    {
        const json& e = j.at("emission");
        if (!e.is_object()) fail("emission", "expected an object");
        if (!e.contains("point")) fail("emission.point", "missing");
        s.emission.point = parse_vec3(e.at("point"), "emission.point");
        if (e.contains("direction"))
            s.emission.direction = parse_vec3(e.at("direction"), "emission.direction");
        if (e.contains("rate")) s.emission.rate = e.at("rate").get<int>();
        if (e.contains("speed")) s.emission.speed = e.at("speed").get<double>();
        if (e.contains("jitter_radius"))
            s.emission.jitter_radius = e.at("jitter_radius").get<double>();
    }
    if (!j.contains("flow_path")) fail("flow_path", "missing");
    {
        const json& fp = j.at("flow_path");
        if (!fp.is_array()) fail("flow_path", "expected an array of points");
        for (size_t i = 0; i < fp.size(); ++i)
            s.flow_path.push_back(parse_vec3(fp[i], "flow_path[" + std::to_string(i) + "]"));
    }
    if (j.contains("warmup_steps")) s.warmup_steps = j.at("warmup_steps").get<int>();
    if (j.contains("y_goal")) s.y_goal = j.at("y_goal").get<double>();

    validate_scene(s);
    return s;
}

std::string scene_to_json(const Scene& s) {
    json j;
    j["schema_version"] = s.schema_version;
    j["container"] = {{"min", vec3_to_json(s.container.min)}, {"max", vec3_to_json(s.container.max)}};
    json obs = json::array();
    for (const Box& b : s.obstacles)
        obs.push_back({{"min", vec3_to_json(b.min)}, {"max", vec3_to_json(b.max)}});
    j["obstacles"] = obs;
    j["up"] = vec3_to_json(s.up);
    j["gravity"] = vec3_to_json(s.gravity);
    j["emission"] = {{"point", vec3_to_json(s.emission.point)},
                     {"direction", vec3_to_json(s.emission.direction)},
                     {"rate", s.emission.rate},
                     {"speed", s.emission.speed},
                     {"jitter_radius", s.emission.jitter_radius}};
    json fp = json::array();
    for (const Vec3& v : s.flow_path) fp.push_back(vec3_to_json(v));
    j["flow_path"] = fp;
    j["warmup_steps"] = s.warmup_steps;
    j["y_goal"] = s.y_goal;
    return j.dump(2) + "\n";
}

namespace {

// The basin floors carry a grid of small knobs, the bumpy texture of a
// tissue pocket.  A pool parked between knobs cannot slide as a body toward
// a distant nozzle (every knob contact resets the accumulated drift), which
// gives the suction a finite effective reach while leaving the close field
// and the gravity-driven cascade untouched.
void append_floor_knobs(json& obstacles, double x0, double x1, double z0, double z1,
                        double floor_y, double pitch, double size, double height) {
    const int nx = std::max(1, static_cast<int>(std::floor((x1 - x0) / pitch)));
    const int nz = std::max(1, static_cast<int>(std::floor((z1 - z0) / pitch)));
    const double sx = x0 + ((x1 - x0) - (nx - 1) * pitch) * 0.5;
    const double sz = z0 + ((z1 - z0) - (nz - 1) * pitch) * 0.5;
    for (int i = 0; i < nx; ++i) {
        for (int k = 0; k < nz; ++k) {
            const double cx = sx + i * pitch;
            const double cz = sz + k * pitch;
            obstacles.push_back(
                {{"min", {cx - size / 2, floor_y, cz - size / 2}},
                 {"max", {cx + size / 2, floor_y + height, cz + size / 2}}});
        }
    }
}

} // namespace

Scene preset(const std::string& name) {
    const char* emission = nullptr;
    if (name == "case1")
        emission = kPresetCase1Emission;
    else if (name == "case2")
        emission = kPresetCase2Emission;
    else
        throw ConfigError("unknown preset '" + name + "' (expected case1 or case2)");
    json j = json::parse(kPresetGeometry);
    json& obstacles = j["obstacles"];
    // left pool and right shelf floors; the middle terrace stays smooth so
    // its ring pool drains freely around the pillar
    append_floor_knobs(obstacles, 0.3, 7.3, 0.3, 6.7, 0.0, 1.4, 0.5, 0.6);
    append_floor_knobs(obstacles, 16.8, 23.7, 0.3, 6.7, 2.2, 1.4, 0.5, 0.6);
    j["emission"] = json::parse(emission);
    return load_scene(j.dump());
}

Vec3 project_to_interior(const Scene& scene, const Vec3& p, double margin, uint8_t* clamp_mask) {
    const Box& c = scene.container;
    Vec3 q{std::clamp(p.x, c.min.x + margin, c.max.x - margin),
           std::clamp(p.y, c.min.y + margin, c.max.y - margin),
           std::clamp(p.z, c.min.z + margin, c.max.z - margin)};

    // Push out of obstacles through the nearest face whose target stays inside
    // the shrunk container.  A push can land inside a neighboring obstacle, so
    // iterate a few passes; preset terrain resolves in one or two.
    for (int pass = 0; pass < 8; ++pass) {
        bool moved = false;
        for (const Box& b : scene.obstacles) {
            if (!b.inside(q, margin)) continue;
            double best_dist = 0.0;
            int best_axis = -1;
            double best_value = 0.0;
            for (int axis = 0; axis < 3; ++axis) {
                const double lo = b.min[axis] - margin;
                const double hi = b.max[axis] + margin;
                const double d_lo = q[axis] - lo;
                const double d_hi = hi - q[axis];
                if (lo >= c.min[axis] + margin && (best_axis < 0 || d_lo < best_dist)) {
                    best_dist = d_lo;
                    best_axis = axis;
                    best_value = lo;
                }
                if (hi <= c.max[axis] - margin && (best_axis < 0 || d_hi < best_dist)) {
                    best_dist = d_hi;
                    best_axis = axis;
                    best_value = hi;
                }
            }
            if (best_axis >= 0) {
                q[best_axis] = best_value;
                moved = true;
            }
        }
        if (!moved) break;
    }

    if (clamp_mask) {
        uint8_t m = 0;
        if (q.x != p.x) m |= 1;
        if (q.y != p.y) m |= 2;
        if (q.z != p.z) m |= 4;
        *clamp_mask = m;
    }
    return q;
}

std::vector<EmissionSpec> emission_sweep(const Scene& scene, double spacing,
                                         std::vector<std::string>* skipped) {
    if (spacing <= 0) throw ConfigError("emission_sweep: spacing must be > 0");
    const Box& c = scene.container;
    const double inset = 0.5;
    const double y = scene.emission.point.y;

    struct Wall {
        int along;   // axis the wall runs along (0=x, 2=z)
        int fixed;   // the other horizontal axis
        double at;   // wall coordinate on the fixed axis
        double nrm;  // inward normal sign on the fixed axis
    };
    const Wall walls[] = {{0, 2, c.min.z, +1.0},
                          {0, 2, c.max.z, -1.0},
                          {2, 0, c.min.x, +1.0},
                          {2, 0, c.max.x, -1.0}};

    std::vector<EmissionSpec> out;
    int index = 0;
    for (const Wall& w : walls) {
        const double lo = (w.along == 0) ? c.min.x : c.min.z;
        const double hi = (w.along == 0) ? c.max.x : c.max.z;
        const double len = hi - lo;
        const int count = std::max(1, static_cast<int>(std::floor(len / spacing)));
        const double start = lo + (len - (count - 1) * spacing) * 0.5;
        for (int k = 0; k < count; ++k, ++index) {
            EmissionSpec e = scene.emission;
            Vec3 p;
            p[w.along] = start + k * spacing;
            p[w.fixed] = w.at + w.nrm * inset;
            p.y = y;
            Vec3 dir{};
            dir[w.fixed] = w.nrm;
            e.point = p;
            e.direction = dir;
            bool blocked = false;
            for (const Box& b : scene.obstacles)
                if (b.inside(p, 0.0)) blocked = true;
            if (blocked) {
                if (skipped)
                    skipped->push_back("sweep point " + std::to_string(index) +
                                      " inside an obstacle");
                continue;
            }
            out.push_back(e);
        }
    }
    return out;
}

} // namespace sucmpc
