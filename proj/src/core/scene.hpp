#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/vec3.hpp"

namespace sucmpc {

struct Box {
    Vec3 min;
    Vec3 max;

    bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }

    // strict interior of the box grown by `pad` (pad may be negative to shrink)
    bool inside(const Vec3& p, double pad) const {
        return p.x > min.x - pad && p.x < max.x + pad &&
               p.y > min.y - pad && p.y < max.y + pad &&
               p.z > min.z - pad && p.z < max.z + pad;
    }

    bool contains_box(const Box& b) const {
        return b.min.x >= min.x && b.min.y >= min.y && b.min.z >= min.z &&
               b.max.x <= max.x && b.max.y <= max.y && b.max.z <= max.z;
    }

    Vec3 center() const { return (min + max) * 0.5; }
};

struct EmissionSpec {
    Vec3 point;
    Vec3 direction{0, -1, 0}; // unit
    int rate = 4;             // particles per step
    double speed = 20.0;      // cm/s
    double jitter_radius = 0.2;
};

// Cavity geometry and emission configuration.  Immutable after load.
struct Scene {
    int schema_version = 1;
    Box container;
    std::vector<Box> obstacles;
    Vec3 up{0, 1, 0};
    Vec3 gravity{0, -981.0, 0};
    EmissionSpec emission;
    std::vector<Vec3> flow_path; // for the handcrafted policies
    int warmup_steps = 200;
    double y_goal = 10.0;
};

// Parses and validates a scene config document.  Throws ConfigError naming
// the offending field / invariant.
Scene load_scene(const std::string& text);

std::string scene_to_json(const Scene& scene);

void validate_scene(const Scene& scene);

// Built-in cavities.  The two presets share all geometry; only the emission
// block differs.  Throws ConfigError for unknown names.
Scene preset(const std::string& name);

// Nearest interior point of (container minus obstacles), keeping `margin`
// clearance from every surface.  Interior points are returned unchanged.
// When `clamp_mask` is non-null it receives bit i set iff coordinate i was
// modified; the adjoint pass treats those coordinates as clamped.
Vec3 project_to_interior(const Scene& scene, const Vec3& p, double margin,
                         uint8_t* clamp_mask = nullptr);

// Emission points evenly spaced along the four container walls with inward
// wall-normal directions.  Per side: max(1, floor(side/spacing)) points,
// centered so corners are skipped.  Points falling inside obstacles are
// dropped and reported in `skipped` when provided.
std::vector<EmissionSpec> emission_sweep(const Scene& scene, double spacing,
                                         std::vector<std::string>* skipped = nullptr);

} // namespace sucmpc
