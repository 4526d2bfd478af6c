#pragma once

#include <cstdint>

#include "core/vec3.hpp"

namespace sucmpc {

// splitmix64: tiny, fast, and gives identical streams on every platform.
// <random> distributions are implementation-defined, which would break the
// byte-identical reproducibility contract.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform in a ball of the given radius (rejection from the cube)
    Vec3 in_ball(double radius) {
        for (;;) {
            Vec3 v{uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
            if (norm2(v) <= 1.0) return v * radius;
        }
    }

    // index in [0, n)
    uint64_t below(uint64_t n) { return next() % n; }

private:
    uint64_t state_;
};

} // namespace sucmpc
