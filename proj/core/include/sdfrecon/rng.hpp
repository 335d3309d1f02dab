// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "sdfrecon/math.hpp"

namespace sdfrecon {

// Deterministic RNG. Distributions are hand-rolled on top of mt19937_64 so a
// given seed yields bit-identical streams regardless of standard library.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed), seed_mix_(seed) {}

    // Independent substream; distinct tags give uncorrelated streams.
    Rng fork(uint64_t tag) const {
        return Rng(seed_mix_ ^ (tag * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull));
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Rejection-free is not needed at these scales; modulo bias is ~2^-53.
        return static_cast<uint64_t>(uniform() * static_cast<double>(n));
    }

    // Standard normal via Box-Muller (no cached spare; deterministic stream).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        u1 = std::max(u1, 1e-300);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    Vec3 uniform_in_box(const Aabb& box) {
        return {uniform(box.min.x, box.max.x), uniform(box.min.y, box.max.y),
                uniform(box.min.z, box.max.z)};
    }

    // Uniform in the unit ball (rejection sampling).
    Vec3 uniform_in_ball() {
        for (;;) {
            Vec3 v{uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
            if (dot(v, v) <= 1.0) return v;
        }
    }

private:
    std::mt19937_64 engine_;
    uint64_t seed_mix_ = 0;
};

}  // namespace sdfrecon
