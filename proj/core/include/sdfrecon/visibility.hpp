// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/image.hpp"
#include "sdfrecon/render.hpp"
#include "sdfrecon/scene.hpp"

namespace sdfrecon {

// Learnable per-point visibility of the input views in [0, 1]. Starts at
// zero everywhere; optimized once after reconstruction, then frozen.
class VisibilityGrid {
public:
    VisibilityGrid() = default;
    VisibilityGrid(int resolution, const Aabb& bounds)
        : grid_(resolution, resolution, resolution, 1, bounds, 0.0) {}

    DenseGrid3& grid() { return grid_; }
    const DenseGrid3& grid() const { return grid_; }
    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    // Visibility at p; points outside the grid bounds are unseen (0).
    double sample(const Vec3& p) const {
        if (grid_.empty() || !grid_.bounds().contains(p)) return 0.0;
        return grid_.sample(p);
    }

    void save(const std::string& path) const { grid_.save(path); }
    static VisibilityGrid load(const std::string& path, bool frozen = true) {
        VisibilityGrid v;
        v.grid_ = DenseGrid3::load(path);
        v.frozen_ = frozen;
        return v;
    }

private:
    DenseGrid3 grid_;
    bool frozen_ = false;
};

struct VisibilityOptConfig {
    int passes = 20;            // input views rendered this many times
    double learning_rate = 0.9; // relaxation of the per-constraint projection
    int samples_per_ray = 64;
    uint64_t seed = 0;
};

// Pulls grid values up toward the accumulated transmittance seen from every
// input view (one-sided hinge, transmittance treated as constant), clamped
// to [0, 1]; freezes the grid when done. Single-writer by contract.
void optimize_visibility(VisibilityGrid& grid, const SceneModel& model,
                         const std::vector<PinholeCamera>& input_views,
                         const VisibilityOptConfig& config);

// Volume-rendered visibility per ray.
std::vector<double> render_visibility(const VisibilityGrid& grid, const SceneModel& model,
                                      const std::vector<Ray>& rays, int samples_per_ray = 64);

// Piecewise-linear SDS weight over rendered visibility.
struct VisibilityWeightParams {
    double tau = 0.5;
    double w0 = 20.0, m0 = -38.0;
    double w1 = 2.0, m1 = -2.0;

    static VisibilityWeightParams geometry() { return {0.5, 20.0, -38.0, 2.0, -2.0}; }
    static VisibilityWeightParams appearance() { return {0.3, 1.0, 0.0, 0.0, 0.0}; }

    // Both linear pieces agree at tau (geometry-stage preset property).
    bool continuous_at_tau(double tol = 1e-9) const {
        return std::abs((w0 + m0 * tau) - (w1 + m1 * tau)) <= tol;
    }
};

// V outside [0,1] is clamped (with a one-time warning).
double visibility_weight(double v, const VisibilityWeightParams& params);

// Binary mask (1 where visibility < threshold) from a visibility panorama.
Image inpaint_mask_from_visibility(const Image& vis_panorama, double threshold);

// Axis-aligned bounds of an object's occupied cells, excluding floater
// components whose mean grid visibility falls below `floater_mean_vis`.
// Throws InputError when the object has no occupied cells anywhere.
Aabb object_bbox_from_visibility(const VisibilityGrid& grid, const SceneModel& model,
                                 int object_id, double density_threshold,
                                 double floater_mean_vis = 0.05);

}  // namespace sdfrecon
