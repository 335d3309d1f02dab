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

// Stage-3 appearance state: one raw (pre-sigmoid) color grid per object plus
// the inpainted background panorama used as static supervision and as the
// fallback color for rays that miss the traced surface.
struct SurfaceColorField {
    std::vector<DenseGrid3> object_color;  // indexed by object id - 1; 3 channels
    Image panorama;                        // inpainted equirectangular RGB
    Vec3 panorama_center;

    std::vector<ParamArray> param_arrays();

    Vec3 color_at(int object_id, const Vec3& p) const {
        Vec3 raw = object_color[object_id - 1].sample_vec3(p);
        return {sigmoid(raw.x), sigmoid(raw.y), sigmoid(raw.z)};
    }
    Vec3 background_color(const Vec3& direction) const;

    void save(const std::string& dir) const;
    static SurfaceColorField load(const std::string& dir, int object_count);
};

// One sphere-traced surface sample: which object was hit and where.
struct SurfaceHit {
    bool hit = false;
    int object_id = 0;
    Vec3 point;
};

// First scene surface along the ray (argmin object at the hit), or miss.
SurfaceHit trace_scene(const SceneModel& model, const Ray& ray, double tol = 1e-3,
                       int max_steps = 128, double min_step = 1e-3);

// Color of a ray under the surface model: traced object color, panorama on
// miss. `hit_out` (optional) receives the trace for backward passes.
Vec3 surface_color(const SceneModel& model, const SurfaceColorField& surf, const Ray& ray,
                   SurfaceHit* hit_out = nullptr);

// d(color)/d(object grid values) for a prior hit; accumulates into grads.
void surface_color_backward(const SurfaceColorField& surf, const SurfaceHit& hit,
                            const Vec3& d_color, GradStore& grads);

// Push-pull fill of masked pixels (mask=1 means repaint) from the visible
// surroundings; deterministic stand-in for an external inpainting backend.
Image inpaint_pushpull(const Image& color, const Image& mask);

}  // namespace sdfrecon
