// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/image.hpp"
#include "sdfrecon/rng.hpp"
#include "sdfrecon/scene.hpp"

namespace sdfrecon {

// Strictly increasing sample distances along a ray plus the quadrature
// spacing delta_i used for opacity integration.
struct RaySamples {
    std::vector<double> t;
    std::vector<double> delta;

    int count() const { return static_cast<int>(t.size()); }
    bool empty() const { return t.empty(); }
};

// Stratified samples covering [near, far]; bin centers when jitter is off.
RaySamples sample_uniform(const Ray& ray, int n, bool jitter, Rng& rng);

// Binary occupancy over a cell lattice with an exponentially decayed density
// cache; cells whose cached density, integrated over one marching step, stays
// below the threshold are skipped by the sampler.
class OccupancyGrid {
public:
    OccupancyGrid() = default;
    OccupancyGrid(int resolution, const Aabb& bounds);

    // Re-evaluates density at every cell center for the scene (object_id 0)
    // or a single object, folding into the decayed cache.
    void update(const SceneModel& model, int object_id, double decay, double step,
                double threshold);

    void mark_all_occupied();
    void mark_all_empty();

    int resolution() const { return res_; }
    const Aabb& bounds() const { return bounds_; }
    bool cell_occupied(int ix, int iy, int iz) const {
        return occ_[(static_cast<std::size_t>(iz) * res_ + iy) * res_ + ix] != 0;
    }
    double cell_cache(int ix, int iy, int iz) const {
        return cache_[(static_cast<std::size_t>(iz) * res_ + iy) * res_ + ix];
    }
    std::size_t occupied_count() const;

private:
    int res_ = 0;
    Aabb bounds_;
    std::vector<double> cache_;
    std::vector<uint8_t> occ_;
};

// Samples only inside occupied cells; contiguous occupied spans are sampled
// uniformly with spacing <= step.
RaySamples sample_occgrid(const Ray& ray, const OccupancyGrid& occ, double step);

// Per-ray volume rendering outputs (Section quantities, world frame).
struct RenderBuffers {
    Vec3 color;
    double depth = 0.0;
    Vec3 normal;  // raw integral of SDF gradients; renormalize for display
    int k = 0;
    double sem[kMaxObjects] = {};
    double visibility = 0.0;
    double t_end = 1.0;  // transmittance after the last sample
    double mask = 0.0;   // sum of weights == 1 - t_end
};

// Upstream adjoints for every RenderBuffers field.
struct RayAdjoints {
    Vec3 d_color;
    double d_depth = 0.0;
    Vec3 d_normal;
    double d_sem[kMaxObjects] = {};
    double d_visibility = 0.0;
    double d_t_end = 0.0;
    double d_mask = 0.0;
};

struct RenderOptions {
    int object_id = 0;       // 0: full scene; j >= 1: density from object j only
    bool semantics = false;  // scene mode only
    bool want_color = true;
    bool want_normal = true;
    bool early_stop = true;  // terminate once transmittance < 1e-7
};

// Per-sample forward state retained for the backward pass. Grid cell
// queries are recomputed from `p` during backward; only scalars whose
// recomputation would need a full field query are kept.
struct SampleRecord {
    double t = 0.0, delta = 0.0;
    Vec3 p;
    double s[kMaxObjects] = {};
    int argmin = 0;  // index into the participating object list
    Vec3 normal;
    double vis = 0.0;
    double sigma = 0.0, alpha = 0.0, T = 1.0;
};

struct RayWorkspace {
    std::vector<SampleRecord> samples;
    int n = 0;
    double t_end = 1.0;
};

// Volume-integrate one ray. `vis` supplies per-point visibility (0 outside
// its bounds); pass nullptr to skip the visibility channel. When a workspace
// is given it retains per-sample state for integrate_ray_backward.
RenderBuffers integrate_ray(const SceneModel& model, const Ray& ray, const RaySamples& samples,
                            const DenseGrid3* vis, const RenderOptions& opts,
                            RayWorkspace* ws = nullptr);

// Reverse-mode pass matching integrate_ray exactly; accumulates parameter
// adjoints (grids via param_id slots, log-beta) into `grads`.
void integrate_ray_backward(const SceneModel& model, const RayWorkspace& ws,
                            const RayAdjoints& adj, const RenderOptions& opts, GradStore& grads);

// First |s| < tol crossing along [near, far], refined by bisection on sign
// changes. Marching step is s clamped to min_step; at most max_steps steps.
struct SphereTraceResult {
    double t = 0.0;
    Vec3 point;
};
std::optional<SphereTraceResult> sphere_trace(const SdfField& field, const Ray& ray,
                                              double tol = 1e-3, int max_steps = 128,
                                              double min_step = 1e-3);

// Equirectangular direction for continuous panorama coordinates: u in [0,W)
// maps to azimuth 2*pi*u/W (u=0 facing +z), v in [0,H] to polar angle
// pi*v/H from +y.
Vec3 panorama_direction(double u, double v, int width, int height);

struct PanoramaSet {
    Image color;       // 3ch
    Image depth;       // 1ch, ray distance
    Image visibility;  // 1ch
};

// Renders the background object in all directions from `center`.
PanoramaSet render_panorama(const SceneModel& model, const Vec3& center, int width, int height,
                            const DenseGrid3* vis, int samples_per_ray = 96, int threads = 1);

// Forward-renders a camera image of per-ray buffers (parallel, slot writes).
std::vector<RenderBuffers> render_image_buffers(const SceneModel& model,
                                                const PinholeCamera& camera,
                                                const RenderOptions& opts, const DenseGrid3* vis,
                                                int samples_per_ray, int threads);

}  // namespace sdfrecon
