// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/visibility.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <deque>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

void optimize_visibility(VisibilityGrid& grid, const SceneModel& model,
                         const std::vector<PinholeCamera>& input_views,
                         const VisibilityOptConfig& config) {
    if (grid.frozen()) throw StateError("optimize_visibility: grid is frozen");
    if (input_views.empty()) throw InputError("optimize_visibility: no input views");

    DenseGrid3& g = grid.grid();
    double* values = g.data();
    const double lr = config.learning_rate;
    RenderOptions opts;
    opts.want_color = false;
    opts.want_normal = false;

    Rng base(config.seed);
    RayWorkspace ws;
    for (int pass = 0; pass < config.passes; ++pass) {
        for (std::size_t view = 0; view < input_views.size(); ++view) {
            const PinholeCamera& cam = input_views[view];
            Rng view_rng = base.fork((static_cast<uint64_t>(pass) << 20) + view);
            for (int y = 0; y < cam.height; ++y)
                for (int x = 0; x < cam.width; ++x) {
                    Ray ray = cam.pixel_ray(x, y, 0.0, 1e9);
                    if (!clip_ray_to_bounds(ray, model.bounds)) continue;
                    RaySamples samples =
                        sample_uniform(ray, config.samples_per_ray, true, view_rng);
                    integrate_ray(model, ray, samples, nullptr, opts, &ws);
                    // One-sided pull: wherever the view's transmittance
                    // exceeds the stored visibility, project the corners
                    // onto the violated constraint (step scaled by the
                    // residual over the squared weights). A fixed-size
                    // hinge step would keep inflating corners shared by
                    // satisfied neighbors; the projection converges to the
                    // minimal feasible grid instead.
                    for (int i = 0; i < ws.n; ++i) {
                        const SampleRecord& rec = ws.samples[i];
                        GridQuery q = g.locate(rec.p);
                        double current = g.sample(q);
                        double violation = rec.T - current;
                        if (violation <= 0.0) continue;
                        const double fx = q.f[0], fy = q.f[1], fz = q.f[2];
                        double wsum2 = 0.0;
                        for (int dz = 0; dz < 2; ++dz) {
                            double wz = dz ? fz : 1.0 - fz;
                            for (int dy = 0; dy < 2; ++dy) {
                                double wy = dy ? fy : 1.0 - fy;
                                double w0 = wy * wz * (1.0 - fx), w1 = wy * wz * fx;
                                wsum2 += w0 * w0 + w1 * w1;
                            }
                        }
                        double scale = lr * violation / std::max(wsum2, 1e-6);
                        for (int dz = 0; dz < 2; ++dz) {
                            double wz = dz ? fz : 1.0 - fz;
                            for (int dy = 0; dy < 2; ++dy) {
                                double wyz = (dy ? fy : 1.0 - fy) * wz;
                                std::size_t base_idx =
                                    g.node_index(q.i0[0], q.i0[1] + dy, q.i0[2] + dz);
                                values[base_idx] =
                                    std::min(1.0, values[base_idx] + scale * wyz * (1.0 - fx));
                                values[base_idx + 1] =
                                    std::min(1.0, values[base_idx + 1] + scale * wyz * fx);
                            }
                        }
                    }
                }
        }
    }
    grid.freeze();
}

std::vector<double> render_visibility(const VisibilityGrid& grid, const SceneModel& model,
                                      const std::vector<Ray>& rays, int samples_per_ray) {
    std::vector<double> out(rays.size(), 0.0);
    RenderOptions opts;
    opts.want_color = false;
    opts.want_normal = false;
    Rng rng(0);
    for (std::size_t i = 0; i < rays.size(); ++i) {
        Ray ray = rays[i];
        if (!clip_ray_to_bounds(ray, model.bounds)) continue;
        RaySamples samples = sample_uniform(ray, samples_per_ray, false, rng);
        out[i] = integrate_ray(model, ray, samples, &grid.grid(), opts).visibility;
    }
    return out;
}

double visibility_weight(double v, const VisibilityWeightParams& params) {
    if (v < 0.0 || v > 1.0) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true))
            std::fprintf(stderr, "warning: visibility value %g outside [0,1]; clamping\n", v);
        v = clamp01(v);
    }
    return v <= params.tau ? params.w0 + params.m0 * v : params.w1 + params.m1 * v;
}

Image inpaint_mask_from_visibility(const Image& vis_panorama, double threshold) {
    Image mask(vis_panorama.width(), vis_panorama.height(), 1);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            mask.at(x, y) = vis_panorama.at(x, y) < threshold ? 1.0 : 0.0;
    return mask;
}

Aabb object_bbox_from_visibility(const VisibilityGrid& grid, const SceneModel& model,
                                 int object_id, double density_threshold,
                                 double floater_mean_vis) {
    const DenseGrid3& vg = grid.grid();
    if (vg.empty()) throw InputError("object_bbox_from_visibility: empty visibility grid");
    const int res = vg.nx();  // cubic by construction
    const Aabb& bounds = vg.bounds();
    Vec3 cell = bounds.extent() / static_cast<double>(res);
    const SdfField& field = model.object_by_id(object_id).field;
    const double beta = model.beta();

    auto cell_center = [&](int ix, int iy, int iz) {
        return Vec3{bounds.min.x + (ix + 0.5) * cell.x, bounds.min.y + (iy + 0.5) * cell.y,
                    bounds.min.z + (iz + 0.5) * cell.z};
    };
    auto flat = [&](int ix, int iy, int iz) {
        return (static_cast<std::size_t>(iz) * res + iy) * res + ix;
    };

    std::vector<uint8_t> occupied(static_cast<std::size_t>(res) * res * res, 0);
    std::size_t count = 0;
    for (int iz = 0; iz < res; ++iz)
        for (int iy = 0; iy < res; ++iy)
            for (int ix = 0; ix < res; ++ix) {
                Vec3 p = cell_center(ix, iy, iz);
                if (sdf_to_density(field.value(p), beta) > density_threshold) {
                    occupied[flat(ix, iy, iz)] = 1;
                    ++count;
                }
            }
    if (count == 0)
        throw InputError("object '" + model.object_by_id(object_id).name +
                         "' has no occupied cells anywhere");

    // 6-connected components; floaters are components with near-zero mean
    // visibility.
    std::vector<int> component(occupied.size(), -1);
    struct Comp {
        Aabb box = Aabb::empty();
        double vis_sum = 0.0;
        std::size_t cells = 0;
    };
    std::vector<Comp> comps;
    for (int iz = 0; iz < res; ++iz)
        for (int iy = 0; iy < res; ++iy)
            for (int ix = 0; ix < res; ++ix) {
                std::size_t idx = flat(ix, iy, iz);
                if (!occupied[idx] || component[idx] >= 0) continue;
                int id = static_cast<int>(comps.size());
                comps.emplace_back();
                std::deque<std::array<int, 3>> queue{{ix, iy, iz}};
                component[idx] = id;
                while (!queue.empty()) {
                    auto [cx, cy, cz] = queue.front();
                    queue.pop_front();
                    Comp& comp = comps[id];
                    Vec3 center = cell_center(cx, cy, cz);
                    comp.box.expand(center - cell * 0.5);
                    comp.box.expand(center + cell * 0.5);
                    comp.vis_sum += grid.sample(center);
                    comp.cells += 1;
                    const int offs[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                            {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (const auto& o : offs) {
                        int nx = cx + o[0], ny = cy + o[1], nz = cz + o[2];
                        if (nx < 0 || ny < 0 || nz < 0 || nx >= res || ny >= res || nz >= res)
                            continue;
                        std::size_t nidx = flat(nx, ny, nz);
                        if (!occupied[nidx] || component[nidx] >= 0) continue;
                        component[nidx] = id;
                        queue.push_back({nx, ny, nz});
                    }
                }
            }

    Aabb box = Aabb::empty();
    bool any = false;
    for (const Comp& comp : comps) {
        double mean_vis = comp.vis_sum / static_cast<double>(comp.cells);
        if (mean_vis < floater_mean_vis) continue;
        box.expand(comp.box.min);
        box.expand(comp.box.max);
        any = true;
    }
    if (!any) {
        // Everything looked like a floater; keep the most visible component.
        std::size_t best = 0;
        double best_vis = -1.0;
        for (std::size_t i = 0; i < comps.size(); ++i) {
            double mean_vis = comps[i].vis_sum / static_cast<double>(comps[i].cells);
            if (mean_vis > best_vis) {
                best_vis = mean_vis;
                best = i;
            }
        }
        std::fprintf(stderr,
                     "warning: all components of object %d near-invisible; keeping largest\n",
                     object_id);
        box = comps[best].box;
    }
    return box;
}

}  // namespace sdfrecon
