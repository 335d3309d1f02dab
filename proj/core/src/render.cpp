// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/render.hpp"

#include <cassert>

#include "sdfrecon/error.hpp"
#include "sdfrecon/parallel.hpp"

namespace sdfrecon {

namespace {
constexpr double kEarlyStopT = 1e-7;
}

RaySamples sample_uniform(const Ray& ray, int n, bool jitter, Rng& rng) {
    if (n < 2) throw InputError("sample_uniform: need at least 2 samples");
    RaySamples out;
    out.t.resize(n);
    out.delta.resize(n);
    double span = ray.far - ray.near;
    double bin = span / n;
    for (int i = 0; i < n; ++i) {
        double u = jitter ? rng.uniform() : 0.5;
        out.t[i] = ray.near + (i + u) * bin;
    }
    for (int i = 0; i + 1 < n; ++i) out.delta[i] = out.t[i + 1] - out.t[i];
    out.delta[n - 1] = ray.far - out.t[n - 1];
    return out;
}

OccupancyGrid::OccupancyGrid(int resolution, const Aabb& bounds)
    : res_(resolution), bounds_(bounds) {
    std::size_t n = static_cast<std::size_t>(res_) * res_ * res_;
    cache_.assign(n, 0.0);
    occ_.assign(n, 1);  // start fully occupied; decay carves out empty space
}

void OccupancyGrid::update(const SceneModel& model, int object_id, double decay, double step,
                           double threshold) {
    Vec3 cell = bounds_.extent() / static_cast<double>(res_);
    double beta = model.beta();
    std::size_t idx = 0;
    for (int iz = 0; iz < res_; ++iz)
        for (int iy = 0; iy < res_; ++iy)
            for (int ix = 0; ix < res_; ++ix, ++idx) {
                Vec3 p{bounds_.min.x + (ix + 0.5) * cell.x, bounds_.min.y + (iy + 0.5) * cell.y,
                       bounds_.min.z + (iz + 0.5) * cell.z};
                double s = object_id == 0 ? scene_sdf(model, p).first
                                          : model.objects[object_id - 1].field.value(p);
                double sigma = sdf_to_density(s, beta);
                cache_[idx] = std::max(cache_[idx] * decay, sigma);
                occ_[idx] = cache_[idx] * step > threshold ? 1 : 0;
            }
}

void OccupancyGrid::mark_all_occupied() { std::fill(occ_.begin(), occ_.end(), 1); }
void OccupancyGrid::mark_all_empty() { std::fill(occ_.begin(), occ_.end(), 0); }

std::size_t OccupancyGrid::occupied_count() const {
    std::size_t n = 0;
    for (uint8_t o : occ_) n += o;
    return n;
}

RaySamples sample_occgrid(const Ray& ray, const OccupancyGrid& occ, double step) {
    RaySamples out;
    if (step <= 0.0) throw InputError("sample_occgrid: step must be positive");
    double t0 = ray.near, t1 = ray.far;
    if (!occ.bounds().clip_ray(ray.origin, ray.direction, t0, t1) || t0 >= t1) return out;

    // Amanatides & Woo traversal over the occupancy lattice.
    const int res = occ.resolution();
    Vec3 cell = occ.bounds().extent() / static_cast<double>(res);
    Vec3 entry = ray.at(t0 + 1e-12);
    int ix[3];
    double t_max[3], t_delta[3];
    int di[3];
    for (int a = 0; a < 3; ++a) {
        double rel = (entry[a] - occ.bounds().min[a]) / cell[a];
        ix[a] = std::clamp(static_cast<int>(rel), 0, res - 1);
        double d = ray.direction[a];
        if (std::abs(d) < 1e-15) {
            di[a] = 0;
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        } else {
            di[a] = d > 0 ? 1 : -1;
            int next = ix[a] + (d > 0 ? 1 : 0);
            double boundary = occ.bounds().min[a] + next * cell[a];
            t_max[a] = (boundary - ray.origin[a]) / d;
            t_delta[a] = cell[a] / std::abs(d);
        }
    }

    auto emit_span = [&](double a, double b) {
        double len = b - a;
        if (len <= 1e-12) return;
        int nseg = std::max(1, static_cast<int>(std::ceil(len / step - 1e-9)));
        double dt = len / nseg;
        for (int i = 0; i < nseg; ++i) {
            out.t.push_back(a + (i + 0.5) * dt);
            out.delta.push_back(dt);
        }
    };

    double t_cur = t0;
    double span_start = -1.0;  // < 0 means not inside an occupied span
    while (t_cur < t1) {
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        bool inside = occ.cell_occupied(ix[0], ix[1], ix[2]);
        if (inside && span_start < 0.0) span_start = t_cur;
        if (!inside && span_start >= 0.0) {
            emit_span(span_start, t_cur);
            span_start = -1.0;
        }
        t_cur = std::min(t_max[axis], t1);
        if (t_max[axis] >= t1) break;
        ix[axis] += di[axis];
        if (ix[axis] < 0 || ix[axis] >= res) break;
        t_max[axis] += t_delta[axis];
    }
    if (span_start >= 0.0) emit_span(span_start, t_cur);
    return out;
}

RenderBuffers integrate_ray(const SceneModel& model, const Ray& ray, const RaySamples& samples,
                            const DenseGrid3* vis, const RenderOptions& opts, RayWorkspace* ws) {
    RenderBuffers out;
    const int k = model.object_count();
    const bool object_mode = opts.object_id != 0;
    const int participating = object_mode ? 1 : k;
    if (object_mode && (opts.object_id < 1 || opts.object_id > k))
        throw InputError("integrate_ray: object_id out of range");
    if (k > kMaxObjects) throw InputError("integrate_ray: too many objects");
    out.k = opts.semantics && !object_mode ? k : 0;

    const int n = samples.count();
    if (ws) {
        ws->samples.resize(n);
        ws->n = 0;
        ws->t_end = 1.0;
    }
    if (n == 0) return out;

    const double beta = model.beta();
    const double gamma = model.gamma;
    double T = 1.0;
    int emitted = 0;
    for (int i = 0; i < n; ++i) {
        SampleRecord local;
        SampleRecord& rec = ws ? ws->samples[emitted] : local;
        rec.t = samples.t[i];
        rec.delta = samples.delta[i];
        rec.p = ray.at(rec.t);

        int argmin = 0;
        GridQuery q[kMaxObjects];
        for (int j = 0; j < participating; ++j) {
            const SdfField& field =
                object_mode ? model.objects[opts.object_id - 1].field : model.objects[j].field;
            if (field.is_grid()) {
                q[j] = field.grid().locate(rec.p);
                rec.s[j] = field.grid().sample(q[j]);
            } else {
                rec.s[j] = field.analytic()->value(rec.p);
            }
            if (rec.s[j] < rec.s[argmin]) argmin = j;
        }
        rec.argmin = argmin;

        if (opts.want_normal) {
            const SdfField& field = object_mode ? model.objects[opts.object_id - 1].field
                                                : model.objects[argmin].field;
            if (field.is_grid())
                rec.normal = field.grid().spatial_gradient(q[argmin]);
            else
                rec.normal = field.analytic()->gradient(rec.p);
        }

        rec.sigma = sdf_to_density(rec.s[argmin], beta);
        rec.alpha = 1.0 - std::exp(-rec.sigma * rec.delta);
        rec.T = T;
        const double w = T * rec.alpha;

        if (opts.want_color) {
            GridQuery qc = model.color.locate(rec.p);
            Vec3 raw = model.color.sample_vec3(qc);
            out.color += Vec3{sigmoid(raw.x), sigmoid(raw.y), sigmoid(raw.z)} * w;
        }
        out.depth += w * rec.t;
        if (opts.want_normal) out.normal += rec.normal * w;
        if (out.k > 0)
            for (int j = 0; j < k; ++j) out.sem[j] += w * semantic_logit(rec.s[j], gamma);
        if (vis) {
            rec.vis = vis->bounds().contains(rec.p) ? vis->sample(rec.p) : 0.0;
            out.visibility += w * rec.vis;
        }
        out.mask += w;

        T *= 1.0 - rec.alpha;
        ++emitted;
        if (opts.early_stop && T < kEarlyStopT) break;
    }
    out.t_end = T;
    if (ws) {
        ws->n = emitted;
        ws->t_end = T;
    }
    return out;
}

void integrate_ray_backward(const SceneModel& model, const RayWorkspace& ws,
                            const RayAdjoints& adj, const RenderOptions& opts, GradStore& grads) {
    const int k = model.object_count();
    const bool object_mode = opts.object_id != 0;
    const int participating = object_mode ? 1 : k;
    const double beta = model.beta();
    const double gamma = model.gamma;
    // log-beta occupies the final parameter slot by construction.
    double* beta_slot = grads.slots.empty() ? nullptr : grads.slots.back().data();

    const bool use_color = opts.want_color && (adj.d_color.x != 0.0 || adj.d_color.y != 0.0 ||
                                               adj.d_color.z != 0.0);
    const bool use_normal = opts.want_normal && (adj.d_normal.x != 0.0 || adj.d_normal.y != 0.0 ||
                                                 adj.d_normal.z != 0.0);
    bool use_sem = !object_mode && opts.semantics;
    if (use_sem) {
        bool any = false;
        for (int j = 0; j < k; ++j) any = any || adj.d_sem[j] != 0.0;
        use_sem = any;
    }

    // Suffix accumulator: sum over later samples of wbar_l * w_l, seeded with
    // the final-transmittance adjoint times T_n.
    double suffix = adj.d_t_end * ws.t_end;
    for (int i = ws.n - 1; i >= 0; --i) {
        const SampleRecord& rec = ws.samples[i];
        const double w = rec.T * rec.alpha;

        double wbar = adj.d_depth * rec.t + adj.d_mask;
        Vec3 color_sig;
        GridQuery q_color;
        if (use_color) {
            q_color = model.color.locate(rec.p);
            Vec3 raw = model.color.sample_vec3(q_color);
            color_sig = {sigmoid(raw.x), sigmoid(raw.y), sigmoid(raw.z)};
            wbar += dot(adj.d_color, color_sig);
        }
        if (opts.want_normal) wbar += dot(adj.d_normal, rec.normal);
        if (use_sem)
            for (int j = 0; j < k; ++j)
                wbar += adj.d_sem[j] * semantic_logit(rec.s[j], gamma);
        if (adj.d_visibility != 0.0) wbar += adj.d_visibility * rec.vis;

        const double t_next = rec.T * (1.0 - rec.alpha);
        const double ubar = wbar * t_next - suffix;  // adjoint of sigma_i * delta_i
        suffix += wbar * w;

        const double sigbar = ubar * rec.delta;
        double d_s, d_logb;
        sdf_to_density_grad(rec.s[rec.argmin], beta, &d_s, &d_logb);
        double sbar[kMaxObjects] = {};
        sbar[rec.argmin] += sigbar * d_s;
        if (beta_slot) beta_slot[0] += sigbar * d_logb;

        if (use_color) {
            Vec3 up{w * adj.d_color.x * color_sig.x * (1.0 - color_sig.x),
                    w * adj.d_color.y * color_sig.y * (1.0 - color_sig.y),
                    w * adj.d_color.z * color_sig.z * (1.0 - color_sig.z)};
            if (double* sink = grads.slot(model.color.param_id))
                model.color.accum_value_grad_vec3(q_color, up, sink);
        }

        if (use_normal) {
            const SdfField& field = object_mode ? model.objects[opts.object_id - 1].field
                                                : model.objects[rec.argmin].field;
            if (field.is_grid())
                if (double* sink = grads.slot(field.grid().param_id))
                    field.grid().accum_spatial_grad(field.grid().locate(rec.p), adj.d_normal * w,
                                                    sink);
        }

        if (use_sem)
            for (int j = 0; j < k; ++j) {
                if (adj.d_sem[j] == 0.0) continue;
                sbar[j] += w * adj.d_sem[j] * semantic_logit_ds(rec.s[j], gamma);
            }

        for (int j = 0; j < participating; ++j) {
            if (sbar[j] == 0.0) continue;
            const SdfField& field =
                object_mode ? model.objects[opts.object_id - 1].field : model.objects[j].field;
            if (!field.is_grid()) continue;
            if (double* sink = grads.slot(field.grid().param_id))
                field.grid().accum_value_grad(field.grid().locate(rec.p), sbar[j], sink);
        }
    }
}

std::optional<SphereTraceResult> sphere_trace(const SdfField& field, const Ray& ray, double tol,
                                              int max_steps, double min_step) {
    double t = ray.near;
    double s_prev = field.value(ray.at(t));
    if (std::abs(s_prev) < tol) return SphereTraceResult{t, ray.at(t)};
    for (int step = 0; step < max_steps && t <= ray.far; ++step) {
        double advance = std::max(std::abs(s_prev), min_step);
        double t_next = t + advance;
        if (t_next > ray.far) return std::nullopt;
        double s_next = field.value(ray.at(t_next));
        if (std::abs(s_next) < tol) return SphereTraceResult{t_next, ray.at(t_next)};
        if ((s_prev > 0.0) != (s_next > 0.0)) {
            double lo = t, hi = t_next;
            double s_lo = s_prev;
            for (int it = 0; it < 64; ++it) {
                double mid = 0.5 * (lo + hi);
                double s_mid = field.value(ray.at(mid));
                if (std::abs(s_mid) < tol) return SphereTraceResult{mid, ray.at(mid)};
                if ((s_lo > 0.0) == (s_mid > 0.0)) {
                    lo = mid;
                    s_lo = s_mid;
                } else {
                    hi = mid;
                }
            }
            double mid = 0.5 * (lo + hi);
            return SphereTraceResult{mid, ray.at(mid)};
        }
        t = t_next;
        s_prev = s_next;
    }
    return std::nullopt;
}

Vec3 panorama_direction(double u, double v, int width, int height) {
    double azimuth = 2.0 * kPi * u / width;
    double polar = kPi * v / height;
    double sp = std::sin(polar);
    return {sp * std::sin(azimuth), std::cos(polar), sp * std::cos(azimuth)};
}

PanoramaSet render_panorama(const SceneModel& model, const Vec3& center, int width, int height,
                            const DenseGrid3* vis, int samples_per_ray, int threads) {
    if (!model.bounds.contains(center))
        throw InputError("render_panorama: center outside scene bounds");
    PanoramaSet set;
    set.color = Image(width, height, 3);
    set.depth = Image(width, height, 1);
    set.visibility = Image(width, height, 1);
    RenderOptions opts;
    opts.object_id = SceneModel::kBackgroundId;
    double far = model.bounds.diagonal();
    parallel_for(static_cast<std::size_t>(width) * height, threads,
                 [&](int, std::size_t begin, std::size_t end) {
                     Rng rng(0);
                     for (std::size_t idx = begin; idx < end; ++idx) {
                         int x = static_cast<int>(idx % width);
                         int y = static_cast<int>(idx / width);
                         Ray ray;
                         ray.origin = center;
                         ray.direction = panorama_direction(x + 0.5, y + 0.5, width, height);
                         ray.near = 1e-4;
                         ray.far = far;
                         RaySamples samples = sample_uniform(ray, samples_per_ray, false, rng);
                         RenderBuffers buf = integrate_ray(model, ray, samples, vis, opts);
                         set.color.set_rgb(x, y, buf.color);
                         set.depth.at(x, y) = buf.depth;
                         set.visibility.at(x, y) = buf.visibility;
                     }
                 });
    return set;
}

std::vector<RenderBuffers> render_image_buffers(const SceneModel& model,
                                                const PinholeCamera& camera,
                                                const RenderOptions& opts, const DenseGrid3* vis,
                                                int samples_per_ray, int threads) {
    std::vector<RenderBuffers> buffers(static_cast<std::size_t>(camera.width) * camera.height);
    parallel_for(buffers.size(), threads, [&](int, std::size_t begin, std::size_t end) {
        Rng rng(0);
        for (std::size_t idx = begin; idx < end; ++idx) {
            int x = static_cast<int>(idx % camera.width);
            int y = static_cast<int>(idx / camera.width);
            Ray ray = camera.pixel_ray(x, y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            RaySamples samples = sample_uniform(ray, samples_per_ray, false, rng);
            buffers[idx] = integrate_ray(model, ray, samples, vis, opts);
        }
    });
    return buffers;
}

}  // namespace sdfrecon
