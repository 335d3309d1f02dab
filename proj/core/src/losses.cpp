// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/losses.hpp"

#include "sdfrecon/error.hpp"

namespace sdfrecon {

namespace {
inline double sgn(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }
}  // namespace

double loss_recon_total(const LossComponents& p, const LossWeights& w) {
    return p.color + w.depth * p.depth + w.normal * p.normal + w.semantic * p.semantic +
           w.bg_smooth * p.bg_smooth + w.eikonal * p.eikonal + w.smooth * p.smooth +
           w.distinct * p.distinct;
}

double loss_color(const Vec3* pred, const Vec3* gt, int n, Vec3* d_pred) {
    if (n <= 0) throw InputError("loss_color: empty batch");
    double acc = 0.0;
    double inv = 1.0 / (3.0 * n);
    for (int i = 0; i < n; ++i) {
        Vec3 d = pred[i] - gt[i];
        acc += length1(d);
        if (d_pred) d_pred[i] = Vec3{sgn(d.x), sgn(d.y), sgn(d.z)} * inv;
    }
    return acc * inv;
}

AffineFit solve_depth_scale_shift(const double* pred, const double* cue, int n) {
    if (n < 2) throw InputError("solve_depth_scale_shift: need at least 2 rays");
    double sp = 0.0, sc = 0.0, spp = 0.0, spc = 0.0;
    for (int i = 0; i < n; ++i) {
        sp += pred[i];
        sc += cue[i];
        spp += pred[i] * pred[i];
        spc += pred[i] * cue[i];
    }
    double mean_p = sp / n, mean_c = sc / n;
    double var_p = spp / n - mean_p * mean_p;
    AffineFit fit;
    if (var_p <= 1e-12) {
        fit.w = 0.0;
        fit.q = mean_c;
        fit.degenerate = true;
        return fit;
    }
    double cov = spc / n - mean_p * mean_c;
    fit.w = cov / var_p;
    fit.q = mean_c - fit.w * mean_p;
    return fit;
}

double loss_depth(const double* pred, const double* cue, int n, double* d_pred,
                  AffineFit* fit_out) {
    AffineFit fit = solve_depth_scale_shift(pred, cue, n);
    if (fit_out) *fit_out = fit;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double r = fit.w * pred[i] + fit.q - cue[i];
        acc += r * r;
        // (w, q) sit at the least-squares optimum, so their sensitivity to
        // pred vanishes to first order; the direct term is the full gradient.
        if (d_pred) d_pred[i] = fit.degenerate ? 0.0 : 2.0 * fit.w * r / n;
    }
    return acc / n;
}

double loss_normal(const Vec3* pred, const Vec3* cue, int n, Vec3* d_pred) {
    if (n <= 0) throw InputError("loss_normal: empty batch");
    double acc = 0.0;
    double inv = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        Vec3 d = pred[i] - cue[i];
        double dotpc = dot(pred[i], cue[i]);
        acc += length1(d) + std::abs(1.0 - dotpc);
        if (d_pred) {
            Vec3 g{sgn(d.x), sgn(d.y), sgn(d.z)};
            g += cue[i] * -sgn(1.0 - dotpc);
            d_pred[i] = g * inv;
        }
    }
    return acc * inv;
}

double loss_semantic(const double* logits, int n, int k, const int* labels, double* d_logits) {
    if (n <= 0) throw InputError("loss_semantic: empty batch");
    if (k < 1) throw InputError("loss_semantic: need at least one class");
    double acc = 0.0;
    double inv = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        int label = labels[i];
        if (label < 1 || label > k) throw InputError("loss_semantic: label out of range");
        const double* row = logits + static_cast<std::size_t>(i) * k;
        double max_logit = row[0];
        for (int j = 1; j < k; ++j) max_logit = std::max(max_logit, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(row[j] - max_logit);
        double log_denom = std::log(denom) + max_logit;
        acc += log_denom - row[label - 1];
        if (d_logits) {
            double* drow = d_logits + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) {
                double soft = std::exp(row[j] - log_denom);
                drow[j] = (soft - (j == label - 1 ? 1.0 : 0.0)) * inv;
            }
        }
    }
    return acc * inv;
}

namespace {

// Scene-level SDF gradient at p: the argmin object's spatial gradient. The
// returned lambda scatters an upstream Vec3 into that object's grid.
struct SceneGradient {
    Vec3 grad;
    int argmin_index = 0;  // 0-based
};

SceneGradient scene_gradient(const SceneModel& model, const Vec3& p) {
    SceneGradient out;
    double best = 0.0;
    for (int j = 0; j < model.object_count(); ++j) {
        double v = model.objects[j].field.value(p);
        if (j == 0 || v < best) {
            best = v;
            out.argmin_index = j;
        }
    }
    const SdfField& field = model.objects[out.argmin_index].field;
    field.value_and_gradient(p, &out.grad);
    return out;
}

void scatter_gradient_upstream(const SceneModel& model, int object_index, const Vec3& p,
                               const Vec3& upstream, GradStore* grads) {
    if (!grads) return;
    const SdfField& field = model.objects[object_index].field;
    if (!field.is_grid()) return;
    if (double* sink = grads->slot(field.grid().param_id))
        field.grid().accum_spatial_grad(field.grid().locate(p), upstream, sink);
}

}  // namespace

double eikonal_point(const SceneModel& model, const Vec3& p, GradStore* grads, double upstream) {
    SceneGradient sg = scene_gradient(model, p);
    double norm = length(sg.grad);
    double value = std::abs(norm - 1.0);
    if (grads && norm > 1e-12) {
        Vec3 up = sg.grad * (sgn(norm - 1.0) / norm) * upstream;
        scatter_gradient_upstream(model, sg.argmin_index, p, up, grads);
    }
    return value;
}

double smooth_point(const SceneModel& model, const Vec3& p, const Vec3& p_tilde, GradStore* grads,
                    double upstream) {
    SceneGradient a = scene_gradient(model, p);
    SceneGradient b = scene_gradient(model, p_tilde);
    Vec3 d = a.grad - b.grad;
    if (grads) {
        Vec3 s{sgn(d.x), sgn(d.y), sgn(d.z)};
        scatter_gradient_upstream(model, a.argmin_index, p, s * upstream, grads);
        scatter_gradient_upstream(model, b.argmin_index, p_tilde, s * -upstream, grads);
    }
    return length1(d);
}

double distinct_point(const SceneModel& model, const Vec3& p, GradStore* grads, double upstream) {
    const int k = model.object_count();
    double s[kMaxObjects];
    int argmin = 0;
    for (int j = 0; j < k; ++j) {
        s[j] = model.objects[j].field.value(p);
        if (s[j] < s[argmin]) argmin = j;
    }
    double scene = s[argmin];
    double acc = 0.0;
    double sbar[kMaxObjects] = {};
    for (int j = 0; j < k; ++j) {
        double term = -s[j] - scene;
        if (term <= 0.0) continue;
        acc += term;
        sbar[j] -= upstream;
        sbar[argmin] -= upstream;
    }
    if (grads && acc > 0.0) {
        for (int j = 0; j < k; ++j) {
            if (sbar[j] == 0.0) continue;
            const SdfField& field = model.objects[j].field;
            if (!field.is_grid()) continue;
            if (double* sink = grads->slot(field.grid().param_id))
                field.grid().accum_value_grad(field.grid().locate(p), sbar[j], sink);
        }
    }
    return acc;
}

double loss_eikonal(const SceneModel& model, const std::vector<Vec3>& points, GradStore* grads,
                    double upstream) {
    if (points.empty()) return 0.0;
    double inv = 1.0 / static_cast<double>(points.size());
    double acc = 0.0;
    for (const Vec3& p : points) acc += eikonal_point(model, p, grads, upstream * inv);
    return acc * inv;
}

double loss_smooth(const SceneModel& model, const std::vector<Vec3>& points,
                   double perturb_radius, Rng& rng, GradStore* grads, double upstream) {
    if (points.empty()) return 0.0;
    double inv = 1.0 / static_cast<double>(points.size());
    double acc = 0.0;
    for (const Vec3& p : points) {
        Vec3 p_tilde = p + rng.uniform_in_ball() * perturb_radius;
        acc += smooth_point(model, p, p_tilde, grads, upstream * inv);
    }
    return acc * inv;
}

double loss_obj_distinct(const SceneModel& model, const std::vector<Vec3>& points,
                         GradStore* grads, double upstream) {
    if (points.empty()) return 0.0;
    double inv = 1.0 / static_cast<double>(points.size());
    double acc = 0.0;
    for (const Vec3& p : points) acc += distinct_point(model, p, grads, upstream * inv);
    return acc * inv;
}

double masked_multiscale_smoothness(const std::vector<double>& depth,
                                    const std::vector<Vec3>& normal,
                                    const std::vector<uint8_t>& mask, int patch,
                                    std::vector<double>* d_depth, std::vector<Vec3>* d_normal) {
    const std::size_t expect = static_cast<std::size_t>(patch) * patch;
    if (depth.size() != expect || normal.size() != expect || mask.size() != expect)
        throw InputError("masked_multiscale_smoothness: patch size mismatch");
    if (d_depth) d_depth->assign(expect, 0.0);
    if (d_normal) d_normal->assign(expect, Vec3{});
    auto idx = [patch](int m, int n) { return static_cast<std::size_t>(m) * patch + n; };
    double acc = 0.0;
    for (int d = 0; d <= 3; ++d) {
        int stride = 1 << d;
        if (patch - stride <= 0) break;
        for (int m = 0; m + stride < patch; ++m)
            for (int n = 0; n + stride < patch; ++n) {
                if (!mask[idx(m, n)]) continue;
                std::size_t a = idx(m, n), right = idx(m, n + stride), down = idx(m + stride, n);
                double dh = depth[a] - depth[right];
                double dv = depth[a] - depth[down];
                acc += std::abs(dh) + std::abs(dv);
                if (d_depth) {
                    (*d_depth)[a] += sgn(dh) + sgn(dv);
                    (*d_depth)[right] -= sgn(dh);
                    (*d_depth)[down] -= sgn(dv);
                }
                Vec3 nh = normal[a] - normal[right];
                Vec3 nv = normal[a] - normal[down];
                acc += length1(nh) + length1(nv);
                if (d_normal) {
                    Vec3 sh{sgn(nh.x), sgn(nh.y), sgn(nh.z)};
                    Vec3 sv{sgn(nv.x), sgn(nv.y), sgn(nv.z)};
                    (*d_normal)[a] += sh + sv;
                    (*d_normal)[right] -= sh;
                    (*d_normal)[down] -= sv;
                }
            }
    }
    return acc;
}

double loss_bg_smooth(const SceneModel& model, const PinholeCamera& camera, int patch_size,
                      int samples_per_ray, Rng& rng, GradStore* grads, double upstream) {
    const int P = patch_size;
    if (P > camera.width || P > camera.height)
        throw InputError("loss_bg_smooth: patch larger than image");
    int ox = static_cast<int>(rng.uniform_index(camera.width - P + 1));
    int oy = static_cast<int>(rng.uniform_index(camera.height - P + 1));

    const std::size_t count = static_cast<std::size_t>(P) * P;
    std::vector<double> zdepth(count, 0.0);
    std::vector<Vec3> normals(count);
    std::vector<uint8_t> mask(count, 0);
    std::vector<double> cosf(count, 1.0);
    std::vector<Ray> rays(count);
    std::vector<bool> valid(count, false);

    RenderOptions scene_opts;
    scene_opts.semantics = true;
    scene_opts.want_color = false;
    scene_opts.want_normal = false;
    RenderOptions bg_opts;
    bg_opts.object_id = SceneModel::kBackgroundId;
    bg_opts.want_color = false;

    Rng sampler(0);
    Vec3 fwd = camera.forward();
    for (int m = 0; m < P; ++m)
        for (int n = 0; n < P; ++n) {
            std::size_t i = static_cast<std::size_t>(m) * P + n;
            Ray ray = camera.pixel_ray(ox + n, oy + m, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            rays[i] = ray;
            valid[i] = true;
            RaySamples samples = sample_uniform(ray, samples_per_ray, false, sampler);
            RenderBuffers scene_buf = integrate_ray(model, ray, samples, nullptr, scene_opts);
            int argmax = 0;
            for (int j = 1; j < scene_buf.k; ++j)
                if (scene_buf.sem[j] > scene_buf.sem[argmax]) argmax = j;
            mask[i] = argmax != 0 ? 1 : 0;  // not the background
            RenderBuffers bg_buf = integrate_ray(model, ray, samples, nullptr, bg_opts);
            cosf[i] = dot(ray.direction, fwd);
            zdepth[i] = bg_buf.depth * cosf[i];
            normals[i] = bg_buf.normal;
        }

    std::vector<double> d_depth;
    std::vector<Vec3> d_normal;
    double value = masked_multiscale_smoothness(zdepth, normals, mask, P,
                                                grads ? &d_depth : nullptr,
                                                grads ? &d_normal : nullptr);
    if (grads) {
        RayWorkspace ws;
        for (std::size_t i = 0; i < count; ++i) {
            if (!valid[i]) continue;
            if (d_depth[i] == 0.0 && d_normal[i].x == 0.0 && d_normal[i].y == 0.0 &&
                d_normal[i].z == 0.0)
                continue;
            RaySamples samples = sample_uniform(rays[i], samples_per_ray, false, sampler);
            integrate_ray(model, rays[i], samples, nullptr, bg_opts, &ws);
            RayAdjoints adj;
            adj.d_depth = upstream * d_depth[i] * cosf[i];
            adj.d_normal = d_normal[i] * upstream;
            integrate_ray_backward(model, ws, adj, bg_opts, *grads);
        }
    }
    return value;
}

}  // namespace sdfrecon
