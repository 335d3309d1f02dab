// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/prior.hpp"

#include <cstdio>
#include <filesystem>

#include "sdfrecon/error.hpp"
#include "sdfrecon/parallel.hpp"

namespace sdfrecon {

namespace fs = std::filesystem;

Latent TargetPullPrior::predict(const PriorRequest& request) {
    Latent eps_hat = request.eps;
    if (!target_) return eps_hat;
    if (target_->channels() != request.z_t.channels())
        throw InputError("TargetPullPrior: target channel count mismatch");
    if (target_->width() != request.z_t.width() || target_->height() != request.z_t.height())
        target_ = fit_latent(*target_, request.z_t.width(), request.z_t.height());
    const Latent& target = *target_;
    double sqrt_ab = std::sqrt(request.alpha_bar);
    double sqrt_one = std::sqrt(1.0 - request.alpha_bar);
    for (std::size_t i = 0; i < eps_hat.data().size(); ++i) {
        double z0 = (request.z_t.data()[i] - sqrt_one * request.eps.data()[i]) / sqrt_ab;
        eps_hat.data()[i] += pull_ * (z0 - target.data()[i]);
    }
    return eps_hat;
}

namespace {

std::optional<Image> try_read_png(const std::string& path) {
    if (!fs::exists(path)) return std::nullopt;
    return read_png(path);
}

TargetPullPrior::TargetFn make_file_target_fn(std::string dir,
                                              std::vector<std::string> names) {
    return [dir = std::move(dir), names = std::move(names)](
               const PinholeCamera&, int object_id, LatentKind kind) -> std::optional<Latent> {
        if (object_id < 1 || object_id > static_cast<int>(names.size())) return std::nullopt;
        const std::string& name = names[object_id - 1];
        if (kind == LatentKind::Appearance) {
            auto img = try_read_png((fs::path(dir) / (name + "_color.png")).string());
            if (!img) return std::nullopt;
            return *img;  // resized by the step to latent resolution
        }
        auto normal = try_read_png((fs::path(dir) / (name + "_normal.png")).string());
        auto mask = try_read_png((fs::path(dir) / (name + "_mask.png")).string());
        if (!normal || !mask) return std::nullopt;
        if (mask->width() != normal->width() || mask->height() != normal->height())
            throw InputError("FilePrior: normal/mask size mismatch for " + name);
        Image packed(normal->width(), normal->height(), 4);
        for (int y = 0; y < packed.height(); ++y)
            for (int x = 0; x < packed.width(); ++x) {
                for (int c = 0; c < 3; ++c) packed.at(x, y, c) = normal->at(x, y, c);
                packed.at(x, y, 3) = mask->at(x, y, 0);
            }
        return packed;
    };
}

}  // namespace

FilePrior::FilePrior(std::string directory, const std::vector<std::string>& object_names,
                     double pull)
    : TargetPullPrior(make_file_target_fn(directory, object_names), pull), dir_(directory) {
    if (!fs::is_directory(dir_)) throw InputError("FilePrior: not a directory: " + dir_);
}

std::optional<std::string> FilePrior::panorama_path() const {
    fs::path p = fs::path(dir_) / "panorama.png";
    if (fs::exists(p)) return p.string();
    return std::nullopt;
}

std::pair<Latent, Latent> add_noise(const Latent& z, double t, const NoiseSchedule& schedule,
                                    Rng& rng) {
    if (t < schedule.t_min || t > schedule.t_max)
        throw InputError("add_noise: t outside the sampling range");
    double ab = schedule.alpha_bar(t);
    double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    Latent z_t(z.width(), z.height(), z.channels());
    Latent eps(z.width(), z.height(), z.channels());
    for (std::size_t i = 0; i < z.data().size(); ++i) {
        double e = rng.normal();
        eps.data()[i] = e;
        z_t.data()[i] = sa * z.data()[i] + sb * e;
    }
    return {std::move(z_t), std::move(eps)};
}

Latent sds_pixel_grad(const Latent& z, PriorBackend& prior, const std::string& prompt, double t,
                      const NoiseSchedule& schedule, Rng& rng) {
    auto [z_t, eps] = add_noise(z, t, schedule, rng);
    PriorRequest req{z_t, eps, t, schedule.alpha_bar(t), prompt};
    Latent eps_hat = prior.predict(req);
    if (eps_hat.width() != z.width() || eps_hat.height() != z.height() ||
        eps_hat.channels() != z.channels())
        throw InputError("prior returned a latent of the wrong shape");
    double w = schedule.weight(t);
    Latent g(z.width(), z.height(), z.channels());
    for (std::size_t i = 0; i < g.data().size(); ++i)
        g.data()[i] = w * (eps_hat.data()[i] - eps.data()[i]);
    return g;
}

Latent fit_latent(const Latent& src, int width, int height) {
    if (src.width() == width && src.height() == height) return src;
    if (src.width() % width == 0 && src.height() % height == 0 &&
        src.width() / width == src.height() / height)
        return src.downsample_area(src.width() / width);
    return resize_latent(src, width, height);
}

Latent resize_latent(const Latent& src, int width, int height) {
    if (src.width() == width && src.height() == height) return src;
    Latent out(width, height, src.channels());
    double sx = static_cast<double>(src.width()) / width;
    double sy = static_cast<double>(src.height()) / height;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < src.channels(); ++c)
                out.at(x, y, c) =
                    src.sample_bilinear((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5, c);
    return out;
}

Image render_geometry_map(const SceneModel& model, int object_id, const PinholeCamera& camera,
                          const OccupancyGrid* object_occ, double occ_step, int uniform_samples,
                          int threads, std::vector<RenderBuffers>* raw_buffers) {
    RenderOptions opts;
    opts.object_id = object_id;
    opts.want_color = false;
    const int W = camera.width, H = camera.height;
    std::vector<RenderBuffers> buffers(static_cast<std::size_t>(W) * H);
    parallel_for(buffers.size(), threads, [&](int, std::size_t begin, std::size_t end) {
        Rng rng(0);
        for (std::size_t idx = begin; idx < end; ++idx) {
            int x = static_cast<int>(idx % W), y = static_cast<int>(idx / W);
            Ray ray = camera.pixel_ray(x, y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            RaySamples samples = object_occ ? sample_occgrid(ray, *object_occ, occ_step)
                                            : sample_uniform(ray, uniform_samples, false, rng);
            buffers[idx] = integrate_ray(model, ray, samples, nullptr, opts);
        }
    });

    Mat3 rot_t = camera.rotation.transposed();
    Image map(W, H, 4);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const RenderBuffers& buf = buffers[static_cast<std::size_t>(y) * W + x];
            double len = length(buf.normal);
            Vec3 n_cam = len > 1e-6 ? rot_t * (buf.normal / len) : Vec3{0, 0, 0};
            map.at(x, y, 0) = 0.5 * (n_cam.x + 1.0);
            map.at(x, y, 1) = 0.5 * (n_cam.y + 1.0);
            map.at(x, y, 2) = 0.5 * (n_cam.z + 1.0);
            map.at(x, y, 3) = buf.mask;
        }
    if (raw_buffers) *raw_buffers = std::move(buffers);
    return map;
}

namespace {

// Visibility-weight map rendered at latent resolution with the same camera.
std::vector<double> latent_visibility(const SceneModel& model, const PinholeCamera& camera,
                                      const VisibilityGrid& vis, int latent_res,
                                      int samples_per_ray, int threads,
                                      double* mean_visibility) {
    double factor_x = static_cast<double>(camera.width) / latent_res;
    double factor_y = static_cast<double>(camera.height) / latent_res;
    std::vector<double> v(static_cast<std::size_t>(latent_res) * latent_res, 0.0);
    RenderOptions opts;
    opts.want_color = false;
    opts.want_normal = false;
    parallel_for(v.size(), threads, [&](int, std::size_t begin, std::size_t end) {
        Rng rng(0);
        for (std::size_t idx = begin; idx < end; ++idx) {
            int x = static_cast<int>(idx % latent_res), y = static_cast<int>(idx / latent_res);
            Ray ray = camera.ray_through((x + 0.5) * factor_x, (y + 0.5) * factor_y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            RaySamples samples = sample_uniform(ray, samples_per_ray, false, rng);
            v[idx] = integrate_ray(model, ray, samples, &vis.grid(), opts).visibility;
        }
    });
    double sum = 0.0;
    for (double x : v) sum += x;
    if (mean_visibility) *mean_visibility = v.empty() ? 0.0 : sum / v.size();
    return v;
}

}  // namespace

SdsStepResult sds_geometry_step(const SceneModel& model, int object_id,
                                const PinholeCamera& camera, const VisibilityGrid& vis,
                                PriorBackend& prior, const std::string& prompt,
                                const SdsConfig& cfg, const OccupancyGrid& object_occ, Rng& rng,
                                GradStore& grads) {
    SdsStepResult result;
    const int R = cfg.render_res;
    if (camera.width != R || camera.height != R)
        throw InputError("sds_geometry_step: camera resolution must match render_res");
    if (R % cfg.latent_res != 0)
        throw InputError("sds_geometry_step: latent_res must divide render_res");

    std::vector<RenderBuffers> buffers;
    Image map = render_geometry_map(model, object_id, camera, &object_occ, cfg.occ_step, 0,
                                    cfg.threads, &buffers);
    double max_mask = 0.0;
    for (const RenderBuffers& b : buffers) max_mask = std::max(max_mask, b.mask);
    if (max_mask < cfg.skip_mask_threshold) {
        std::fprintf(stderr, "warning: object %d invisible from sampled view; skipping step\n",
                     object_id);
        result.skipped = true;
        return result;
    }

    const int factor = R / cfg.latent_res;
    Latent z = map.downsample_area(factor);

    prior.prepare(camera, object_id, LatentKind::Geometry);
    double t = rng.uniform(cfg.schedule.t_min, cfg.schedule.t_max);
    result.t = t;
    Latent g = sds_pixel_grad(z, prior, prompt, t, cfg.schedule, rng);

    std::vector<double> vmap = latent_visibility(model, camera, vis, cfg.latent_res,
                                                 cfg.vis_samples_per_ray, cfg.threads,
                                                 &result.mean_visibility);
    double weight_sum = 0.0;
    for (int y = 0; y < cfg.latent_res; ++y)
        for (int x = 0; x < cfg.latent_res; ++x) {
            double wv = cfg.uniform_weight
                            ? 1.0
                            : visibility_weight(vmap[static_cast<std::size_t>(y) * cfg.latent_res + x],
                                                cfg.geometry_weights);
            weight_sum += wv;
            for (int c = 0; c < 4; ++c) g.at(x, y, c) *= wv * cfg.scale_geometry;
        }
    result.mean_weight = weight_sum / (cfg.latent_res * cfg.latent_res);

    // Backward: spread each latent adjoint uniformly over its source block,
    // undo the (N+1)/2 camera-frame encoding and the per-pixel
    // renormalization, then run the volume-rendering adjoint.
    RenderOptions opts;
    opts.object_id = object_id;
    opts.want_color = false;
    const double inv_area = 1.0 / (factor * factor);
    Mat3 rot = camera.rotation;
    RayWorkspace ws;
    Rng sampler(0);
    for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
            const Latent& gl = g;
            int lx = x / factor, ly = y / factor;
            Vec3 d_enc{gl.at(lx, ly, 0), gl.at(lx, ly, 1), gl.at(lx, ly, 2)};
            double d_mask = gl.at(lx, ly, 3);
            if (d_enc.x == 0.0 && d_enc.y == 0.0 && d_enc.z == 0.0 && d_mask == 0.0) continue;
            d_enc *= inv_area;
            d_mask *= inv_area;

            const RenderBuffers& buf = buffers[static_cast<std::size_t>(y) * R + x];
            RayAdjoints adj;
            adj.d_mask = d_mask;
            double len = length(buf.normal);
            if (len > 1e-6) {
                Vec3 d_ncam = d_enc * 0.5;
                Vec3 d_nhat = rot * d_ncam;  // adjoint of R^T
                Vec3 nhat = buf.normal / len;
                // Renormalization adjoint: (I - nhat nhat^T) / len.
                adj.d_normal = (d_nhat - nhat * dot(nhat, d_nhat)) / len;
            }

            Ray ray = camera.pixel_ray(x, y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            RaySamples samples = sample_occgrid(ray, object_occ, cfg.occ_step);
            if (samples.empty()) continue;
            integrate_ray(model, ray, samples, nullptr, opts, &ws);
            integrate_ray_backward(model, ws, adj, opts, grads);
        }
    return result;
}

SdsStepResult sds_appearance_step(const SceneModel& model, const SurfaceColorField& surf,
                                  int object_id, const PinholeCamera& camera,
                                  const VisibilityGrid& vis, PriorBackend& prior,
                                  const std::string& prompt, const SdsConfig& cfg, Rng& rng,
                                  GradStore& grads) {
    SdsStepResult result;
    const int R = cfg.render_res;
    if (camera.width != R || camera.height != R)
        throw InputError("sds_appearance_step: camera resolution must match render_res");
    if (R % cfg.latent_res != 0)
        throw InputError("sds_appearance_step: latent_res must divide render_res");

    const SdfField& field = model.object_by_id(object_id).field;
    Image map(R, R, 3);
    std::vector<SurfaceHit> hits(static_cast<std::size_t>(R) * R);
    std::size_t hit_count = 0;
    parallel_for(hits.size(), cfg.threads, [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            int x = static_cast<int>(idx % R), y = static_cast<int>(idx / R);
            Ray ray = camera.pixel_ray(x, y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            auto traced = sphere_trace(field, ray);
            Vec3 color;
            if (traced) {
                hits[idx] = {true, object_id, traced->point};
                color = surf.color_at(object_id, traced->point);
            } else {
                color = surf.background_color(ray.direction);
            }
            map.at(x, y, 0) = color.x;
            map.at(x, y, 1) = color.y;
            map.at(x, y, 2) = color.z;
        }
    });
    for (const SurfaceHit& h : hits) hit_count += h.hit ? 1 : 0;
    if (hit_count < cfg.skip_mask_threshold * hits.size()) {
        std::fprintf(stderr, "warning: object %d barely visible from sampled view; skipping\n",
                     object_id);
        result.skipped = true;
        return result;
    }

    const int factor = R / cfg.latent_res;
    Latent z = map.downsample_area(factor);
    prior.prepare(camera, object_id, LatentKind::Appearance);
    double t = rng.uniform(cfg.schedule.t_min, cfg.schedule.t_max);
    result.t = t;
    Latent g = sds_pixel_grad(z, prior, prompt, t, cfg.schedule, rng);

    std::vector<double> vmap = latent_visibility(model, camera, vis, cfg.latent_res,
                                                 cfg.vis_samples_per_ray, cfg.threads,
                                                 &result.mean_visibility);
    double weight_sum = 0.0;
    for (int y = 0; y < cfg.latent_res; ++y)
        for (int x = 0; x < cfg.latent_res; ++x) {
            double wv = cfg.uniform_weight
                            ? 1.0
                            : visibility_weight(vmap[static_cast<std::size_t>(y) * cfg.latent_res + x],
                                                cfg.appearance_weights);
            weight_sum += wv;
            for (int c = 0; c < 3; ++c) g.at(x, y, c) *= wv * cfg.scale_appearance;
        }
    result.mean_weight = weight_sum / (cfg.latent_res * cfg.latent_res);

    const double inv_area = 1.0 / (factor * factor);
    for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
            const SurfaceHit& hit = hits[static_cast<std::size_t>(y) * R + x];
            if (!hit.hit) continue;
            int lx = x / factor, ly = y / factor;
            Vec3 d_color{g.at(lx, ly, 0), g.at(lx, ly, 1), g.at(lx, ly, 2)};
            if (d_color.x == 0.0 && d_color.y == 0.0 && d_color.z == 0.0) continue;
            surface_color_backward(surf, hit, d_color * inv_area, grads);
        }
    return result;
}

}  // namespace sdfrecon
