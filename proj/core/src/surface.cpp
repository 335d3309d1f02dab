// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/surface.hpp"

#include <cstdio>
#include <filesystem>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

namespace fs = std::filesystem;

std::vector<ParamArray> SurfaceColorField::param_arrays() {
    std::vector<ParamArray> params;
    for (std::size_t i = 0; i < object_color.size(); ++i) {
        object_color[i].param_id = static_cast<int>(params.size());
        params.push_back({"surface_color." + std::to_string(i + 1), object_color[i].data(),
                          object_color[i].value_count()});
    }
    return params;
}

Vec3 SurfaceColorField::background_color(const Vec3& direction) const {
    if (panorama.empty()) return {0.5, 0.5, 0.5};
    // Invert the equirectangular mapping (u=0 faces +z).
    double azimuth = std::atan2(direction.x, direction.z);
    if (azimuth < 0.0) azimuth += 2.0 * kPi;
    double polar = std::acos(std::clamp(direction.y, -1.0, 1.0));
    double u = azimuth / (2.0 * kPi) * panorama.width() - 0.5;
    double v = polar / kPi * panorama.height() - 0.5;
    return {panorama.sample_bilinear(u, v, 0), panorama.sample_bilinear(u, v, 1),
            panorama.sample_bilinear(u, v, 2)};
}

void SurfaceColorField::save(const std::string& dir) const {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < object_color.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "surface_%02zu.grid", i + 1);
        object_color[i].save((fs::path(dir) / name).string());
    }
    if (!panorama.empty()) write_pfm((fs::path(dir) / "panorama.pfm").string(), panorama);
}

SurfaceColorField SurfaceColorField::load(const std::string& dir, int object_count) {
    SurfaceColorField surf;
    for (int i = 1; i <= object_count; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "surface_%02d.grid", i);
        surf.object_color.push_back(DenseGrid3::load((fs::path(dir) / name).string()));
    }
    fs::path pano = fs::path(dir) / "panorama.pfm";
    if (fs::exists(pano)) surf.panorama = read_pfm(pano.string());
    return surf;
}

SurfaceHit trace_scene(const SceneModel& model, const Ray& ray, double tol, int max_steps,
                       double min_step) {
    // March the scene min-field, then attribute the hit to the argmin object.
    double t = ray.near;
    auto scene_value = [&](double at) { return scene_sdf(model, ray.at(at)); };
    auto [s_prev, arg_prev] = scene_value(t);
    if (std::abs(s_prev) < tol) return {true, arg_prev, ray.at(t)};
    for (int step = 0; step < max_steps && t <= ray.far; ++step) {
        double advance = std::max(std::abs(s_prev), min_step);
        double t_next = t + advance;
        if (t_next > ray.far) return {};
        auto [s_next, arg_next] = scene_value(t_next);
        if (std::abs(s_next) < tol) return {true, arg_next, ray.at(t_next)};
        if ((s_prev > 0.0) != (s_next > 0.0)) {
            double lo = t, hi = t_next;
            double s_lo = s_prev;
            for (int it = 0; it < 64; ++it) {
                double mid = 0.5 * (lo + hi);
                auto [s_mid, arg_mid] = scene_value(mid);
                if (std::abs(s_mid) < tol) return {true, arg_mid, ray.at(mid)};
                if ((s_lo > 0.0) == (s_mid > 0.0)) {
                    lo = mid;
                    s_lo = s_mid;
                } else {
                    hi = mid;
                }
            }
            double mid = 0.5 * (lo + hi);
            return {true, scene_value(mid).second, ray.at(mid)};
        }
        t = t_next;
        s_prev = s_next;
    }
    return {};
}

Vec3 surface_color(const SceneModel& model, const SurfaceColorField& surf, const Ray& ray,
                   SurfaceHit* hit_out) {
    SurfaceHit hit = trace_scene(model, ray);
    if (hit_out) *hit_out = hit;
    if (!hit.hit) return surf.background_color(ray.direction);
    return surf.color_at(hit.object_id, hit.point);
}

void surface_color_backward(const SurfaceColorField& surf, const SurfaceHit& hit,
                            const Vec3& d_color, GradStore& grads) {
    if (!hit.hit) return;
    const DenseGrid3& grid = surf.object_color[hit.object_id - 1];
    double* sink = grads.slot(grid.param_id);
    if (!sink) return;
    GridQuery q = grid.locate(hit.point);
    Vec3 raw = grid.sample_vec3(q);
    Vec3 up{d_color.x * sigmoid(raw.x) * (1.0 - sigmoid(raw.x)),
            d_color.y * sigmoid(raw.y) * (1.0 - sigmoid(raw.y)),
            d_color.z * sigmoid(raw.z) * (1.0 - sigmoid(raw.z))};
    grid.accum_value_grad_vec3(q, up, sink);
}

Image inpaint_pushpull(const Image& color, const Image& mask) {
    if (mask.width() != color.width() || mask.height() != color.height())
        throw InputError("inpaint_pushpull: mask size mismatch");
    const int C = color.channels();

    // Build a mip pyramid of (premultiplied color, coverage), then pull the
    // coarse fill back down into the holes.
    struct Level {
        Image rgba;  // C channels premultiplied + 1 coverage
    };
    std::vector<Level> levels;
    Image base(color.width(), color.height(), C + 1);
    for (int y = 0; y < color.height(); ++y)
        for (int x = 0; x < color.width(); ++x) {
            double known = mask.at(x, y) < 0.5 ? 1.0 : 0.0;
            for (int c = 0; c < C; ++c) base.at(x, y, c) = color.at(x, y, c) * known;
            base.at(x, y, C) = known;
        }
    levels.push_back({std::move(base)});
    while (levels.back().rgba.width() > 1 && levels.back().rgba.height() > 1 &&
           levels.back().rgba.width() % 2 == 0 && levels.back().rgba.height() % 2 == 0) {
        levels.push_back({levels.back().rgba.downsample_area(2)});
    }

    // Pull: fill zero-coverage pixels from the parent level.
    for (int li = static_cast<int>(levels.size()) - 2; li >= 0; --li) {
        Image& cur = levels[li].rgba;
        const Image& parent = levels[li + 1].rgba;
        for (int y = 0; y < cur.height(); ++y)
            for (int x = 0; x < cur.width(); ++x) {
                if (cur.at(x, y, C) > 1e-9) continue;
                double px = (x + 0.5) / 2.0 - 0.5;
                double py = (y + 0.5) / 2.0 - 0.5;
                double cov = parent.sample_bilinear(px, py, C);
                if (cov <= 1e-12) continue;
                for (int c = 0; c < C; ++c) cur.at(x, y, c) = parent.sample_bilinear(px, py, c);
                cur.at(x, y, C) = cov;
            }
    }

    Image out(color.width(), color.height(), C);
    const Image& filled = levels.front().rgba;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            double cov = filled.at(x, y, C);
            if (mask.at(x, y) < 0.5) {
                for (int c = 0; c < C; ++c) out.at(x, y, c) = color.at(x, y, c);
            } else if (cov > 1e-12) {
                for (int c = 0; c < C; ++c) out.at(x, y, c) = filled.at(x, y, c) / cov;
            } else {
                for (int c = 0; c < C; ++c) out.at(x, y, c) = 0.5;
            }
        }
    return out;
}

}  // namespace sdfrecon
