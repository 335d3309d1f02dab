// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/camera.hpp"

#include "sdfrecon/error.hpp"

namespace sdfrecon {

void PinholeCamera::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw InputError("camera: focal lengths must be positive");
    if (width < 1 || height < 1) throw InputError("camera: image size must be >= 1");
    if (!rotation.is_orthonormal(1e-6)) throw InputError("camera: rotation is not orthonormal");
}

Ray PinholeCamera::ray_through(double u, double v, double near, double far) const {
    Vec3 dir_cam{(u - cx) / fx, (v - cy) / fy, 1.0};
    Ray ray;
    ray.origin = translation;
    ray.direction = normalized(rotation * dir_cam);
    ray.near = near;
    ray.far = far;
    return ray;
}

bool PinholeCamera::project(const Vec3& p, double* u, double* v) const {
    Vec3 pc = rotation.transposed_mul(p - translation);
    if (pc.z <= 1e-9) return false;
    if (u) *u = cx + fx * pc.x / pc.z;
    if (v) *v = cy + fy * pc.y / pc.z;
    return true;
}

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                     double fov_y_deg, int width, int height) {
    Vec3 fwd = normalized(target - eye);
    Vec3 up_ref = up;
    if (std::abs(dot(fwd, normalized(up_ref))) > 0.999)
        up_ref = std::abs(fwd.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 0, 1};
    Vec3 right = normalized(cross(fwd, up_ref));
    Vec3 down = cross(fwd, right);  // opposes up_ref by construction
    PinholeCamera cam;
    cam.rotation = Mat3::from_columns(right, down, fwd);
    cam.translation = eye;
    cam.width = width;
    cam.height = height;
    double f = 0.5 * height / std::tan(0.5 * deg_to_rad(fov_y_deg));
    cam.fx = f;
    cam.fy = f;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    return cam;
}

std::vector<Ray> generate_rays(const PinholeCamera& camera,
                               const std::vector<std::pair<double, double>>& pixel_coords,
                               double near, double far) {
    std::vector<Ray> rays;
    rays.reserve(pixel_coords.size());
    for (const auto& [u, v] : pixel_coords) {
        if (u < 0.0 || u >= camera.width || v < 0.0 || v >= camera.height)
            throw InputError("generate_rays: pixel coordinate out of range");
        rays.push_back(camera.ray_through(u, v, near, far));
    }
    return rays;
}

bool clip_ray_to_bounds(Ray& ray, const Aabb& bounds) {
    double t0 = ray.near, t1 = ray.far;
    if (!bounds.clip_ray(ray.origin, ray.direction, t0, t1)) return false;
    ray.near = std::max(t0, 1e-4);
    ray.far = t1;
    return ray.near < ray.far;
}

}  // namespace sdfrecon
