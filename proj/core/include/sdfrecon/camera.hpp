// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "sdfrecon/math.hpp"

namespace sdfrecon {

// Ray with unit direction and a valid [near, far) segment in scene units.
struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
    double near = 0.0;
    double far = 0.0;

    Vec3 at(double t) const { return origin + direction * t; }
};

// Pinhole camera: intrinsics in pixels, camera-to-world rigid transform.
// Camera frame: +x right, +y down (image v), +z forward.
struct PinholeCamera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    Mat3 rotation;     // camera-to-world
    Vec3 translation;  // camera center in world space
    int width = 1, height = 1;

    void validate() const;

    // Ray through continuous image coordinate (u, v).
    Ray ray_through(double u, double v, double near, double far) const;

    // Ray through the center of pixel (i, j).
    Ray pixel_ray(int i, int j, double near, double far) const {
        return ray_through(i + 0.5, j + 0.5, near, far);
    }

    Vec3 forward() const { return {rotation(0, 2), rotation(1, 2), rotation(2, 2)}; }

    // World point -> continuous image coordinate; false if behind the camera.
    bool project(const Vec3& p, double* u, double* v) const;

    static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                 double fov_y_deg, int width, int height);
};

// Rays through the given continuous pixel coordinates. Coordinates must lie
// in [0, W) x [0, H).
std::vector<Ray> generate_rays(const PinholeCamera& camera,
                               const std::vector<std::pair<double, double>>& pixel_coords,
                               double near = 0.0, double far = 1e6);

// Restrict a ray segment to the intersection with `bounds` (plus a small
// epsilon at the near end so origins on the boundary still march).
bool clip_ray_to_bounds(Ray& ray, const Aabb& bounds);

}  // namespace sdfrecon
