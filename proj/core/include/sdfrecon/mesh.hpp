// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "sdfrecon/rng.hpp"
#include "sdfrecon/sdf.hpp"

namespace sdfrecon {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> vertex_normals;  // optional; aligned with vertices when present

    bool empty() const { return triangles.empty(); }
    double area() const;
    Aabb bounds() const;
    Vec3 face_normal(int tri) const;
    double face_area(int tri) const;
};

// Isosurface of `field` sampled on a `resolution`^3 cell lattice over
// `bounds`. Cubes are split into six tetrahedra sharing the main diagonal,
// which yields a watertight, consistently oriented mesh without case tables;
// triangle orientation follows the field gradient (outward for SDFs).
// Fields with no zero crossing produce an empty mesh.
TriangleMesh extract_isosurface(const SdfField& field, int resolution, const Aabb& bounds,
                                double iso = 0.0);

// Drops triangles with area below `min_area` and unreferenced vertices.
void remove_degenerate_triangles(TriangleMesh& mesh, double min_area = 1e-12);

void write_ply(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const std::string& path);
void write_obj(const std::string& path, const TriangleMesh& mesh);

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;

    std::size_t size() const { return points.size(); }
};

// Area-weighted uniform surface sampling; normals interpolate vertex normals
// when present, otherwise the face normal.
PointCloud sample_points(const TriangleMesh& mesh, int n, Rng& rng);

}  // namespace sdfrecon
