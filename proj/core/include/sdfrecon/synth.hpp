// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/image.hpp"
#include "sdfrecon/mesh.hpp"
#include "sdfrecon/scene.hpp"

namespace sdfrecon {

// One analytic building block of a synthetic object.
struct PartSpec {
    enum class Type { Sphere, Box };
    Type type = Type::Sphere;
    Vec3 center;
    Vec3 size;  // sphere: radius in x; box: half extents
    double yaw_deg = 0.0;
};

struct ObjectSpec {
    std::string name;
    std::string prompt;
    Vec3 albedo{0.7, 0.7, 0.7};
    std::vector<PartSpec> parts;
};

// Camera placement: `count` views on a circular arc of the given azimuth
// span (360 = closed circle), at radius_frac of the room's xz half-extent.
struct CameraRule {
    int count = 10;
    double radius_frac = 0.8;
    double height = 0.0;
    double arc_center_deg = 0.0;
    double arc_span_deg = 360.0;
    Vec3 look_at{0.0, -0.1, 0.0};
    double fov_deg = 60.0;
};

// Full recipe for a synthetic room scene; the background (room shell) is
// object id 1, foreground objects follow in listed order.
struct SceneSpec {
    std::string name;
    Vec3 room_half{0.9, 0.7, 0.9};
    Vec3 bg_albedo{0.82, 0.80, 0.76};
    std::string bg_prompt = "an empty room";
    std::vector<ObjectSpec> objects;
    CameraRule cameras;
    int image_size = 128;
    bool corrupt_depth = true;

    int object_count() const { return static_cast<int>(objects.size()) + 1; }

    void save(const std::string& path) const;
    static SceneSpec load(const std::string& path);
};

// Canned scenes: sphere-room, occluded-chair, two-object-room.
SceneSpec make_scene_spec(const std::string& name);
std::vector<std::string> canned_scene_names();

// Analytic ground-truth model (exact SDF fields; color grid unused).
SceneModel build_gt_model(const SceneSpec& spec);

// High-resolution isosurfaces of every object (background included).
std::vector<TriangleMesh> build_gt_meshes(const SceneSpec& spec, int resolution = 256);

std::vector<PinholeCamera> make_cameras(const SceneSpec& spec);

// Lambertian shading used for ground-truth RGB.
Vec3 shade_lambert(const Vec3& albedo, const Vec3& world_normal);

// Renders the dataset directory: per view NNN_{rgb.png, depth.pfm,
// normal.pfm, mask.png}, a cameras.txt manifest, scene.txt recipe and
// gt/object_XX.ply meshes. Depth cues are ray distance, optionally passed
// through a per-view affine so training exercises the scale/shift solve:
// stored cue = (depth - q*) / w*, i.e. depth = w* * cue + q*.
void render_dataset(const SceneSpec& spec, const std::string& out_dir, uint64_t seed,
                    int threads = 1, int gt_mesh_resolution = 256);

// Crisp reference maps rendered by sphere-tracing the analytic recipe; the
// same encodings the distillation path produces ((N+1)/2 + mask, shaded
// RGB). Used as mock distillation targets and in tests.
Image render_gt_geometry_map(const SceneSpec& spec, int object_id, const PinholeCamera& camera);
Image render_gt_color_map(const SceneSpec& spec, int object_id, const PinholeCamera& camera);

// A loaded training view.
struct DatasetView {
    PinholeCamera camera;
    Image rgb;
    Image depth;         // cue (ray distance up to the stored affine)
    Image normal;        // camera-frame unit normals
    std::vector<int> labels;  // 1-based object id per pixel
};

struct Dataset {
    std::string dir;
    SceneSpec spec;
    std::vector<DatasetView> views;
    int width = 0, height = 0;

    int object_count() const { return spec.object_count(); }
    static Dataset load(const std::string& dir);
};

}  // namespace sdfrecon
