// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "sdfrecon/config.hpp"
#include "sdfrecon/error.hpp"
#include "sdfrecon/parallel.hpp"
#include "sdfrecon/surface.hpp"

namespace sdfrecon {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<const AnalyticSdf> build_part(const PartSpec& part) {
    switch (part.type) {
        case PartSpec::Type::Sphere:
            return std::make_shared<SphereSdf>(part.center, part.size.x);
        case PartSpec::Type::Box:
            return std::make_shared<BoxSdf>(part.center, part.size,
                                            Mat3::rotation_y(deg_to_rad(part.yaw_deg)));
    }
    throw InputError("unknown part type");
}

SdfField build_object_field(const ObjectSpec& obj) {
    if (obj.parts.empty()) throw InputError("object '" + obj.name + "' has no parts");
    if (obj.parts.size() == 1) return SdfField(build_part(obj.parts.front()));
    std::vector<std::shared_ptr<const AnalyticSdf>> children;
    for (const PartSpec& part : obj.parts) children.push_back(build_part(part));
    return SdfField(std::make_shared<UnionSdf>(std::move(children)));
}

std::string part_to_string(const PartSpec& p) {
    char buf[256];
    if (p.type == PartSpec::Type::Sphere)
        std::snprintf(buf, sizeof(buf), "sphere %.17g %.17g %.17g %.17g", p.center.x, p.center.y,
                      p.center.z, p.size.x);
    else
        std::snprintf(buf, sizeof(buf), "box %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                      p.center.x, p.center.y, p.center.z, p.size.x, p.size.y, p.size.z,
                      p.yaw_deg);
    return buf;
}

PartSpec part_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    PartSpec p;
    if (kind == "sphere") {
        p.type = PartSpec::Type::Sphere;
        if (!(in >> p.center.x >> p.center.y >> p.center.z >> p.size.x))
            throw InputError("bad sphere part: " + text);
    } else if (kind == "box") {
        p.type = PartSpec::Type::Box;
        if (!(in >> p.center.x >> p.center.y >> p.center.z >> p.size.x >> p.size.y >> p.size.z >>
              p.yaw_deg))
            throw InputError("bad box part: " + text);
    } else {
        throw InputError("unknown part kind: " + kind);
    }
    return p;
}

}  // namespace

void SceneSpec::save(const std::string& path) const {
    KeyValueFile kv;
    kv.set("name", name);
    kv.set_vec3("room_half", room_half);
    kv.set_vec3("bg_albedo", bg_albedo);
    kv.set("bg_prompt", bg_prompt);
    kv.set_int("image_size", image_size);
    kv.set_int("corrupt_depth", corrupt_depth ? 1 : 0);
    kv.set_int("fg_count", static_cast<long>(objects.size()));
    for (std::size_t i = 0; i < objects.size(); ++i) {
        std::string p = "fg." + std::to_string(i + 1) + ".";
        kv.set(p + "name", objects[i].name);
        kv.set(p + "prompt", objects[i].prompt);
        kv.set_vec3(p + "albedo", objects[i].albedo);
        kv.set_int(p + "parts", static_cast<long>(objects[i].parts.size()));
        for (std::size_t j = 0; j < objects[i].parts.size(); ++j)
            kv.set(p + "part." + std::to_string(j + 1), part_to_string(objects[i].parts[j]));
    }
    kv.set_int("cameras.count", cameras.count);
    kv.set_double("cameras.radius_frac", cameras.radius_frac);
    kv.set_double("cameras.height", cameras.height);
    kv.set_double("cameras.arc_center_deg", cameras.arc_center_deg);
    kv.set_double("cameras.arc_span_deg", cameras.arc_span_deg);
    kv.set_vec3("cameras.look_at", cameras.look_at);
    kv.set_double("cameras.fov_deg", cameras.fov_deg);
    kv.save(path);
}

SceneSpec SceneSpec::load(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    SceneSpec spec;
    spec.name = kv.get("name");
    spec.room_half = kv.get_vec3("room_half");
    spec.bg_albedo = kv.get_vec3("bg_albedo");
    spec.bg_prompt = kv.get_or("bg_prompt", "an empty room");
    spec.image_size = static_cast<int>(kv.get_int("image_size"));
    spec.corrupt_depth = kv.get_int("corrupt_depth") != 0;
    int fg = static_cast<int>(kv.get_int("fg_count"));
    for (int i = 1; i <= fg; ++i) {
        std::string p = "fg." + std::to_string(i) + ".";
        ObjectSpec obj;
        obj.name = kv.get(p + "name");
        obj.prompt = kv.get_or(p + "prompt", "");
        obj.albedo = kv.get_vec3(p + "albedo");
        int parts = static_cast<int>(kv.get_int(p + "parts"));
        for (int j = 1; j <= parts; ++j)
            obj.parts.push_back(part_from_string(kv.get(p + "part." + std::to_string(j))));
        spec.objects.push_back(std::move(obj));
    }
    spec.cameras.count = static_cast<int>(kv.get_int("cameras.count"));
    spec.cameras.radius_frac = kv.get_double("cameras.radius_frac");
    spec.cameras.height = kv.get_double("cameras.height");
    spec.cameras.arc_center_deg = kv.get_double("cameras.arc_center_deg");
    spec.cameras.arc_span_deg = kv.get_double("cameras.arc_span_deg");
    spec.cameras.look_at = kv.get_vec3("cameras.look_at");
    spec.cameras.fov_deg = kv.get_double("cameras.fov_deg");
    return spec;
}

SceneSpec make_scene_spec(const std::string& name) {
    SceneSpec spec;
    spec.name = name;
    if (name == "sphere-room") {
        ObjectSpec ball;
        ball.name = "ball";
        ball.prompt = "a smooth sphere";
        ball.albedo = {0.75, 0.25, 0.2};
        ball.parts.push_back({PartSpec::Type::Sphere, {0.0, -0.35, 0.0}, {0.35, 0, 0}, 0.0});
        spec.objects.push_back(std::move(ball));
        spec.cameras.look_at = {0.0, -0.2, 0.0};
    } else if (name == "two-object-room") {
        ObjectSpec ball;
        ball.name = "ball";
        ball.prompt = "a smooth sphere";
        ball.albedo = {0.2, 0.45, 0.75};
        ball.parts.push_back({PartSpec::Type::Sphere, {-0.35, -0.4, 0.1}, {0.3, 0, 0}, 0.0});
        ObjectSpec crate;
        crate.name = "crate";
        crate.prompt = "a wooden crate";
        crate.albedo = {0.7, 0.5, 0.25};
        crate.parts.push_back(
            {PartSpec::Type::Box, {0.4, -0.45, -0.2}, {0.22, 0.25, 0.2}, 30.0});
        spec.objects.push_back(std::move(ball));
        spec.objects.push_back(std::move(crate));
        spec.cameras.look_at = {0.0, -0.25, 0.0};
    } else if (name == "occluded-chair") {
        ObjectSpec cabinet;
        cabinet.name = "cabinet";
        cabinet.prompt = "a tall wooden cabinet";
        cabinet.albedo = {0.55, 0.4, 0.25};
        cabinet.parts.push_back(
            {PartSpec::Type::Box, {0.25, -0.25, 0.0}, {0.12, 0.45, 0.55}, 0.0});
        ObjectSpec chair;
        chair.name = "chair";
        chair.prompt = "a simple chair";
        chair.albedo = {0.2, 0.55, 0.3};
        // seat
        chair.parts.push_back(
            {PartSpec::Type::Box, {-0.3, -0.42, 0.0}, {0.16, 0.03, 0.16}, 0.0});
        // backrest
        chair.parts.push_back(
            {PartSpec::Type::Box, {-0.44, -0.22, 0.0}, {0.03, 0.2, 0.16}, 0.0});
        // legs
        for (double sx : {-1.0, 1.0})
            for (double sz : {-1.0, 1.0})
                chair.parts.push_back({PartSpec::Type::Box,
                                       {-0.3 + 0.13 * sx, -0.56, 0.13 * sz},
                                       {0.025, 0.11, 0.025},
                                       0.0});
        spec.objects.push_back(std::move(cabinet));
        spec.objects.push_back(std::move(chair));
        spec.cameras.arc_center_deg = 90.0;  // arc on the +x side, cabinet in front
        spec.cameras.arc_span_deg = 100.0;
        spec.cameras.look_at = {0.0, -0.2, 0.0};
    } else {
        throw UsageError("unknown scene '" + name + "'; available: sphere-room, occluded-chair, two-object-room");
    }
    return spec;
}

std::vector<std::string> canned_scene_names() {
    return {"sphere-room", "occluded-chair", "two-object-room"};
}

SceneModel build_gt_model(const SceneSpec& spec) {
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    SceneObject bg;
    bg.name = "background";
    bg.prompt = spec.bg_prompt;
    bg.field = SdfField(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, spec.room_half));
    model.objects.push_back(std::move(bg));
    for (const ObjectSpec& obj : spec.objects) {
        SceneObject so;
        so.name = obj.name;
        so.prompt = obj.prompt;
        so.field = build_object_field(obj);
        model.objects.push_back(std::move(so));
    }
    if (model.object_count() > kMaxObjects) throw InputError("too many objects in scene spec");
    model.color = DenseGrid3(4, 4, 4, 3, model.bounds, 0.0);
    return model;
}

std::vector<TriangleMesh> build_gt_meshes(const SceneSpec& spec, int resolution) {
    SceneModel model = build_gt_model(spec);
    std::vector<TriangleMesh> meshes;
    for (const SceneObject& obj : model.objects)
        meshes.push_back(extract_isosurface(obj.field, resolution, model.bounds));
    return meshes;
}

std::vector<PinholeCamera> make_cameras(const SceneSpec& spec) {
    const CameraRule& rule = spec.cameras;
    if (rule.count < 1) throw InputError("camera rule: count must be >= 1");
    std::vector<PinholeCamera> cams;
    double radius = rule.radius_frac * std::min(spec.room_half.x, spec.room_half.z);
    for (int i = 0; i < rule.count; ++i) {
        double az_deg;
        if (rule.arc_span_deg >= 360.0) {
            az_deg = 360.0 * i / rule.count;
        } else {
            double f = rule.count == 1 ? 0.5 : static_cast<double>(i) / (rule.count - 1);
            az_deg = rule.arc_center_deg + rule.arc_span_deg * (f - 0.5);
        }
        double az = deg_to_rad(az_deg);
        Vec3 eye{radius * std::sin(az), rule.height, radius * std::cos(az)};
        cams.push_back(PinholeCamera::look_at(eye, rule.look_at, {0, 1, 0}, rule.fov_deg,
                                              spec.image_size, spec.image_size));
    }
    return cams;
}

Vec3 shade_lambert(const Vec3& albedo, const Vec3& world_normal) {
    static const Vec3 light = normalized({0.35, 0.9, 0.2});
    double diffuse = std::max(0.0, dot(world_normal, light));
    double term = 0.35 + 0.65 * diffuse;
    return albedo * term;
}

void render_dataset(const SceneSpec& spec, const std::string& out_dir, uint64_t seed, int threads,
                    int gt_mesh_resolution) {
    SceneModel gt = build_gt_model(spec);
    std::vector<PinholeCamera> cams = make_cameras(spec);
    fs::create_directories(fs::path(out_dir) / "views");
    fs::create_directories(fs::path(out_dir) / "gt");

    Rng rng(seed);
    KeyValueFile manifest;
    manifest.set_int("view_count", static_cast<long>(cams.size()));
    manifest.set_int("width", spec.image_size);
    manifest.set_int("height", spec.image_size);
    manifest.set_int("seed", static_cast<long>(seed));

    const int W = spec.image_size, H = spec.image_size;
    for (std::size_t view = 0; view < cams.size(); ++view) {
        const PinholeCamera& cam = cams[view];
        double wstar = 1.0, qstar = 0.0;
        if (spec.corrupt_depth) {
            wstar = rng.uniform(0.8, 1.25);
            qstar = rng.uniform(-0.1, 0.1);
        }
        Image rgb(W, H, 3);
        Image depth(W, H, 1);
        Image normal(W, H, 3);
        std::vector<int> labels(static_cast<std::size_t>(W) * H, 1);

        parallel_for(static_cast<std::size_t>(W) * H, threads,
                     [&](int, std::size_t begin, std::size_t end) {
                         for (std::size_t idx = begin; idx < end; ++idx) {
                             int x = static_cast<int>(idx % W), y = static_cast<int>(idx / W);
                             Ray ray = cam.pixel_ray(x, y, 0.0, 1e9);
                             if (!clip_ray_to_bounds(ray, gt.bounds)) continue;
                             SurfaceHit hit = trace_scene(gt, ray, 1e-6, 512, 1e-5);
                             if (!hit.hit) {
                                 depth.at(x, y) = ray.far;
                                 labels[idx] = 1;
                                 continue;
                             }
                             const SceneObject& obj = gt.object_by_id(hit.object_id);
                             Vec3 n;
                             obj.field.value_and_gradient(hit.point, &n);
                             n = normalized(n);
                             Vec3 albedo = hit.object_id == 1
                                               ? spec.bg_albedo
                                               : spec.objects[hit.object_id - 2].albedo;
                             rgb.set_rgb(x, y, shade_lambert(albedo, n));
                             double t = length(hit.point - ray.origin);
                             depth.at(x, y) = (t - qstar) / wstar;
                             Vec3 n_cam = cam.rotation.transposed_mul(n);
                             normal.at(x, y, 0) = n_cam.x;
                             normal.at(x, y, 1) = n_cam.y;
                             normal.at(x, y, 2) = n_cam.z;
                             labels[idx] = hit.object_id;
                         }
                     });

        char stem[32];
        std::snprintf(stem, sizeof(stem), "%03zu", view);
        fs::path base = fs::path(out_dir) / "views";
        write_png((base / (std::string(stem) + "_rgb.png")).string(), rgb);
        write_pfm((base / (std::string(stem) + "_depth.pfm")).string(), depth);
        write_pfm((base / (std::string(stem) + "_normal.pfm")).string(), normal);
        write_label_png((base / (std::string(stem) + "_mask.png")).string(), labels, W, H);

        std::string p = "view." + std::to_string(view) + ".";
        manifest.set_double(p + "fx", cam.fx);
        manifest.set_double(p + "fy", cam.fy);
        manifest.set_double(p + "cx", cam.cx);
        manifest.set_double(p + "cy", cam.cy);
        std::string pose;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) pose += format_double(cam.rotation(r, c)) + " ";
        pose += format_double(cam.translation.x) + " " + format_double(cam.translation.y) + " " +
                format_double(cam.translation.z);
        manifest.set(p + "pose", pose);
        manifest.set_double(p + "depth_wstar", wstar);
        manifest.set_double(p + "depth_qstar", qstar);
    }
    manifest.save((fs::path(out_dir) / "cameras.txt").string());
    spec.save((fs::path(out_dir) / "scene.txt").string());

    std::vector<TriangleMesh> meshes = build_gt_meshes(spec, gt_mesh_resolution);
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "object_%02zu.ply", i + 1);
        write_ply((fs::path(out_dir) / "gt" / name).string(), meshes[i]);
    }
}

Image render_gt_geometry_map(const SceneSpec& spec, int object_id, const PinholeCamera& camera) {
    SceneModel gt = build_gt_model(spec);
    if (object_id < 1 || object_id > gt.object_count())
        throw InputError("render_gt_geometry_map: object id out of range");
    const SdfField& field = gt.object_by_id(object_id).field;
    Image map(camera.width, camera.height, 4);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            map.at(x, y, 0) = 0.5;
            map.at(x, y, 1) = 0.5;
            map.at(x, y, 2) = 0.5;
            Ray ray = camera.pixel_ray(x, y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, gt.bounds)) continue;
            auto hit = sphere_trace(field, ray, 1e-5, 512, 1e-5);
            if (!hit) continue;
            Vec3 n;
            field.value_and_gradient(hit->point, &n);
            Vec3 n_cam = camera.rotation.transposed_mul(normalized(n));
            map.at(x, y, 0) = 0.5 * (n_cam.x + 1.0);
            map.at(x, y, 1) = 0.5 * (n_cam.y + 1.0);
            map.at(x, y, 2) = 0.5 * (n_cam.z + 1.0);
            map.at(x, y, 3) = 1.0;
        }
    return map;
}

Image render_gt_color_map(const SceneSpec& spec, int object_id, const PinholeCamera& camera) {
    SceneModel gt = build_gt_model(spec);
    if (object_id < 1 || object_id > gt.object_count())
        throw InputError("render_gt_color_map: object id out of range");
    const SdfField& field = gt.object_by_id(object_id).field;
    Vec3 albedo = object_id == 1 ? spec.bg_albedo : spec.objects[object_id - 2].albedo;
    Image map(camera.width, camera.height, 3);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            map.at(x, y, 0) = 0.5;
            map.at(x, y, 1) = 0.5;
            map.at(x, y, 2) = 0.5;
            Ray ray = camera.pixel_ray(x, y, 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, gt.bounds)) continue;
            auto hit = sphere_trace(field, ray, 1e-5, 512, 1e-5);
            if (!hit) continue;
            Vec3 n;
            field.value_and_gradient(hit->point, &n);
            map.set_rgb(x, y, shade_lambert(albedo, normalized(n)));
        }
    return map;
}

Dataset Dataset::load(const std::string& dir) {
    Dataset ds;
    ds.dir = dir;
    fs::path root(dir);
    std::vector<std::string> missing;
    if (!fs::exists(root / "scene.txt")) missing.push_back("scene.txt");
    if (!fs::exists(root / "cameras.txt")) missing.push_back("cameras.txt");
    if (!missing.empty()) {
        std::string msg = "dataset missing inputs:";
        for (const auto& m : missing) msg += " " + m;
        throw InputError(msg);
    }
    ds.spec = SceneSpec::load((root / "scene.txt").string());
    KeyValueFile manifest = KeyValueFile::parse_file((root / "cameras.txt").string());
    int count = static_cast<int>(manifest.get_int("view_count"));
    ds.width = static_cast<int>(manifest.get_int("width"));
    ds.height = static_cast<int>(manifest.get_int("height"));
    for (int view = 0; view < count; ++view) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%03d", view);
        fs::path base = root / "views";
        for (const char* suffix : {"_rgb.png", "_depth.pfm", "_normal.pfm", "_mask.png"}) {
            if (!fs::exists(base / (std::string(stem) + suffix)))
                missing.push_back("views/" + std::string(stem) + suffix);
        }
        if (!missing.empty()) continue;
        DatasetView dv;
        std::string p = "view." + std::to_string(view) + ".";
        dv.camera.fx = manifest.get_double(p + "fx");
        dv.camera.fy = manifest.get_double(p + "fy");
        dv.camera.cx = manifest.get_double(p + "cx");
        dv.camera.cy = manifest.get_double(p + "cy");
        dv.camera.width = ds.width;
        dv.camera.height = ds.height;
        std::istringstream pose(manifest.get(p + "pose"));
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) pose >> dv.camera.rotation(r, c);
        pose >> dv.camera.translation.x >> dv.camera.translation.y >> dv.camera.translation.z;
        dv.camera.validate();
        dv.rgb = read_png((base / (std::string(stem) + "_rgb.png")).string());
        dv.depth = read_pfm((base / (std::string(stem) + "_depth.pfm")).string());
        dv.normal = read_pfm((base / (std::string(stem) + "_normal.pfm")).string());
        int w, h;
        dv.labels = read_label_png((base / (std::string(stem) + "_mask.png")).string(), &w, &h);
        if (w != ds.width || h != ds.height)
            throw InputError("dataset mask size mismatch at view " + std::to_string(view));
        ds.views.push_back(std::move(dv));
    }
    if (!missing.empty()) {
        std::string msg = "dataset missing inputs:";
        for (const auto& m : missing) msg += " " + m;
        throw InputError(msg);
    }
    return ds;
}

}  // namespace sdfrecon
