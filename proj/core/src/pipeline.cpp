// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sdfrecon/config.hpp"
#include "sdfrecon/error.hpp"
#include "sdfrecon/parallel.hpp"

namespace sdfrecon {

namespace fs = std::filesystem;

void StageSchedule::validate() const {
    if (factor <= 0.0 || factor > 1.0)
        throw InputError("schedule: scale factor must lie in (0, 1]");
    if (!(0 < stage2_start && stage2_start < stage3_start && stage3_start < total_iters))
        throw InputError("schedule: need 0 < stage2_start < stage3_start < total_iters");
}

void TrainConfig::validate() const {
    schedule.validate();
    if (rays_per_iter < 1) throw InputError("config: rays_per_iter must be positive");
    if (learning_rate <= 0.0) throw InputError("config: learning_rate must be positive");
    if (samples_per_ray < 2) throw InputError("config: samples_per_ray must be >= 2");
    if (beta_init <= 0.0) throw InputError("config: beta_init must be positive");
    if (sds.render_res % sds.latent_res != 0)
        throw InputError("config: latent_res must divide sds render_res");
}

namespace {

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "dataset_dir", "out_dir", "seed", "threads", "rays_per_iter", "learning_rate",
        "samples_per_ray", "total_iters", "stage2_start", "stage3_start", "scale_factor",
        "stages", "prior", "lambda_depth", "lambda_normal", "lambda_semantic",
        "lambda_bg_smooth", "lambda_eikonal", "lambda_smooth", "lambda_distinct",
        "uniform_points", "ray_point_subsample", "smooth_radius", "patch_size", "patch_every",
        "object_grid_res", "bg_grid_res", "color_grid_res", "beta_init", "vis_grid_res",
        "vis_passes", "vis_lr", "occ_res", "occ_update_every", "occ_decay", "occ_threshold",
        "sds_render_res", "sds_latent_res", "sds_scale_geo", "sds_uniform_weight", "occ_step",
        "novel_radius_scale", "novel_fov_deg", "mock_pull", "pano_width", "pano_height",
        "pano_crops", "crop_res", "crop_fov_deg", "distilled_vis_threshold",
        "inpaint_threshold", "appearance_color_weight", "bg_pano_weight"};
    return keys;
}

}  // namespace

void TrainConfig::apply_key(const std::string& key, const std::string& value) {
    KeyValueFile kv;
    kv.set(key, value);
    auto d = [&]() { return kv.get_double(key); };
    auto i = [&]() { return static_cast<int>(kv.get_int(key)); };
    if (key == "seed") seed = static_cast<uint64_t>(kv.get_int(key));
    else if (key == "threads") threads = i();
    else if (key == "rays_per_iter") rays_per_iter = i();
    else if (key == "learning_rate") learning_rate = d();
    else if (key == "samples_per_ray") samples_per_ray = i();
    else if (key == "total_iters") schedule.total_iters = kv.get_int(key);
    else if (key == "stage2_start") schedule.stage2_start = kv.get_int(key);
    else if (key == "stage3_start") schedule.stage3_start = kv.get_int(key);
    else if (key == "scale_factor") schedule.factor = d();
    else if (key == "lambda_depth") weights.depth = d();
    else if (key == "lambda_normal") weights.normal = d();
    else if (key == "lambda_semantic") weights.semantic = d();
    else if (key == "lambda_bg_smooth") weights.bg_smooth = d();
    else if (key == "lambda_eikonal") weights.eikonal = d();
    else if (key == "lambda_smooth") weights.smooth = d();
    else if (key == "lambda_distinct") weights.distinct = d();
    else if (key == "uniform_points") uniform_points = i();
    else if (key == "ray_point_subsample") ray_point_subsample = i();
    else if (key == "smooth_radius") smooth_radius = d();
    else if (key == "patch_size") patch_size = i();
    else if (key == "patch_every") patch_every = i();
    else if (key == "object_grid_res") object_grid_res = i();
    else if (key == "bg_grid_res") bg_grid_res = i();
    else if (key == "color_grid_res") color_grid_res = i();
    else if (key == "beta_init") beta_init = d();
    else if (key == "vis_grid_res") vis_grid_res = i();
    else if (key == "vis_passes") vis_opt.passes = i();
    else if (key == "vis_lr") vis_opt.learning_rate = d();
    else if (key == "occ_res") occ_res = i();
    else if (key == "occ_update_every") occ_update_every = i();
    else if (key == "occ_decay") occ_decay = d();
    else if (key == "occ_threshold") occ_threshold = d();
    else if (key == "sds_render_res") sds.render_res = i();
    else if (key == "sds_latent_res") sds.latent_res = i();
    else if (key == "sds_scale_geo") sds.scale_geometry = d();
    else if (key == "sds_uniform_weight") sds.uniform_weight = kv.get_int(key) != 0;
    else if (key == "occ_step") sds.occ_step = d();
    else if (key == "novel_radius_scale") novel_radius_scale = d();
    else if (key == "novel_fov_deg") novel_fov_deg = d();
    else if (key == "mock_pull") mock_pull = d();
    else if (key == "pano_width") pano_width = i();
    else if (key == "pano_height") pano_height = i();
    else if (key == "pano_crops") pano_crops = i();
    else if (key == "crop_res") crop_res = i();
    else if (key == "crop_fov_deg") crop_fov_deg = d();
    else if (key == "distilled_vis_threshold") distilled_vis_threshold = d();
    else if (key == "inpaint_threshold") inpaint_threshold = d();
    else if (key == "appearance_color_weight") appearance_color_weight = d();
    else if (key == "bg_pano_weight") bg_pano_weight = d();
    else if (key == "dataset_dir" || key == "out_dir" || key == "stages" || key == "prior") {
        // consumed by the CLI layer
    } else {
        throw InputError("unknown config key: " + key);
    }
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    kv.reject_unknown_keys(config_keys());
    TrainConfig cfg;
    for (const auto& [key, value] : kv.entries()) cfg.apply_key(key, value);
    cfg.validate();
    return cfg;
}

void AdamOptimizer::reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
}

void AdamOptimizer::step(std::vector<ParamArray>& params, GradStore& grads) {
    if (m_.size() != params.size()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].size, 0.0);
            v_[i].assign(params[i].size, 0.0);
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t a = 0; a < params.size(); ++a) {
        double* p = params[a].data;
        if (!p) continue;
        const double* g = grads.slots[a].data();
        double* m = m_[a].data();
        double* v = v_[a].data();
        const std::size_t n = params[a].size;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

PinholeCamera sample_novel_view(const Aabb& bbox, Rng& rng, double radius_scale, double fov_deg,
                                int resolution) {
    double diag = bbox.diagonal();
    if (!(diag > 1e-9)) throw InputError("sample_novel_view: degenerate bounding box");
    double azimuth = rng.uniform(0.0, 2.0 * kPi);
    double elevation = rng.uniform(deg_to_rad(-10.0), deg_to_rad(45.0));
    double dist = radius_scale * diag;
    Vec3 center = bbox.center();
    Vec3 eye = center + Vec3{dist * std::cos(elevation) * std::sin(azimuth),
                             dist * std::sin(elevation),
                             dist * std::cos(elevation) * std::cos(azimuth)};
    return PinholeCamera::look_at(eye, center, {0, 1, 0}, fov_deg, resolution, resolution);
}

PinholeCamera sample_interior_view(const SceneModel& model, Rng& rng, double fov_deg,
                                   int resolution) {
    Vec3 eye = model.bounds.center();
    for (int attempt = 0; attempt < 64; ++attempt) {
        Vec3 p = rng.uniform_in_box(model.bounds);
        if (scene_sdf(model, p).first > 0.1) {
            eye = p;
            break;
        }
    }
    double yaw = rng.uniform(0.0, 2.0 * kPi);
    double elevation = rng.uniform(deg_to_rad(-15.0), deg_to_rad(15.0));
    Vec3 dir{std::cos(elevation) * std::sin(yaw), std::sin(elevation),
             std::cos(elevation) * std::cos(yaw)};
    return PinholeCamera::look_at(eye, eye + dir, {0, 1, 0}, fov_deg, resolution, resolution);
}

void Checkpoint::save(const std::string& dir) const {
    fs::create_directories(dir);
    model.save(dir);
    KeyValueFile state;
    state.set_int("iteration", iteration);
    state.set_int("stage", stage);
    state.set_int("has_visibility", visibility ? 1 : 0);
    state.set_int("has_surface", surface ? 1 : 0);
    if (visibility) visibility->save((fs::path(dir) / "visibility.grid").string());
    if (surface) {
        surface->save((fs::path(dir) / "surface").string());
        state.set_vec3("panorama_center", surface->panorama_center);
    }
    state.save((fs::path(dir) / "state.txt").string());
}

Checkpoint Checkpoint::load(const std::string& dir) {
    Checkpoint ckpt;
    ckpt.model = SceneModel::load(dir);
    KeyValueFile state = KeyValueFile::parse_file((fs::path(dir) / "state.txt").string());
    ckpt.iteration = state.get_int("iteration");
    ckpt.stage = static_cast<int>(state.get_int("stage"));
    if (state.get_int("has_visibility"))
        ckpt.visibility = VisibilityGrid::load((fs::path(dir) / "visibility.grid").string());
    if (state.get_int("has_surface")) {
        ckpt.surface = SurfaceColorField::load((fs::path(dir) / "surface").string(),
                                               ckpt.model.object_count());
        ckpt.surface->panorama_center = state.get_vec3("panorama_center");
    }
    return ckpt;
}

Trainer::Trainer(Dataset dataset, TrainConfig config, std::shared_ptr<PriorBackend> prior)
    : dataset_(std::move(dataset)),
      config_(std::move(config)),
      prior_(std::move(prior)),
      recon_rng_(Rng(config_.seed).fork(1)),
      sds_rng_(Rng(config_.seed).fork(2)),
      vis_rng_(Rng(config_.seed).fork(3)),
      stage3_rng_(Rng(config_.seed).fork(4)),
      point_rng_(Rng(config_.seed).fork(5)) {
    config_.validate();
    if (dataset_.views.empty()) throw InputError("trainer: dataset has no views");
    init_model();
    params_ = model_.param_arrays();
    optimizer_ = std::make_unique<AdamOptimizer>(config_.learning_rate);
    config_.sds.threads = config_.threads;
}

void Trainer::init_model() {
    model_ = SceneModel();
    model_.bounds = {{-1, -1, -1}, {1, 1, 1}};
    model_.set_beta(config_.beta_init);

    // Background starts as a room shell hugging the bounds; foreground
    // objects start as a shared centered sphere and specialize through the
    // per-pixel instance supervision.
    SceneObject bg;
    bg.name = "background";
    bg.prompt = dataset_.spec.bg_prompt;
    SdfField bg_shell(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.92, 0.92, 0.92}));
    bg.field = SdfField::rasterized(bg_shell, config_.bg_grid_res, config_.bg_grid_res,
                                    config_.bg_grid_res, model_.bounds);
    model_.objects.push_back(std::move(bg));

    for (const ObjectSpec& spec_obj : dataset_.spec.objects) {
        SceneObject obj;
        obj.name = spec_obj.name;
        obj.prompt = spec_obj.prompt;
        SdfField seed_sphere(std::make_shared<SphereSdf>(Vec3{0.0, -0.2, 0.0}, 0.4));
        obj.field = SdfField::rasterized(seed_sphere, config_.object_grid_res,
                                         config_.object_grid_res, config_.object_grid_res,
                                         model_.bounds);
        model_.objects.push_back(std::move(obj));
    }
    model_.color = DenseGrid3(config_.color_grid_res, config_.color_grid_res,
                              config_.color_grid_res, 3, model_.bounds, 0.0);
    visibility_ = VisibilityGrid(config_.vis_grid_res, model_.bounds);
}

LossComponents Trainer::reconstruction_iteration(long iter, GradStore& grads) {
    const int n = config_.rays_per_iter;
    Rng iter_rng = recon_rng_.fork(static_cast<uint64_t>(iter));
    const std::size_t view_index = iter_rng.uniform_index(dataset_.views.size());
    const DatasetView& view = dataset_.views[view_index];
    const int W = view.camera.width, H = view.camera.height;

    std::vector<Ray> rays(n);
    std::vector<Vec3> gt_color(n);
    std::vector<double> gt_depth(n);
    std::vector<Vec3> gt_normal(n);
    std::vector<int> labels(n);
    std::vector<uint64_t> sample_seeds(n);
    std::vector<bool> valid(n, false);
    for (int i = 0; i < n; ++i) {
        int px = static_cast<int>(iter_rng.uniform_index(static_cast<uint64_t>(W) * H));
        int x = px % W, y = px / W;
        Ray ray = view.camera.pixel_ray(x, y, 0.0, 1e9);
        sample_seeds[i] = iter_rng.next_u64();
        if (!clip_ray_to_bounds(ray, model_.bounds)) continue;
        rays[i] = ray;
        valid[i] = true;
        gt_color[i] = view.rgb.rgb(x, y);
        gt_depth[i] = view.depth.at(x, y);
        gt_normal[i] = {view.normal.at(x, y, 0), view.normal.at(x, y, 1), view.normal.at(x, y, 2)};
        labels[i] = view.labels[static_cast<std::size_t>(y) * W + x];
    }

    // Forward renders (parallel; per-ray workspaces retained for backward).
    if (static_cast<int>(workspaces_.size()) < n) workspaces_.resize(n);
    std::vector<RenderBuffers> buffers(n);
    RenderOptions opts;
    opts.semantics = true;
    parallel_for(static_cast<std::size_t>(n), config_.threads,
                 [&](int, std::size_t begin, std::size_t end) {
                     for (std::size_t i = begin; i < end; ++i) {
                         if (!valid[i]) continue;
                         Rng srng(sample_seeds[i]);
                         RaySamples samples =
                             sample_uniform(rays[i], config_.samples_per_ray, true, srng);
                         buffers[i] = integrate_ray(model_, rays[i], samples, nullptr, opts,
                                                    &workspaces_[i]);
                     }
                 });

    // Assemble loss inputs over valid rays.
    std::vector<int> live;
    live.reserve(n);
    for (int i = 0; i < n; ++i)
        if (valid[i]) live.push_back(i);
    const int m = static_cast<int>(live.size());
    if (m == 0) return {};

    const int k = model_.object_count();
    Mat3 rot = view.camera.rotation;
    std::vector<Vec3> pred_color(m), pred_normal_cam(m), cue_normal(m);
    std::vector<double> pred_depth(m), cue_depth(m);
    std::vector<double> logits(static_cast<std::size_t>(m) * k);
    std::vector<int> live_labels(m);
    for (int j = 0; j < m; ++j) {
        const RenderBuffers& buf = buffers[live[j]];
        pred_color[j] = buf.color;
        pred_depth[j] = buf.depth;
        pred_normal_cam[j] = rot.transposed_mul(buf.normal);
        cue_depth[j] = gt_depth[live[j]];
        cue_normal[j] = gt_normal[live[j]];
        live_labels[j] = labels[live[j]];
        for (int c = 0; c < k; ++c) logits[static_cast<std::size_t>(j) * k + c] = buf.sem[c];
    }

    LossComponents parts;
    std::vector<Vec3> d_color(m), d_normal_cam(m);
    std::vector<double> d_depth(m);
    std::vector<double> d_logits(static_cast<std::size_t>(m) * k);
    parts.color = loss_color(pred_color.data(), gt_color.data(), m, d_color.data());
    if (m >= 2) parts.depth = loss_depth(pred_depth.data(), cue_depth.data(), m, d_depth.data());
    parts.normal = loss_normal(pred_normal_cam.data(), cue_normal.data(), m, d_normal_cam.data());
    parts.semantic = loss_semantic(logits.data(), m, k, live_labels.data(), d_logits.data());

    // Backward (serial accumulation; deterministic).
    const LossWeights& lw = config_.weights;
    for (int j = 0; j < m; ++j) {
        RayAdjoints adj;
        adj.d_color = d_color[j];
        adj.d_depth = lw.depth * d_depth[j];
        adj.d_normal = rot * d_normal_cam[j] * lw.normal;
        for (int c = 0; c < k; ++c)
            adj.d_sem[c] = lw.semantic * d_logits[static_cast<std::size_t>(j) * k + c];
        integrate_ray_backward(model_, workspaces_[live[j]], adj, opts, grads);
    }

    // Point regularizers over uniform draws plus (subsampled) ray samples.
    Rng prng = point_rng_.fork(static_cast<uint64_t>(iter));
    std::vector<Vec3> points;
    points.reserve(config_.uniform_points + config_.ray_point_subsample);
    for (int i = 0; i < config_.uniform_points; ++i)
        points.push_back(prng.uniform_in_box(model_.bounds));
    std::size_t total_samples = 0;
    for (int j = 0; j < m; ++j) total_samples += workspaces_[live[j]].n;
    std::size_t stride = std::max<std::size_t>(
        1, total_samples / std::max(1, config_.ray_point_subsample));
    std::size_t cursor = 0;
    for (int j = 0; j < m; ++j) {
        const RayWorkspace& ws = workspaces_[live[j]];
        for (int s = 0; s < ws.n; ++s, ++cursor)
            if (cursor % stride == 0) points.push_back(ws.samples[s].p);
    }

    const double n_points = static_cast<double>(points.size());
    double eik_sum = 0.0, smo_sum = 0.0, dis_sum = 0.0;
    for (const Vec3& p : points) {
        eik_sum += eikonal_point(model_, p, &grads, lw.eikonal / n_points);
        Vec3 p_tilde = p + prng.uniform_in_ball() * config_.smooth_radius;
        smo_sum += smooth_point(model_, p, p_tilde, &grads, lw.smooth / n_points);
        dis_sum += distinct_point(model_, p, &grads, lw.distinct / n_points);
    }
    parts.eikonal = eik_sum / n_points;
    parts.smooth = smo_sum / n_points;
    parts.distinct = dis_sum / n_points;

    if (config_.patch_every > 0 && iter % config_.patch_every == 0) {
        Rng patch_rng = iter_rng.fork(17);
        parts.bg_smooth = loss_bg_smooth(model_, view.camera, config_.patch_size,
                                         config_.samples_per_ray, patch_rng, &grads,
                                         lw.bg_smooth);
    }
    return parts;
}

void Trainer::update_occupancy(long iter) {
    if (occupancy_.empty()) {
        occupancy_.assign(static_cast<std::size_t>(model_.object_count()) + 1,
                          OccupancyGrid(config_.occ_res, model_.bounds));
    }
    if (iter >= 0 && config_.occ_update_every > 0 && iter % config_.occ_update_every != 0) return;
    for (int id = 0; id <= model_.object_count(); ++id)
        occupancy_[id].update(model_, id, config_.occ_decay, config_.sds.occ_step,
                              config_.occ_threshold);
}

void Trainer::prepare_stage2() {
    if (stage2_prepared_) return;
    std::vector<PinholeCamera> cams;
    for (const DatasetView& view : dataset_.views) cams.push_back(view.camera);
    VisibilityOptConfig vcfg = config_.vis_opt;
    vcfg.samples_per_ray = config_.samples_per_ray;
    vcfg.seed = vis_rng_.fork(0).next_u64();
    optimize_visibility(visibility_, model_, cams, vcfg);

    double density_thresh = 0.25 / model_.beta();
    bboxes_.assign(model_.object_count(), model_.bounds);
    for (int id = 2; id <= model_.object_count(); ++id)
        bboxes_[id - 1] = object_bbox_from_visibility(visibility_, model_, id, density_thresh);
    update_occupancy(-1);
    stage2_prepared_ = true;
}

void Trainer::sds_iteration(long iter, GradStore& grads) {
    const int k = model_.object_count();
    int object_id = 1 + static_cast<int>((iter - config_.schedule.stage2()) % k);
    Rng rng = sds_rng_.fork(static_cast<uint64_t>(iter));
    PinholeCamera camera =
        object_id == SceneModel::kBackgroundId
            ? sample_interior_view(model_, rng, config_.novel_fov_deg, config_.sds.render_res)
            : sample_novel_view(bboxes_[object_id - 1], rng, config_.novel_radius_scale,
                                config_.novel_fov_deg, config_.sds.render_res);
    const std::string& prompt = model_.objects[object_id - 1].prompt;
    sds_geometry_step(model_, object_id, camera, visibility_, *prior_, prompt, config_.sds,
                      occupancy_[object_id], rng, grads);
}

void Trainer::stage3_setup() {
    if (stage3_prepared_) return;
    surface_ = SurfaceColorField();
    for (int id = 1; id <= model_.object_count(); ++id) {
        DenseGrid3 grid = model_.color;  // copy raw values as a warm start
        surface_.object_color.push_back(std::move(grid));
    }
    surface_.panorama_center = model_.bounds.center();
    PanoramaSet pano = render_panorama(model_, surface_.panorama_center, config_.pano_width,
                                       config_.pano_height, &visibility_.grid(),
                                       config_.samples_per_ray, config_.threads);
    Image mask = inpaint_mask_from_visibility(pano.visibility, config_.inpaint_threshold);
    surface_.panorama = inpaint_pushpull(pano.color, mask);
    // Externally produced panoramas take precedence when the prior ships one.
    if (auto* fp = dynamic_cast<FilePrior*>(prior_.get())) {
        if (auto path = fp->panorama_path()) {
            Image ext = read_png(*path);
            if (ext.width() != config_.pano_width || ext.height() != config_.pano_height)
                ext = resize_latent(ext, config_.pano_width, config_.pano_height);
            surface_.panorama = ext;
        }
    }
    surf_params_ = surface_.param_arrays();
    surf_optimizer_ = std::make_unique<AdamOptimizer>(config_.learning_rate);
    stage3_prepared_ = true;
}

double Trainer::stage3_iteration(long iter, GradStore& grads, double* bg_pano_loss,
                                 double* sds_t) {
    Rng rng = stage3_rng_.fork(static_cast<uint64_t>(iter));
    const double lam_color = config_.appearance_color_weight;
    const double lam_pano = config_.bg_pano_weight;

    // (a) input-view color rendering loss on the traced surface.
    const std::size_t view_index = rng.uniform_index(dataset_.views.size());
    const DatasetView& view = dataset_.views[view_index];
    const int W = view.camera.width, H = view.camera.height;
    const int n = config_.rays_per_iter;
    std::vector<SurfaceHit> hits(n);
    std::vector<Vec3> pred(n), gt(n);
    std::vector<int> live;
    for (int i = 0; i < n; ++i) {
        int px = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(W) * H));
        int x = px % W, y = px / W;
        Ray ray = view.camera.pixel_ray(x, y, 0.0, 1e9);
        if (!clip_ray_to_bounds(ray, model_.bounds)) continue;
        SurfaceHit hit;
        Vec3 c = surface_color(model_, surface_, ray, &hit);
        if (!hit.hit) continue;
        hits[live.size()] = hit;
        pred[live.size()] = c;
        gt[live.size()] = view.rgb.rgb(x, y);
        live.push_back(i);
    }
    double color_value = 0.0;
    if (!live.empty()) {
        int m = static_cast<int>(live.size());
        std::vector<Vec3> d_pred(m);
        color_value = loss_color(pred.data(), gt.data(), m, d_pred.data());
        for (int j = 0; j < m; ++j)
            surface_color_backward(surface_, hits[j], d_pred[j] * lam_color, grads);
    }

    // (b) distilled renders: field color supervises the surface color where
    // the input views saw the geometry well.
    {
        PinholeCamera cam = sample_interior_view(model_, rng, config_.crop_fov_deg,
                                                 config_.crop_res);
        RenderOptions opts;
        opts.semantics = false;
        std::vector<RenderBuffers> field = render_image_buffers(
            model_, cam, opts, &visibility_.grid(), config_.samples_per_ray, config_.threads);
        std::vector<SurfaceHit> dhits;
        std::vector<Vec3> dpred, dtarget;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const RenderBuffers& buf = field[static_cast<std::size_t>(y) * cam.width + x];
                if (buf.visibility <= config_.distilled_vis_threshold) continue;
                Ray ray = cam.pixel_ray(x, y, 0.0, 1e9);
                if (!clip_ray_to_bounds(ray, model_.bounds)) continue;
                SurfaceHit hit;
                Vec3 c = surface_color(model_, surface_, ray, &hit);
                if (!hit.hit) continue;
                dhits.push_back(hit);
                dpred.push_back(c);
                dtarget.push_back(buf.color);
            }
        if (!dpred.empty()) {
            int m = static_cast<int>(dpred.size());
            std::vector<Vec3> d_pred(m);
            color_value += loss_color(dpred.data(), dtarget.data(), m, d_pred.data());
            for (int j = 0; j < m; ++j)
                surface_color_backward(surface_, dhits[j], d_pred[j] * lam_color, grads);
        }
    }

    // (c) panorama crops anchor the background color.
    double pano_value = 0.0;
    {
        const SdfField& bg = model_.objects.front().field;
        for (int b = 0; b < config_.pano_crops; ++b) {
            double yaw = rng.uniform(0.0, 2.0 * kPi);
            double elev = rng.uniform(deg_to_rad(-40.0), deg_to_rad(40.0));
            Vec3 dir{std::cos(elev) * std::sin(yaw), std::sin(elev),
                     std::cos(elev) * std::cos(yaw)};
            PinholeCamera cam = PinholeCamera::look_at(surface_.panorama_center,
                                                       surface_.panorama_center + dir, {0, 1, 0},
                                                       config_.crop_fov_deg, config_.crop_res,
                                                       config_.crop_res);
            std::vector<SurfaceHit> chits;
            std::vector<Vec3> cpred, ctarget;
            for (int y = 0; y < cam.height; ++y)
                for (int x = 0; x < cam.width; ++x) {
                    Ray ray = cam.pixel_ray(x, y, 0.0, 1e9);
                    if (!clip_ray_to_bounds(ray, model_.bounds)) continue;
                    auto traced = sphere_trace(bg, ray);
                    if (!traced) continue;
                    chits.push_back({true, SceneModel::kBackgroundId, traced->point});
                    cpred.push_back(surface_.color_at(SceneModel::kBackgroundId, traced->point));
                    ctarget.push_back(surface_.background_color(ray.direction));
                }
            if (cpred.empty()) continue;
            int m = static_cast<int>(cpred.size());
            std::vector<Vec3> d_pred(m);
            double crop_loss = loss_color(cpred.data(), ctarget.data(), m, d_pred.data());
            pano_value += crop_loss / config_.pano_crops;
            double scale = lam_pano / config_.pano_crops;
            for (int j = 0; j < m; ++j)
                surface_color_backward(surface_, chits[j], d_pred[j] * scale, grads);
        }
    }
    if (bg_pano_loss) *bg_pano_loss = pano_value;

    // (d) appearance distillation for foreground objects (background excluded).
    if (model_.object_count() > 1) {
        const int fg = model_.object_count() - 1;
        int object_id = 2 + static_cast<int>((iter - config_.schedule.stage3()) % fg);
        PinholeCamera cam = sample_novel_view(bboxes_[object_id - 1], rng,
                                              config_.novel_radius_scale, config_.novel_fov_deg,
                                              config_.sds.render_res);
        SdsStepResult res =
            sds_appearance_step(model_, surface_, object_id, cam, visibility_, *prior_,
                                model_.objects[object_id - 1].prompt, config_.sds, rng, grads);
        if (sds_t) *sds_t = res.skipped ? -1.0 : res.t;
    }
    return color_value;
}

void Trainer::nan_guard(long iter, const LossComponents& parts) {
    auto check = [&](double v, const char* name) {
        if (!std::isfinite(v))
            throw NumericalError("non-finite loss '" + std::string(name) + "' at iteration " +
                                 std::to_string(iter));
    };
    check(parts.color, "color");
    check(parts.depth, "depth");
    check(parts.normal, "normal");
    check(parts.semantic, "semantic");
    check(parts.bg_smooth, "bg_smooth");
    check(parts.eikonal, "eikonal");
    check(parts.smooth, "smooth");
    check(parts.distinct, "distinct");
    if (!std::isfinite(model_.log_beta))
        throw NumericalError("non-finite beta at iteration " + std::to_string(iter));
}

void Trainer::run(bool stage1, bool stage2, bool stage3, const std::string& out_dir) {
    if (!stage1) throw UsageError("trainer: stage 1 must be enabled");
    if (stage3 && !stage2) throw UsageError("trainer: stage 3 requires stage 2");
    fs::create_directories(out_dir);
    FILE* log = std::fopen((fs::path(out_dir) / "train_log.txt").c_str(), "w");
    if (!log) throw InputError("cannot open training log in " + out_dir);

    const long s2 = config_.schedule.stage2();
    const long s3 = config_.schedule.stage3();
    const long total = config_.schedule.total();
    const long recon_end = stage2 ? s3 : total;

    GradStore grads;
    grads.init_like(params_);

    long iter = 0;
    for (; iter < recon_end; ++iter) {
        int stage_now = (stage2 && iter >= s2) ? 2 : 1;
        if (stage2 && iter == s2) {
            prepare_stage2();
            Checkpoint ckpt{model_, visibility_, std::nullopt, iter, 1};
            ckpt.save((fs::path(out_dir) / "stage1").string());
            std::fprintf(log, "# stage 2 begins at iter %ld\n", iter);
        }
        grads.zero();
        LossComponents parts = reconstruction_iteration(iter, grads);
        if (stage_now == 2) {
            update_occupancy(iter - s2);
            sds_iteration(iter, grads);
        }
        optimizer_->step(params_, grads);
        model_.log_beta = std::clamp(model_.log_beta, std::log(5e-3), std::log(1.0));
        double total_loss = loss_recon_total(parts, config_.weights);
        std::fprintf(log,
                     "iter=%ld stage=%d color=%.9e depth=%.9e normal=%.9e semantic=%.9e "
                     "bg_smooth=%.9e eikonal=%.9e smooth=%.9e distinct=%.9e total=%.9e\n",
                     iter, stage_now, parts.color, parts.depth, parts.normal, parts.semantic,
                     parts.bg_smooth, parts.eikonal, parts.smooth, parts.distinct, total_loss);
        if (iter % 100 == 0) nan_guard(iter, parts);
    }

    if (!stage2) {
        // Visibility is optimized once reconstruction has converged, also in
        // single-stage runs so downstream consumers always find the grid.
        prepare_stage2();
        Checkpoint ckpt{model_, visibility_, std::nullopt, iter, 1};
        ckpt.save((fs::path(out_dir) / "stage1").string());
        std::fclose(log);
        return;
    }

    Checkpoint ckpt2{model_, visibility_, std::nullopt, iter, 2};
    ckpt2.save((fs::path(out_dir) / "stage2").string());

    if (!stage3) {
        std::fclose(log);
        return;
    }

    std::fprintf(log, "# stage 3 begins at iter %ld\n", iter);
    stage3_setup();
    GradStore surf_grads;
    surf_grads.init_like(surf_params_);
    for (; iter < total; ++iter) {
        surf_grads.zero();
        double pano_loss = 0.0, sds_t = 0.0;
        double color_loss = stage3_iteration(iter, surf_grads, &pano_loss, &sds_t);
        surf_optimizer_->step(surf_params_, surf_grads);
        std::fprintf(log, "iter=%ld stage=3 app_color=%.9e bg_pano=%.9e sds_t=%.9e\n", iter,
                     color_loss, pano_loss, sds_t);
        if (iter % 100 == 0 && (!std::isfinite(color_loss) || !std::isfinite(pano_loss)))
            throw NumericalError("non-finite appearance loss at iteration " +
                                 std::to_string(iter));
    }
    Checkpoint ckpt3{model_, visibility_, surface_, iter, 3};
    ckpt3.save((fs::path(out_dir) / "stage3").string());
    std::fclose(log);
}

std::shared_ptr<PriorBackend> make_prior(const std::string& spec_string, const Dataset& dataset,
                                         const TrainConfig& config) {
    if (spec_string == "zero" || spec_string.empty()) return std::make_shared<ZeroPrior>();
    if (spec_string.rfind("mock:", 0) == 0) {
        std::string arg = spec_string.substr(5);
        if (arg == "gt") {
            SceneSpec spec = dataset.spec;
            auto target_fn = [spec](const PinholeCamera& cam, int object_id,
                                    LatentKind kind) -> std::optional<Latent> {
                if (kind == LatentKind::Geometry)
                    return render_gt_geometry_map(spec, object_id, cam);
                return render_gt_color_map(spec, object_id, cam);
            };
            return std::make_shared<TargetPullPrior>(target_fn, config.mock_pull);
        }
        std::vector<std::string> names;
        names.push_back("background");
        for (const auto& obj : dataset.spec.objects) names.push_back(obj.name);
        return std::make_shared<FilePrior>(arg, names, config.mock_pull);
    }
    if (spec_string.rfind("file:", 0) == 0) {
        std::vector<std::string> names;
        names.push_back("background");
        for (const auto& obj : dataset.spec.objects) names.push_back(obj.name);
        return std::make_shared<FilePrior>(spec_string.substr(5), names, config.mock_pull);
    }
    throw UsageError("unknown prior '" + spec_string + "' (expected zero | mock:gt | file:<dir>)");
}

}  // namespace sdfrecon
