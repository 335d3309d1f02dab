// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdfrecon/losses.hpp"
#include "sdfrecon/prior.hpp"
#include "sdfrecon/synth.hpp"
#include "sdfrecon/visibility.hpp"

namespace sdfrecon {

// Iteration schedule; reference counts are scaled by `factor` (ceil).
struct StageSchedule {
    long total_iters = 80000;
    long stage2_start = 35000;
    long stage3_start = 75000;
    double factor = 0.05;

    long scaled(long reference) const {
        return static_cast<long>(std::ceil(factor * static_cast<double>(reference)));
    }
    long total() const { return scaled(total_iters); }
    long stage2() const { return scaled(stage2_start); }
    long stage3() const { return scaled(stage3_start); }
    void validate() const;
};

struct TrainConfig {
    uint64_t seed = 1;
    int threads = 1;
    int rays_per_iter = 1024;
    double learning_rate = 5e-4;
    int samples_per_ray = 64;
    StageSchedule schedule;
    LossWeights weights;

    // point regularizer batches
    int uniform_points = 512;
    int ray_point_subsample = 4096;
    double smooth_radius = 0.01;

    // background smoothness patches
    int patch_size = 32;
    int patch_every = 10;

    // field resolutions
    int object_grid_res = 64;
    int bg_grid_res = 96;
    int color_grid_res = 64;
    double beta_init = 0.1;

    // visibility grid
    int vis_grid_res = 64;
    VisibilityOptConfig vis_opt;

    // occupancy maintenance
    int occ_res = 64;
    int occ_update_every = 16;
    double occ_decay = 0.95;
    double occ_threshold = 1e-4;

    // score distillation
    SdsConfig sds;
    double novel_radius_scale = 1.5;
    double novel_fov_deg = 45.0;
    double mock_pull = 1.0;

    // stage 3
    int pano_width = 512;
    int pano_height = 256;
    int pano_crops = 4;  // B perspective crops per iteration
    int crop_res = 64;
    double crop_fov_deg = 60.0;
    double distilled_vis_threshold = 0.7;
    double inpaint_threshold = 0.2;
    double appearance_color_weight = 1e4;  // lambda for both color losses
    double bg_pano_weight = 1e4;

    static TrainConfig from_file(const std::string& path);
    void apply_key(const std::string& key, const std::string& value);
    void validate() const;
};

// First/second-moment adaptive gradient descent with bias correction,
// coefficients (0.9, 0.999, 1e-8).
class AdamOptimizer {
public:
    explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}
    void step(std::vector<ParamArray>& params, GradStore& grads);
    void reset();

private:
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Object-centric view on a sphere of radius 1.5x the bbox diagonal, look-at
// the bbox center, elevation in [-10, 45] degrees.
PinholeCamera sample_novel_view(const Aabb& bbox, Rng& rng, double radius_scale = 1.5,
                                double fov_deg = 45.0, int resolution = 128);

// Free-space interior view with random yaw, elevation in [-15, 15] degrees.
PinholeCamera sample_interior_view(const SceneModel& model, Rng& rng, double fov_deg = 60.0,
                                   int resolution = 128);

struct Checkpoint {
    SceneModel model;
    std::optional<VisibilityGrid> visibility;
    std::optional<SurfaceColorField> surface;
    long iteration = 0;
    int stage = 1;

    void save(const std::string& dir) const;
    static Checkpoint load(const std::string& dir);
};

// Three-stage trainer over a synthetic dataset directory. Stages share one
// model; gating controls which run. RNG streams are split per concern so a
// zero-residual prior leaves the reconstruction trajectory untouched.
class Trainer {
public:
    Trainer(Dataset dataset, TrainConfig config, std::shared_ptr<PriorBackend> prior);

    // stages: bit set of {1, 2, 3} via booleans.
    void run(bool stage1, bool stage2, bool stage3, const std::string& out_dir);

    SceneModel& model() { return model_; }
    const SceneModel& model() const { return model_; }
    VisibilityGrid& visibility() { return visibility_; }
    SurfaceColorField& surface() { return surface_; }
    const TrainConfig& config() const { return config_; }
    const Dataset& dataset() const { return dataset_; }

    // Exposed for targeted tests.
    LossComponents reconstruction_iteration(long iter, GradStore& grads);
    void prepare_stage2();  // visibility optimization + bboxes + occupancy
    Aabb object_bbox(int object_id) const { return bboxes_.at(object_id - 1); }

private:
    void init_model();
    void sds_iteration(long iter, GradStore& grads);
    void stage3_setup();
    double stage3_iteration(long iter, GradStore& grads, double* bg_pano_loss,
                            double* sds_t);
    void update_occupancy(long iter);
    void nan_guard(long iter, const LossComponents& parts);

    Dataset dataset_;
    TrainConfig config_;
    std::shared_ptr<PriorBackend> prior_;
    SceneModel model_;
    VisibilityGrid visibility_;
    SurfaceColorField surface_;
    std::vector<Aabb> bboxes_;
    std::vector<OccupancyGrid> occupancy_;  // [0]=scene, [j]=object id j
    Rng recon_rng_, sds_rng_, vis_rng_, stage3_rng_, point_rng_;
    std::vector<ParamArray> params_;
    std::vector<ParamArray> surf_params_;
    std::unique_ptr<AdamOptimizer> optimizer_;
    std::unique_ptr<AdamOptimizer> surf_optimizer_;
    bool stage2_prepared_ = false;
    bool stage3_prepared_ = false;

    // reusable buffers
    std::vector<RayWorkspace> workspaces_;
};

// Builds the prior named by `spec_string` (zero | mock:gt | mock:<dir> |
// file:<dir>) for a dataset; mock:gt renders targets from the stored
// analytic scene recipe.
std::shared_ptr<PriorBackend> make_prior(const std::string& spec_string, const Dataset& dataset,
                                         const TrainConfig& config);

}  // namespace sdfrecon
