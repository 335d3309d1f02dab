// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/image.hpp"
#include "sdfrecon/render.hpp"
#include "sdfrecon/rng.hpp"
#include "sdfrecon/scene.hpp"
#include "sdfrecon/surface.hpp"
#include "sdfrecon/visibility.hpp"

namespace sdfrecon {

// Latents are small multi-channel rasters produced by area-downsampling a
// rendered map; no learned encoder anywhere.
using Latent = Image;

// Cosine signal schedule over t in (0,1): alpha_bar(0+) ~ 1, monotone down.
struct NoiseSchedule {
    double t_min = 0.02;
    double t_max = 0.98;

    double alpha_bar(double t) const {
        double c = std::cos(0.5 * kPi * t);
        return c * c;
    }
    double weight(double t) const { return 1.0 - alpha_bar(t); }
};

enum class LatentKind { Geometry, Appearance };

// Everything a score backend may look at. Mock backends use `eps` and
// `alpha_bar` to recover the clean latent; file backends ignore them.
struct PriorRequest {
    const Latent& z_t;
    const Latent& eps;
    double t = 0.0;
    double alpha_bar = 1.0;
    std::string prompt;
};

class PriorBackend {
public:
    virtual ~PriorBackend() = default;
    virtual std::string name() const = 0;
    // Called before predict with the view about to be distilled; backends
    // that build view-dependent targets hook this.
    virtual void prepare(const PinholeCamera&, int /*object_id*/, LatentKind) {}
    virtual Latent predict(const PriorRequest& request) = 0;
};

// Score residual is exactly zero: predicts the sampled noise back.
class ZeroPrior final : public PriorBackend {
public:
    std::string name() const override { return "zero"; }
    Latent predict(const PriorRequest& request) override { return request.eps; }
};

// Predicts eps plus a pull toward a target latent: recovers the clean latent
// z0 from (z_t, eps) and adds pull * (z0 - target).
class TargetPullPrior : public PriorBackend {
public:
    using TargetFn =
        std::function<std::optional<Latent>(const PinholeCamera&, int object_id, LatentKind)>;

    TargetPullPrior(TargetFn target_fn, double pull = 1.0)
        : target_fn_(std::move(target_fn)), pull_(pull) {}

    std::string name() const override { return "mock-target"; }
    void prepare(const PinholeCamera& camera, int object_id, LatentKind kind) override {
        target_ = target_fn_ ? target_fn_(camera, object_id, kind) : std::nullopt;
    }
    Latent predict(const PriorRequest& request) override;

    double pull() const { return pull_; }

private:
    TargetFn target_fn_;
    double pull_ = 1.0;
    std::optional<Latent> target_;
};

// Target-pull backend whose targets come from PNG files in a directory:
// <object_name>_normal.png + <object_name>_mask.png for geometry,
// <object_name>_color.png for appearance; panorama.png for the background
// panorama. Missing files mean no pull (score residual zero for that view).
class FilePrior final : public TargetPullPrior {
public:
    FilePrior(std::string directory, const std::vector<std::string>& object_names,
              double pull = 1.0);
    std::string name() const override { return "file"; }

    // Path of the externally inpainted panorama, when present.
    std::optional<std::string> panorama_path() const;

private:
    std::string dir_;
};

// Forward diffusion: z_t = sqrt(ab) z + sqrt(1-ab) eps with standard normal
// eps drawn from rng. t outside [t_min, t_max] is an input error.
std::pair<Latent, Latent> add_noise(const Latent& z, double t, const NoiseSchedule& schedule,
                                    Rng& rng);

// Per-latent-pixel score-distillation gradient w(t) * (eps_hat - eps).
Latent sds_pixel_grad(const Latent& z, PriorBackend& prior, const std::string& prompt, double t,
                      const NoiseSchedule& schedule, Rng& rng);

// Bilinear resize (used to admit file targets of any resolution).
Latent resize_latent(const Latent& src, int width, int height);

// Area-downsamples when the factor is integral, else resamples bilinearly.
Latent fit_latent(const Latent& src, int width, int height);

struct SdsConfig {
    int render_res = 128;
    int latent_res = 16;
    NoiseSchedule schedule;
    VisibilityWeightParams geometry_weights = VisibilityWeightParams::geometry();
    VisibilityWeightParams appearance_weights = VisibilityWeightParams::appearance();
    bool uniform_weight = false;  // ablation: w^v == 1 everywhere
    double scale_geometry = 1e-5;
    double scale_appearance = 1.0;
    double occ_step = 2.0 / 256.0;
    int vis_samples_per_ray = 64;
    double skip_mask_threshold = 0.05;  // object invisible from this view
    int threads = 1;
};

struct SdsStepResult {
    bool skipped = false;
    double t = 0.0;
    double mean_visibility = 0.0;
    double mean_weight = 0.0;
};

// Renders the object's normal+mask map, encodes it per camera frame, builds
// the latent, draws (t, eps), and backpropagates the visibility-weighted
// score residual through downsampling and volume rendering into the SDF
// grids and log-beta (grads must be shaped like model.param_arrays()).
SdsStepResult sds_geometry_step(const SceneModel& model, int object_id,
                                const PinholeCamera& camera, const VisibilityGrid& vis,
                                PriorBackend& prior, const std::string& prompt,
                                const SdsConfig& cfg, const OccupancyGrid& object_occ, Rng& rng,
                                GradStore& grads);

// Same machinery over the sphere-traced surface color of a frozen model;
// gradients flow only into the surface color grids (grads shaped like
// surf.param_arrays()).
SdsStepResult sds_appearance_step(const SceneModel& model, const SurfaceColorField& surf,
                                  int object_id, const PinholeCamera& camera,
                                  const VisibilityGrid& vis, PriorBackend& prior,
                                  const std::string& prompt, const SdsConfig& cfg, Rng& rng,
                                  GradStore& grads);

// The 4-channel geometry map ((N+1)/2 camera-frame encoding + coverage mask)
// an SDS step feeds the prior; exposed for target construction and tests.
Image render_geometry_map(const SceneModel& model, int object_id, const PinholeCamera& camera,
                          const OccupancyGrid* object_occ, double occ_step, int uniform_samples,
                          int threads, std::vector<RenderBuffers>* raw_buffers = nullptr);

}  // namespace sdfrecon
