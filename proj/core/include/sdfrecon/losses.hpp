// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/render.hpp"
#include "sdfrecon/rng.hpp"
#include "sdfrecon/scene.hpp"

namespace sdfrecon {

// Reconstruction loss weights (dimensionless).
struct LossWeights {
    double depth = 0.1;
    double normal = 0.05;
    double semantic = 1.0;
    double bg_smooth = 0.1;
    double eikonal = 0.1;
    double smooth = 0.005;
    double distinct = 0.5;
};

// color + lam_D*depth + lam_N*normal + lam_S*semantic + lam_bs*bg_smooth
// + lam_eik*eikonal + lam_smo*smooth + lam_sdf*distinct.
struct LossComponents {
    double color = 0.0, depth = 0.0, normal = 0.0, semantic = 0.0;
    double bg_smooth = 0.0, eikonal = 0.0, smooth = 0.0, distinct = 0.0;
};
double loss_recon_total(const LossComponents& parts, const LossWeights& weights);

// Mean L1 over rays and channels. d_pred (optional) receives d loss / d pred.
double loss_color(const Vec3* pred, const Vec3* gt, int n, Vec3* d_pred = nullptr);

struct AffineFit {
    double w = 0.0;
    double q = 0.0;
    bool degenerate = false;
};

// Least-squares (w, q) minimizing sum (w*pred + q - cue)^2; constant pred
// batches are flagged and fit with w = 0, q = mean(cue).
AffineFit solve_depth_scale_shift(const double* pred, const double* cue, int n);

// Mean squared residual after the affine fit. The fit is treated as constant
// for the gradient (exact to first order at the optimum).
double loss_depth(const double* pred, const double* cue, int n, double* d_pred = nullptr,
                  AffineFit* fit_out = nullptr);

// Per ray: channelwise L1 plus |1 - dot|; mean over rays. Both inputs must
// be in the same (camera) frame; cues unit length.
double loss_normal(const Vec3* pred, const Vec3* cue, int n, Vec3* d_pred = nullptr);

// Softmax cross-entropy of rendered instance logits against 1-based labels,
// mean over rays. logits is row-major n x k.
double loss_semantic(const double* logits, int n, int k, const int* labels,
                     double* d_logits = nullptr);

// --- point regularizers ------------------------------------------------

// |  ||grad s(p)|| - 1 |  at one point; optionally accumulates
// upstream * d/d(params) into grads.
double eikonal_point(const SceneModel& model, const Vec3& p, GradStore* grads = nullptr,
                     double upstream = 1.0);

// || grad s(p) - grad s(p_tilde) ||_1 at a point pair.
double smooth_point(const SceneModel& model, const Vec3& p, const Vec3& p_tilde,
                    GradStore* grads = nullptr, double upstream = 1.0);

// sum_j relu(-s_j(p) - s(p)) at one point.
double distinct_point(const SceneModel& model, const Vec3& p, GradStore* grads = nullptr,
                      double upstream = 1.0);

// Batch means over a point set (gradient upstream pre-divided by count).
double loss_eikonal(const SceneModel& model, const std::vector<Vec3>& points,
                    GradStore* grads = nullptr, double upstream = 1.0);
double loss_smooth(const SceneModel& model, const std::vector<Vec3>& points,
                   double perturb_radius, Rng& rng, GradStore* grads = nullptr,
                   double upstream = 1.0);
double loss_obj_distinct(const SceneModel& model, const std::vector<Vec3>& points,
                         GradStore* grads = nullptr, double upstream = 1.0);

// --- background smoothness ----------------------------------------------

// Multi-scale masked absolute differences of a P x P depth/normal patch
// (strides 1, 2, 4, 8). mask[m*P+n] = 1 regulates pixel (row m, col n).
double masked_multiscale_smoothness(const std::vector<double>& depth,
                                    const std::vector<Vec3>& normal,
                                    const std::vector<uint8_t>& mask, int patch,
                                    std::vector<double>* d_depth = nullptr,
                                    std::vector<Vec3>* d_normal = nullptr);

// Renders a random P x P patch in `camera`: pixels whose rendered class is
// not the background are masked, and the background-only depth (converted to
// z-depth) and normal under them are flattened. Accumulates
// upstream * gradient into grads when given.
double loss_bg_smooth(const SceneModel& model, const PinholeCamera& camera, int patch_size,
                      int samples_per_ray, Rng& rng, GradStore* grads = nullptr,
                      double upstream = 1.0);

}  // namespace sdfrecon
