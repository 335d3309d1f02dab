// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "sdfrecon/pipeline.hpp"
#include "sdfrecon/render.hpp"
#include "sdfrecon/rng.hpp"
#include "sdfrecon/scene.hpp"

namespace sdfrecon::testing {

// allclose-style comparison: |a - b| <= atol + rtol * max(|a|, |b|).
inline bool close(double a, double b, double rtol, double atol = 1e-9) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

// Small trainable scene: grid background shell + grid sphere + color grid,
// lightly perturbed so no probe lands on a symmetry.
inline SceneModel make_micro_model(int res = 4, uint64_t seed = 11) {
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    model.set_beta(0.1);

    SceneObject bg;
    bg.name = "background";
    SdfField shell(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.85, 0.85, 0.85}));
    bg.field = SdfField::rasterized(shell, res, res, res, model.bounds);
    model.objects.push_back(std::move(bg));

    SceneObject ball;
    ball.name = "ball";
    SdfField sphere(std::make_shared<SphereSdf>(Vec3{0.1, -0.05, 0.05}, 0.5));
    ball.field = SdfField::rasterized(sphere, res, res, res, model.bounds);
    model.objects.push_back(std::move(ball));

    model.color = DenseGrid3(res, res, res, 3, model.bounds, 0.0);
    Rng rng(seed);
    for (double& v : model.color.values()) v = rng.uniform(-0.8, 0.8);
    for (auto& obj : model.objects)
        for (double& v : obj.field.grid().values()) v += rng.uniform(-0.02, 0.02);
    return model;
}

// Central finite difference of a scalar functional with respect to one
// parameter entry.
inline double finite_difference(double* entry, double h, const std::function<double()>& eval) {
    double saved = *entry;
    *entry = saved + h;
    double hi = eval();
    *entry = saved - h;
    double lo = eval();
    *entry = saved;
    return (hi - lo) / (2.0 * h);
}

// Two-step-size agreement test: flags parameter entries where the function
// is locally non-smooth (argmin switches, density kink) so probes can be
// resampled instead of failing on a legitimate subgradient.
inline bool fd_is_smooth(double* entry, const std::function<double()>& eval, double h,
                         double* fd_out) {
    double f1 = finite_difference(entry, h, eval);
    double f2 = finite_difference(entry, 0.5 * h, eval);
    *fd_out = f2;
    double scale = std::max({std::abs(f1), std::abs(f2), 1e-7});
    return std::abs(f1 - f2) / scale < 0.05;
}

}  // namespace sdfrecon::testing
