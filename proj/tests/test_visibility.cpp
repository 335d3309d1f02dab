// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "sdfrecon/error.hpp"
#include "sdfrecon/visibility.hpp"
#include "test_util.hpp"

using namespace sdfrecon;
using sdfrecon::testing::make_micro_model;

namespace {

// Independent transmittance oracle: plain Riemann sum of the density along
// the segment from the camera center to p, bypassing the renderer.
double marched_transmittance(const SceneModel& model, const Vec3& origin, const Vec3& p,
                             int steps = 4000) {
    Vec3 d = p - origin;
    double len = length(d);
    if (len < 1e-9) return 1.0;
    Vec3 dir = d / len;
    double beta = model.beta();
    double dt = len / steps;
    double optical = 0.0;
    for (int i = 0; i < steps; ++i) {
        Vec3 q = origin + dir * ((i + 0.5) * dt);
        optical += sdf_to_density(scene_sdf(model, q).first, beta) * dt;
    }
    return std::exp(-optical);
}

SceneModel toy_room() {
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    SceneObject bg, ball;
    bg.name = "background";
    bg.field = SdfField(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.9, 0.9, 0.9}));
    ball.name = "ball";
    ball.field = SdfField(std::make_shared<SphereSdf>(Vec3{0.0, -0.2, 0.1}, 0.3));
    model.objects.push_back(std::move(bg));
    model.objects.push_back(std::move(ball));
    model.color = DenseGrid3(2, 2, 2, 3, model.bounds, 0.0);
    model.set_beta(0.1);
    return model;
}

}  // namespace

TEST_CASE("visibility weight presets") {
    VisibilityWeightParams geo = VisibilityWeightParams::geometry();
    VisibilityWeightParams app = VisibilityWeightParams::appearance();
    SUBCASE("geometry preset anchor values") {
        CHECK(visibility_weight(0.0, geo) == doctest::Approx(20.0));
        CHECK(visibility_weight(0.5, geo) == doctest::Approx(1.0));
        CHECK(visibility_weight(1.0, geo) == doctest::Approx(0.0));
    }
    SUBCASE("geometry preset is continuous at tau and non-increasing") {
        CHECK(geo.continuous_at_tau());
        double prev = visibility_weight(0.0, geo);
        for (double v = 0.01; v <= 1.0; v += 0.01) {
            double w = visibility_weight(v, geo);
            CHECK(w <= prev + 1e-12);
            prev = w;
        }
    }
    SUBCASE("appearance preset steps from 1 to 0 at 0.3") {
        CHECK(visibility_weight(0.29, app) == doctest::Approx(1.0));
        CHECK(visibility_weight(0.30, app) == doctest::Approx(1.0));
        CHECK(visibility_weight(0.31, app) == doctest::Approx(0.0));
    }
    SUBCASE("out-of-range values clamp") {
        CHECK(visibility_weight(-0.5, geo) == doctest::Approx(20.0));
        CHECK(visibility_weight(1.5, geo) == doctest::Approx(0.0));
    }
}

TEST_CASE("inpainting mask thresholds the visibility panorama") {
    SUBCASE("all visible gives an empty mask") {
        Image vis(8, 4, 1, 0.9);
        Image mask = inpaint_mask_from_visibility(vis, 0.2);
        for (double v : mask.data()) CHECK(v == 0.0);
    }
    SUBCASE("all dark gives a full mask") {
        Image vis(8, 4, 1, 0.0);
        Image mask = inpaint_mask_from_visibility(vis, 0.2);
        for (double v : mask.data()) CHECK(v == 1.0);
    }
    SUBCASE("checkerboard selects exactly the dark cells") {
        Image vis(8, 4, 1);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 8; ++x) vis.at(x, y) = ((x + y) % 2 == 0) ? 0.1 : 0.9;
        Image mask = inpaint_mask_from_visibility(vis, 0.2);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 8; ++x)
                CHECK(mask.at(x, y) == ((x + y) % 2 == 0 ? 1.0 : 0.0));
    }
}

TEST_CASE("visibility optimization pulls the grid toward max-view transmittance") {
    SceneModel model = toy_room();
    std::vector<PinholeCamera> views;
    views.push_back(PinholeCamera::look_at({0.6, 0.1, 0.0}, {0, -0.15, 0}, {0, 1, 0}, 60, 48, 48));
    views.push_back(PinholeCamera::look_at({-0.2, 0.2, 0.6}, {0, -0.15, 0}, {0, 1, 0}, 60, 48, 48));

    VisibilityGrid grid(48, model.bounds);
    VisibilityOptConfig cfg;
    cfg.passes = 20;
    cfg.samples_per_ray = 64;
    cfg.seed = 5;
    optimize_visibility(grid, model, views, cfg);
    CHECK(grid.frozen());

    SUBCASE("frozen grid rejects further optimization") {
        CHECK_THROWS_AS(optimize_visibility(grid, model, views, cfg), StateError);
    }

    SUBCASE("probe points on view rays match the ray-marched oracle") {
        Rng rng(7);
        int checked = 0;
        double worst = 0.0;
        while (checked < 100) {
            const PinholeCamera& cam = views[rng.uniform_index(2)];
            Ray ray = cam.pixel_ray(static_cast<int>(rng.uniform_index(48)),
                                    static_cast<int>(rng.uniform_index(48)), 0.0, 1e9);
            if (!clip_ray_to_bounds(ray, model.bounds)) continue;
            double t = rng.uniform(ray.near + 0.05, ray.far - 0.05);
            Vec3 p = ray.at(t);
            double oracle = std::max(marched_transmittance(model, views[0].translation, p),
                                     marched_transmittance(model, views[1].translation, p));
            // The oracle treats the direction to p as a view ray; only
            // points actually inside both frusta are comparable. Points on a
            // sampled ray are inside at least their own frustum; compare
            // against per-view oracles restricted to frustum membership.
            double best_visible = 0.0;
            for (const PinholeCamera& vc : views) {
                double u, v;
                if (!vc.project(p, &u, &v)) continue;
                if (u < 0 || v < 0 || u >= 48 || v >= 48) continue;
                best_visible = std::max(best_visible,
                                        marched_transmittance(model, vc.translation, p));
            }
            oracle = best_visible;
            double got = grid.sample(p);
            worst = std::max(worst, std::abs(got - oracle));
            ++checked;
        }
        INFO("worst |G - maxT| = ", worst);
        CHECK(worst <= 0.05);
    }

    SUBCASE("grid stays zero where no ray passed") {
        // Behind the ball relative to both cameras sits a shadowed pocket;
        // more simply, outside every frustum the grid was never touched.
        Vec3 behind{-0.7, -0.6, -0.7};
        bool in_any = false;
        for (const PinholeCamera& vc : views) {
            double u, v;
            if (vc.project(behind, &u, &v) && u >= 0 && v >= 0 && u < 48 && v < 48) in_any = true;
        }
        if (!in_any) CHECK(grid.sample(behind) == doctest::Approx(0.0));
    }

    SUBCASE("additional passes never decrease the grid") {
        VisibilityGrid more(48, model.bounds);
        VisibilityOptConfig cfg2 = cfg;
        cfg2.passes = 10;
        optimize_visibility(more, model, views, cfg2);
        std::vector<double> snapshot = more.grid().values();
        VisibilityGrid more2(48, model.bounds);
        VisibilityOptConfig cfg3 = cfg;
        cfg3.passes = 20;
        optimize_visibility(more2, model, views, cfg3);
        for (std::size_t i = 0; i < snapshot.size(); ++i)
            CHECK(more2.grid().values()[i] >= snapshot[i] - 1e-12);
    }
}

TEST_CASE("rendered visibility integrates the grid") {
    SceneModel model = toy_room();
    SUBCASE("all-ones grid on an opaque ray gives ~1, all-zeros gives 0") {
        VisibilityGrid ones(16, model.bounds);
        ones.grid().fill(1.0);
        VisibilityGrid zeros(16, model.bounds);
        Ray ray;
        ray.origin = {0.0, 0.0, 0.0};
        ray.direction = {0, 0, 1};
        ray.near = 1e-3;
        ray.far = model.bounds.diagonal();
        std::vector<Ray> rays{ray};
        double v1 = render_visibility(ones, model, rays, 128)[0];
        double v0 = render_visibility(zeros, model, rays, 128)[0];
        CHECK(v1 == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(v0 == doctest::Approx(0.0));
    }
    SUBCASE("mixed grid matches a scalar integration oracle") {
        VisibilityGrid grid(16, model.bounds);
        Rng rng(9);
        for (double& v : grid.grid().values()) v = rng.uniform(0.0, 1.0);
        Ray ray;
        ray.origin = {0.1, 0.05, -0.2};
        ray.direction = normalized({0.2, -0.3, 1.0});
        ray.near = 1e-3;
        ray.far = model.bounds.diagonal();
        std::vector<Ray> rays{ray};
        double got = render_visibility(grid, model, rays, 64)[0];
        // Oracle: same quadrature, written against the raw formulas.
        Ray clipped = ray;
        clip_ray_to_bounds(clipped, model.bounds);
        Rng srng(0);
        RaySamples samples = sample_uniform(clipped, 64, false, srng);
        double T = 1.0, acc = 0.0;
        for (int i = 0; i < samples.count(); ++i) {
            Vec3 p = clipped.at(samples.t[i]);
            double sigma = sdf_to_density(scene_sdf(model, p).first, model.beta());
            double alpha = 1.0 - std::exp(-sigma * samples.delta[i]);
            acc += T * alpha * grid.grid().sample(p);
            T *= 1.0 - alpha;
        }
        CHECK(got == doctest::Approx(acc).epsilon(1e-9));
    }
}

TEST_CASE("object bounding boxes from visibility") {
    SceneModel model = toy_room();
    std::vector<PinholeCamera> views;
    for (int i = 0; i < 4; ++i) {
        double az = 2.0 * kPi * i / 4.0;
        views.push_back(PinholeCamera::look_at({0.65 * std::sin(az), 0.15, 0.65 * std::cos(az)},
                                               {0, -0.2, 0}, {0, 1, 0}, 60, 48, 48));
    }
    VisibilityGrid grid(48, model.bounds);
    VisibilityOptConfig cfg;
    cfg.passes = 8;
    cfg.samples_per_ray = 48;
    optimize_visibility(grid, model, views, cfg);
    double thresh = 0.25 / model.beta();

    SUBCASE("clean sphere bbox brackets the analytic extent") {
        Aabb box = object_bbox_from_visibility(grid, model, 2, thresh);
        // sphere center (0,-0.2,0.1), radius 0.3 -> extent +-0.3 plus a cell
        Vec3 lo = box.min, hi = box.max;
        CHECK(lo.x <= -0.3 + 0.001);
        CHECK(hi.x >= 0.3 - 0.001);
        CHECK(lo.x >= -0.42);
        CHECK(hi.x <= 0.42);
        CHECK(lo.y <= -0.5 + 0.001);
        CHECK(hi.y >= 0.1 - 0.001);
        CHECK(lo.y >= -0.62);
        CHECK(hi.y <= 0.22);
    }

    SUBCASE("an unseen floater blob does not grow the bbox") {
        Aabb clean = object_bbox_from_visibility(grid, model, 2, thresh);
        SceneModel with_floater = toy_room();
        // Replace the ball with ball + far-corner blob; same visibility grid
        // (the blob was never observed, so its mean visibility is ~0).
        std::vector<std::shared_ptr<const AnalyticSdf>> parts;
        parts.push_back(std::make_shared<SphereSdf>(Vec3{0.0, -0.2, 0.1}, 0.3));
        parts.push_back(std::make_shared<SphereSdf>(Vec3{-0.75, -0.75, -0.75}, 0.08));
        with_floater.objects[1].field = SdfField(std::make_shared<UnionSdf>(std::move(parts)));
        Aabb dirty = object_bbox_from_visibility(grid, with_floater, 2, thresh);
        CHECK(dirty.min.x == doctest::Approx(clean.min.x));
        CHECK(dirty.min.y == doctest::Approx(clean.min.y));
        CHECK(dirty.min.z == doctest::Approx(clean.min.z));
        CHECK(dirty.max.x == doctest::Approx(clean.max.x));
    }

    SUBCASE("an empty field is an error naming the object") {
        SceneModel empty = toy_room();
        empty.objects[1].field = SdfField(std::make_shared<SphereSdf>(Vec3{5, 5, 5}, 0.01));
        try {
            object_bbox_from_visibility(grid, empty, 2, thresh);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("ball") != std::string::npos);
        }
    }
}
