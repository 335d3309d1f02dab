// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "sdfrecon/render.hpp"
#include "test_util.hpp"

using namespace sdfrecon;
using sdfrecon::testing::close;
using sdfrecon::testing::fd_is_smooth;
using sdfrecon::testing::make_micro_model;

namespace {

Ray make_ray(const Vec3& origin, const Vec3& dir, double near, double far) {
    Ray r;
    r.origin = origin;
    r.direction = normalized(dir);
    r.near = near;
    r.far = far;
    return r;
}

// Scalar functional of all render outputs against a fixed co-vector.
double project_outputs(const RenderBuffers& buf, const RayAdjoints& adj, int k) {
    double acc = dot(buf.color, adj.d_color) + buf.depth * adj.d_depth +
                 dot(buf.normal, adj.d_normal) + buf.visibility * adj.d_visibility +
                 buf.t_end * adj.d_t_end + buf.mask * adj.d_mask;
    for (int j = 0; j < k; ++j) acc += buf.sem[j] * adj.d_sem[j];
    return acc;
}

}  // namespace

TEST_CASE("stratified sampling covers the segment") {
    Rng rng(1);
    Ray ray = make_ray({0, 0, 0}, {0, 0, 1}, 0.0, 1.0);
    SUBCASE("two bins have centers at the quartiles") {
        RaySamples s = sample_uniform(ray, 2, false, rng);
        CHECK(s.t[0] == doctest::Approx(0.25));
        CHECK(s.t[1] == doctest::Approx(0.75));
    }
    SUBCASE("four bins give deltas of 0.25, last one capped at far") {
        RaySamples s = sample_uniform(ray, 4, false, rng);
        for (int i = 0; i + 1 < 4; ++i) CHECK(s.delta[i] == doctest::Approx(0.25));
        CHECK(s.delta[3] == doctest::Approx(ray.far - s.t[3]));
    }
    SUBCASE("jitter is reproducible for a fixed seed") {
        Rng a(42), b(42);
        RaySamples sa = sample_uniform(ray, 16, true, a);
        RaySamples sb = sample_uniform(ray, 16, true, b);
        for (int i = 0; i < 16; ++i) CHECK(sa.t[i] == sb.t[i]);
    }
    SUBCASE("t strictly increasing, deltas positive") {
        RaySamples s = sample_uniform(ray, 32, true, rng);
        for (int i = 1; i < 32; ++i) CHECK(s.t[i] > s.t[i - 1]);
        for (double d : s.delta) CHECK(d > 0.0);
    }
}

TEST_CASE("weight conservation: sum of weights plus final transmittance is one") {
    SceneModel model = make_micro_model(6, 3);
    Rng rng(17);
    RenderOptions opts;
    opts.semantics = true;
    for (int trial = 0; trial < 2000; ++trial) {
        Ray ray = make_ray(rng.uniform_in_box(model.bounds),
                           {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.0,
                           1e9);
        if (length(ray.direction) < 1e-9) continue;
        if (!clip_ray_to_bounds(ray, model.bounds)) continue;
        RaySamples samples = sample_uniform(ray, 33, true, rng);
        RenderBuffers buf = integrate_ray(model, ray, samples, nullptr, opts);
        CHECK(std::abs(buf.mask + buf.t_end - 1.0) < 1e-12);
    }
}

TEST_CASE("hand-rolled transmittance recursion: alpha = 0.5 chain") {
    // Single object whose density is tuned per-sample is awkward; instead
    // verify the published weight recursion on the integrator by choosing
    // sigma*delta = ln 2 so every alpha is exactly 0.5.
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    SceneObject obj;
    obj.name = "background";
    // Constant SDF = -1 via a grid filled with -1: density = saturated.
    DenseGrid3 g(2, 2, 2, 1, model.bounds, -1.0);
    obj.field = SdfField(std::move(g));
    model.objects.push_back(std::move(obj));
    model.color = DenseGrid3(2, 2, 2, 3, model.bounds, 0.0);
    // sigma = (1 - 0.5 exp(-1/beta)) / beta ~= 1/beta; choose beta then
    // delta so sigma * delta = ln 2.
    model.set_beta(0.25);
    double sigma = sdf_to_density(-1.0, 0.25);
    double delta = std::log(2.0) / sigma;

    RaySamples samples;
    for (int i = 0; i < 3; ++i) {
        samples.t.push_back(0.1 + i * delta);
        samples.delta.push_back(delta);
    }
    Ray ray = make_ray({0, 0, -0.9}, {0, 0, 1}, 0.0, 1.0);
    RenderOptions opts;
    RayWorkspace ws;
    RenderBuffers buf = integrate_ray(model, ray, samples, nullptr, opts, &ws);
    REQUIRE(ws.n == 3);
    CHECK(ws.samples[0].alpha == doctest::Approx(0.5));
    CHECK(ws.samples[0].T == doctest::Approx(1.0));
    CHECK(ws.samples[1].T == doctest::Approx(0.5));
    CHECK(ws.samples[2].T == doctest::Approx(0.25));
    CHECK(buf.t_end == doctest::Approx(0.125));
    CHECK(buf.mask == doctest::Approx(0.875));
    // weights 0.5, 0.25, 0.125: depth = sum w t.
    double expect_depth = 0.5 * samples.t[0] + 0.25 * samples.t[1] + 0.125 * samples.t[2];
    CHECK(buf.depth == doctest::Approx(expect_depth));
}

TEST_CASE("opaque surfel: single saturated sample") {
    SceneModel model = make_micro_model(4, 9);
    // One sample with enormous sigma*delta.
    RaySamples samples;
    samples.t.push_back(0.4);
    samples.delta.push_back(1e9);
    Ray ray = make_ray({0, 0, -0.8}, {0, 0, 1}, 0.0, 2.0);
    RenderOptions opts;
    opts.semantics = true;
    RenderBuffers buf = integrate_ray(model, ray, samples, nullptr, opts);
    CHECK(buf.mask == doctest::Approx(1.0));
    CHECK(buf.t_end == doctest::Approx(0.0));
    CHECK(buf.depth == doctest::Approx(0.4));
    Vec3 p = ray.at(0.4);
    SemanticLogits h = semantic_logits(model, p);
    for (int j = 0; j < 2; ++j) CHECK(buf.sem[j] == doctest::Approx(h.h[j]));
}

TEST_CASE("empty samples mean empty space") {
    SceneModel model = make_micro_model(4, 10);
    Ray ray = make_ray({0, 0, -0.8}, {0, 0, 1}, 0.0, 2.0);
    RenderBuffers buf = integrate_ray(model, ray, {}, nullptr, RenderOptions{});
    CHECK(buf.t_end == doctest::Approx(1.0));
    CHECK(buf.color.x == 0.0);
    CHECK(buf.mask == 0.0);
}

TEST_CASE("single-object scene: object render equals scene render bitwise") {
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    SceneObject obj;
    obj.name = "background";
    SdfField shell(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.8, 0.8, 0.8}));
    obj.field = SdfField::rasterized(shell, 8, 8, 8, model.bounds);
    model.objects.push_back(std::move(obj));
    model.color = DenseGrid3(4, 4, 4, 3, model.bounds, 0.2);
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        Ray ray = make_ray(rng.uniform_in_box({{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}),
                           {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, 1e-3,
                           3.0);
        if (!clip_ray_to_bounds(ray, model.bounds)) continue;
        RaySamples samples = sample_uniform(ray, 24, true, rng);
        RenderOptions scene_opts;
        RenderOptions object_opts;
        object_opts.object_id = 1;
        RenderBuffers a = integrate_ray(model, ray, samples, nullptr, scene_opts);
        RenderBuffers b = integrate_ray(model, ray, samples, nullptr, object_opts);
        CHECK(a.color.x == b.color.x);
        CHECK(a.depth == b.depth);
        CHECK(a.normal.x == b.normal.x);
        CHECK(a.normal.y == b.normal.y);
        CHECK(a.t_end == b.t_end);
        CHECK(a.mask == b.mask);
    }
}

TEST_CASE("reverse-mode render gradients match finite differences") {
    SceneModel model = make_micro_model(4, 23);
    std::vector<ParamArray> params = model.param_arrays();
    Rng rng(29);
    RenderOptions opts;
    opts.semantics = true;
    opts.early_stop = false;

    int checked = 0;
    int attempts = 0;
    while (checked < 60 && attempts < 400) {
        ++attempts;
        Ray ray = make_ray(rng.uniform_in_box({{-0.4, -0.4, -0.4}, {0.4, 0.4, 0.4}}),
                           {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.0,
                           1e9);
        if (length(ray.direction) < 1e-6) continue;
        if (!clip_ray_to_bounds(ray, model.bounds)) continue;
        Rng srng(1000 + attempts);
        RaySamples samples = sample_uniform(ray, 16, true, srng);

        RayAdjoints adj;
        adj.d_color = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        adj.d_depth = rng.uniform(-1, 1);
        adj.d_normal = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        adj.d_visibility = 0.0;
        adj.d_t_end = rng.uniform(-1, 1);
        adj.d_mask = rng.uniform(-1, 1);
        for (int j = 0; j < model.object_count(); ++j) adj.d_sem[j] = rng.uniform(-1, 1);

        RayWorkspace ws;
        integrate_ray(model, ray, samples, nullptr, opts, &ws);
        if (ws.n == 0) continue;
        GradStore grads;
        grads.init_like(params);
        integrate_ray_backward(model, ws, adj, opts, grads);

        // Pick a parameter with nonzero analytic gradient.
        std::vector<std::pair<int, std::size_t>> candidates;
        for (std::size_t a = 0; a < grads.slots.size(); ++a)
            for (std::size_t i = 0; i < grads.slots[a].size(); ++i)
                if (grads.slots[a][i] != 0.0) candidates.emplace_back(static_cast<int>(a), i);
        if (candidates.empty()) continue;
        auto [slot, index] = candidates[rng.uniform_index(candidates.size())];
        double* entry = params[slot].data + index;

        auto eval = [&]() {
            RenderBuffers buf = integrate_ray(model, ray, samples, nullptr, opts);
            return project_outputs(buf, adj, model.object_count());
        };
        double fd;
        if (!fd_is_smooth(entry, eval, 1e-3, &fd)) continue;  // argmin/kink probe, resample
        INFO("slot ", params[slot].name, " index ", index);
        CHECK(close(grads.slots[slot][index], fd, 1e-3, 1e-8));
        ++checked;
    }
    CHECK(checked >= 50);
}

TEST_CASE("occupancy sampling") {
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
    OccupancyGrid occ(16, bounds);
    Ray ray = make_ray({-0.9, 0.05, 0.02}, {1, 0, 0}, 0.0, 5.0);
    const double step = 0.02;
    SUBCASE("fully occupied equals uniform marching count within one") {
        occ.mark_all_occupied();
        RaySamples s = sample_occgrid(ray, occ, step);
        double len = 2.0 - 0.1;  // clip enters at x=-1? origin inside: [0, 1.9]
        // Clip: from -0.9 to +1 along x.
        int expect = static_cast<int>(std::ceil(1.9 / step));
        CHECK(std::abs(s.count() - expect) <= 1);
        for (double d : s.delta) CHECK(d <= step + 1e-12);
        (void)len;
    }
    SUBCASE("fully empty yields no samples and transmittance one") {
        occ.mark_all_empty();
        RaySamples s = sample_occgrid(ray, occ, step);
        CHECK(s.count() == 0);
        SceneModel model = make_micro_model(4, 2);
        RenderBuffers buf = integrate_ray(model, ray, s, nullptr, RenderOptions{});
        CHECK(buf.t_end == doctest::Approx(1.0));
    }
    SUBCASE("samples land only in occupied cells") {
        // Occupy only the x > 0 half via a sharp model.
        SceneModel model;
        model.bounds = bounds;
        SceneObject obj;
        obj.name = "background";
        obj.field = SdfField(std::make_shared<PlaneSdf>(Vec3{-1, 0, 0}, -0.0));  // s = -x
        model.objects.push_back(std::move(obj));
        model.color = DenseGrid3(2, 2, 2, 3, bounds);
        model.set_beta(0.05);
        OccupancyGrid occ2(16, bounds);
        occ2.update(model, 0, 0.95, step, 1e-4);
        RaySamples s = sample_occgrid(ray, occ2, step);
        REQUIRE(s.count() > 0);
        for (double t : s.t) {
            Vec3 p = ray.at(t);
            CHECK(p.x > -0.4);  // a couple of boundary cells tolerated
        }
    }
}

TEST_CASE("occgrid path matches the uniform path on a converged field") {
    // Converged: the analytic-sphere-in-room model rasterized at decent
    // resolution with a small beta.
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    SceneObject bg, ball;
    bg.name = "background";
    bg.field = SdfField::rasterized(
        SdfField(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.9, 0.9, 0.9})), 64, 64, 64,
        model.bounds);
    ball.name = "ball";
    ball.field = SdfField::rasterized(
        SdfField(std::make_shared<SphereSdf>(Vec3{0, -0.3, 0}, 0.35)), 64, 64, 64, model.bounds);
    model.objects.push_back(std::move(bg));
    model.objects.push_back(std::move(ball));
    model.color = DenseGrid3(8, 8, 8, 3, model.bounds, 0.4);
    model.set_beta(0.01);

    OccupancyGrid occ(64, model.bounds);
    occ.update(model, 0, 0.95, 2.0 / 256.0, 1e-4);

    Rng rng(31);
    RenderOptions opts;
    double max_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        Ray ray = make_ray({rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.3), rng.uniform(-0.3, 0.3)},
                           {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.0,
                           1e9);
        if (length(ray.direction) < 1e-6) continue;
        if (!clip_ray_to_bounds(ray, model.bounds)) continue;
        RaySamples uniform = sample_uniform(ray, 256, false, rng);
        RaySamples fast = sample_occgrid(ray, occ, 2.0 / 256.0);
        RenderBuffers a = integrate_ray(model, ray, uniform, nullptr, opts);
        RenderBuffers b = integrate_ray(model, ray, fast, nullptr, opts);
        max_err = std::max(max_err, length1(a.color - b.color) / 3.0);
    }
    CHECK(max_err < 1e-2);
}

TEST_CASE("sphere tracing") {
    SdfField sphere(std::make_shared<SphereSdf>(Vec3{0, 0, 0}, 1.0));
    SUBCASE("axial hit at the expected point") {
        Ray ray = make_ray({0, 0, -3}, {0, 0, 1}, 0.0, 10.0);
        auto hit = sphere_trace(sphere, ray, 1e-3);
        REQUIRE(hit.has_value());
        CHECK(std::abs(hit->point.z + 1.0) < 2e-3);
        CHECK(std::abs(hit->point.x) < 1e-6);
    }
    SUBCASE("offset ray misses") {
        Ray ray = make_ray({2, 0, -3}, {0, 0, 1}, 0.0, 10.0);
        CHECK_FALSE(sphere_trace(sphere, ray, 1e-3).has_value());
    }
    SUBCASE("grid-sampled sphere hits within 0.02 of the analytic point") {
        SdfField grid = SdfField::rasterized(sphere, 64, 64, 64, {{-2, -2, -2}, {2, 2, 2}});
        Rng rng(37);
        for (int i = 0; i < 20; ++i) {
            Vec3 origin{rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), -3.0};
            Ray ray = make_ray(origin, Vec3{0, 0, 1}, 0.0, 10.0);
            auto hit = sphere_trace(grid, ray, 1e-3);
            auto exact = sphere_trace(sphere, ray, 1e-6, 512, 1e-5);
            REQUIRE(hit.has_value());
            REQUIRE(exact.has_value());
            CHECK(length(hit->point - exact->point) < 0.02);
        }
    }
}

TEST_CASE("panorama mapping and rendering") {
    SUBCASE("four equator columns map to +z +x -z -x") {
        int W = 4, H = 2;
        Vec3 d0 = panorama_direction(0, H / 2.0, W, H);
        Vec3 d1 = panorama_direction(1, H / 2.0, W, H);
        Vec3 d2 = panorama_direction(2, H / 2.0, W, H);
        Vec3 d3 = panorama_direction(3, H / 2.0, W, H);
        CHECK(d0.z == doctest::Approx(1.0));
        CHECK(d1.x == doctest::Approx(1.0));
        CHECK(d2.z == doctest::Approx(-1.0));
        CHECK(d3.x == doctest::Approx(-1.0));
    }
    SceneModel model = make_micro_model(8, 41);
    SUBCASE("closed room gives finite positive depths") {
        PanoramaSet pano = render_panorama(model, {0, 0, 0}, 16, 8, nullptr, 64, 2);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 16; ++x) {
                CHECK(std::isfinite(pano.depth.at(x, y)));
                CHECK(pano.depth.at(x, y) > 0.0);
            }
    }
    SUBCASE("panorama pixel equals the single-ray render") {
        DenseGrid3 vis(8, 8, 8, 1, model.bounds, 0.0);
        Rng rng(43);
        for (double& v : vis.values()) v = rng.uniform(0.0, 1.0);
        PanoramaSet pano = render_panorama(model, {0, 0, 0}, 16, 8, &vis, 64, 1);
        int x = 5, y = 3;
        Ray ray;
        ray.origin = {0, 0, 0};
        ray.direction = panorama_direction(x + 0.5, y + 0.5, 16, 8);
        ray.near = 1e-4;
        ray.far = model.bounds.diagonal();
        Rng srng(0);
        RaySamples samples = sample_uniform(ray, 64, false, srng);
        RenderOptions opts;
        opts.object_id = 1;
        RenderBuffers buf = integrate_ray(model, ray, samples, &vis, opts);
        CHECK(std::abs(pano.visibility.at(x, y) - buf.visibility) < 1e-3);
        CHECK(pano.color.at(x, y, 0) == doctest::Approx(buf.color.x));
    }
}
