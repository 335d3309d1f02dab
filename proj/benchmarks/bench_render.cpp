// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "sdfrecon/render.hpp"

using namespace sdfrecon;

namespace {

SceneModel bench_model() {
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    SceneObject bg, ball;
    bg.name = "background";
    bg.field = SdfField::rasterized(
        SdfField(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.9, 0.9, 0.9})), 96, 96, 96,
        model.bounds);
    ball.name = "ball";
    ball.field = SdfField::rasterized(
        SdfField(std::make_shared<SphereSdf>(Vec3{0, -0.3, 0}, 0.35)), 64, 64, 64, model.bounds);
    model.objects.push_back(std::move(bg));
    model.objects.push_back(std::move(ball));
    model.color = DenseGrid3(64, 64, 64, 3, model.bounds, 0.2);
    model.set_beta(0.02);
    return model;
}

Ray bench_ray(Rng& rng, const Aabb& bounds) {
    Ray ray;
    ray.origin = {rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.3), rng.uniform(-0.3, 0.3)};
    ray.direction = normalized(
        {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    ray.near = 0.0;
    ray.far = 1e9;
    clip_ray_to_bounds(ray, bounds);
    return ray;
}

void BM_TrilinearQuery(benchmark::State& state) {
    SceneModel model = bench_model();
    const DenseGrid3& grid = model.objects[0].field.grid();
    Rng rng(1);
    Vec3 p = rng.uniform_in_box(model.bounds);
    for (auto _ : state) {
        GridQuery q = grid.locate(p);
        benchmark::DoNotOptimize(grid.sample_with_gradient(q, nullptr));
    }
}
BENCHMARK(BM_TrilinearQuery);

void BM_IntegrateRayUniform(benchmark::State& state) {
    SceneModel model = bench_model();
    Rng rng(2);
    RenderOptions opts;
    opts.semantics = true;
    for (auto _ : state) {
        Ray ray = bench_ray(rng, model.bounds);
        RaySamples samples = sample_uniform(ray, static_cast<int>(state.range(0)), false, rng);
        benchmark::DoNotOptimize(integrate_ray(model, ray, samples, nullptr, opts));
    }
}
BENCHMARK(BM_IntegrateRayUniform)->Arg(64)->Arg(256);

void BM_IntegrateRayOccGrid(benchmark::State& state) {
    SceneModel model = bench_model();
    OccupancyGrid occ(64, model.bounds);
    occ.update(model, 0, 0.95, 2.0 / 256.0, 1e-4);
    Rng rng(3);
    RenderOptions opts;
    opts.semantics = true;
    for (auto _ : state) {
        Ray ray = bench_ray(rng, model.bounds);
        RaySamples samples = sample_occgrid(ray, occ, 2.0 / 256.0);
        benchmark::DoNotOptimize(integrate_ray(model, ray, samples, nullptr, opts));
    }
}
BENCHMARK(BM_IntegrateRayOccGrid);

void BM_BackwardRay(benchmark::State& state) {
    SceneModel model = bench_model();
    std::vector<ParamArray> params = model.param_arrays();
    GradStore grads;
    grads.init_like(params);
    Rng rng(4);
    RenderOptions opts;
    opts.semantics = true;
    RayAdjoints adj;
    adj.d_color = {0.1, -0.2, 0.3};
    adj.d_depth = 0.5;
    adj.d_normal = {0.2, 0.1, -0.1};
    adj.d_sem[0] = 0.3;
    adj.d_sem[1] = -0.2;
    RayWorkspace ws;
    for (auto _ : state) {
        Ray ray = bench_ray(rng, model.bounds);
        RaySamples samples = sample_uniform(ray, 64, false, rng);
        integrate_ray(model, ray, samples, nullptr, opts, &ws);
        integrate_ray_backward(model, ws, adj, opts, grads);
        benchmark::DoNotOptimize(grads.slots[0][0]);
    }
}
BENCHMARK(BM_BackwardRay);

}  // namespace

BENCHMARK_MAIN();
