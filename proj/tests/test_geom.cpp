// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/error.hpp"
#include "sdfrecon/grid.hpp"
#include "sdfrecon/sdf.hpp"
#include "test_util.hpp"

using namespace sdfrecon;
using sdfrecon::testing::close;
using sdfrecon::testing::finite_difference;

TEST_CASE("rays pass through requested pixels") {
    PinholeCamera cam;
    cam.fx = cam.fy = 1.0;
    cam.cx = cam.cy = 0.0;
    cam.width = cam.height = 1;

    SUBCASE("principal point maps to +z under the identity pose") {
        auto rays = generate_rays(cam, {{0.0, 0.0}});
        CHECK(rays[0].direction.x == doctest::Approx(0.0));
        CHECK(rays[0].direction.y == doctest::Approx(0.0));
        CHECK(rays[0].direction.z == doctest::Approx(1.0));
    }
    SUBCASE("origin equals the camera center under pure translation") {
        cam.translation = {1, 2, 3};
        auto rays = generate_rays(cam, {{0.5, 0.5}});
        CHECK(rays[0].origin.x == doctest::Approx(1.0));
        CHECK(rays[0].origin.y == doctest::Approx(2.0));
        CHECK(rays[0].origin.z == doctest::Approx(3.0));
    }
    SUBCASE("yaw rotates the principal ray") {
        cam.rotation = Mat3::rotation_y(kPi / 2.0);
        auto rays = generate_rays(cam, {{0.0, 0.0}});
        // Independently composed: R_y(90) * (0,0,1) = (sin90, 0, cos90).
        CHECK(rays[0].direction.x == doctest::Approx(1.0));
        CHECK(rays[0].direction.y == doctest::Approx(0.0));
        CHECK(rays[0].direction.z == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("out-of-range pixel is an input error") {
        CHECK_THROWS_AS(generate_rays(cam, {{1.5, 0.0}}), InputError);
        CHECK_THROWS_AS(generate_rays(cam, {{-0.1, 0.0}}), InputError);
    }
    SUBCASE("directions are unit length for random intrinsics") {
        PinholeCamera c2;
        c2.fx = 80;
        c2.fy = 60;
        c2.cx = 64;
        c2.cy = 48;
        c2.width = 128;
        c2.height = 96;
        c2.rotation = Mat3::rotation_y(0.7) * Mat3::rotation_x(-0.3);
        Rng rng(3);
        for (int i = 0; i < 50; ++i) {
            auto rays = generate_rays(
                c2, {{rng.uniform(0.0, 127.9), rng.uniform(0.0, 95.9)}});
            CHECK(std::abs(length(rays[0].direction) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("look_at centers the target") {
    PinholeCamera cam = PinholeCamera::look_at({0.4, 0.3, -0.8}, {0, -0.1, 0}, {0, 1, 0}, 50.0,
                                               128, 128);
    cam.validate();
    double u, v;
    REQUIRE(cam.project({0, -0.1, 0}, &u, &v));
    CHECK(u == doctest::Approx(64.0).epsilon(1e-9));
    CHECK(v == doctest::Approx(64.0).epsilon(1e-9));
}

TEST_CASE("trilinear grid reproduces lattice values and is linear along axes") {
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
    DenseGrid3 grid(5, 4, 3, 1, bounds);
    Rng rng(5);
    for (double& v : grid.values()) v = rng.uniform(-1.0, 1.0);

    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 5; ++i) {
                double stored = grid.values()[grid.node_index(i, j, k)];
                CHECK(grid.sample(grid.node_position(i, j, k)) == doctest::Approx(stored));
            }

    // Linear along x between two lattice nodes.
    Vec3 a = grid.node_position(1, 2, 1);
    Vec3 b = grid.node_position(2, 2, 1);
    double va = grid.sample(a), vb = grid.sample(b);
    for (double f : {0.25, 0.5, 0.75}) {
        Vec3 p = a + (b - a) * f;
        CHECK(grid.sample(p) == doctest::Approx(va + f * (vb - va)));
    }

    SUBCASE("outside queries clamp to the boundary value") {
        Vec3 corner = grid.node_position(4, 3, 2);
        CHECK(grid.sample(corner + Vec3{0.5, 0.7, 0.9}) == doctest::Approx(grid.sample(corner)));
    }
}

TEST_CASE("grid value adjoints match finite differences") {
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
    DenseGrid3 grid(5, 5, 5, 1, bounds);
    Rng rng(7);
    for (double& v : grid.values()) v = rng.uniform(-1.0, 1.0);

    for (int probe = 0; probe < 100; ++probe) {
        Vec3 p = rng.uniform_in_box(bounds);
        GridQuery q = grid.locate(p);
        std::vector<double> sink(grid.value_count(), 0.0);
        grid.accum_value_grad(q, 1.0, sink.data());
        // All 8 corners carry the trilinear weights; verify one at random.
        int corner = static_cast<int>(rng.uniform_index(8));
        int ci = q.i0[0] + (corner & 1), cj = q.i0[1] + ((corner >> 1) & 1),
            ck = q.i0[2] + ((corner >> 2) & 1);
        std::size_t idx = grid.node_index(ci, cj, ck);
        double fd = finite_difference(&grid.values()[idx], 1e-3,
                                      [&]() { return grid.sample(q); });
        CHECK(close(sink[idx], fd, 1e-4));
    }
}

TEST_CASE("grid adjoint scatter: lattice point and cell center") {
    Aabb bounds{{0, 0, 0}, {1, 1, 1}};
    DenseGrid3 grid(3, 3, 3, 1, bounds);
    SUBCASE("exact lattice point sends everything to one corner") {
        grid.zero_grad();
        grid_backprop(grid, grid.node_position(1, 1, 1), 1.0);
        double total = 0.0;
        for (double g : grid.grad()) total += g;
        CHECK(total == doctest::Approx(1.0));
        CHECK(grid.grad()[grid.node_index(1, 1, 1)] == doctest::Approx(1.0));
    }
    SUBCASE("cell center spreads 1/8 to each corner") {
        grid.zero_grad();
        Vec3 center = (grid.node_position(0, 0, 0) + grid.node_position(1, 1, 1)) * 0.5;
        grid_backprop(grid, center, 1.0);
        int nonzero = 0;
        for (double g : grid.grad())
            if (g != 0.0) {
                CHECK(g == doctest::Approx(0.125));
                ++nonzero;
            }
        CHECK(nonzero == 8);
    }
}

TEST_CASE("grid spatial-gradient adjoints match finite differences") {
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
    DenseGrid3 grid(6, 6, 6, 1, bounds);
    Rng rng(9);
    for (double& v : grid.values()) v = rng.uniform(-1.0, 1.0);

    for (int probe = 0; probe < 100; ++probe) {
        Vec3 p = rng.uniform_in_box(bounds);
        Vec3 upstream{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        GridQuery q = grid.locate(p);
        std::vector<double> sink(grid.value_count(), 0.0);
        grid.accum_spatial_grad(q, upstream, sink.data());
        int corner = static_cast<int>(rng.uniform_index(8));
        std::size_t idx = grid.node_index(q.i0[0] + (corner & 1), q.i0[1] + ((corner >> 1) & 1),
                                          q.i0[2] + ((corner >> 2) & 1));
        double fd = finite_difference(&grid.values()[idx], 1e-3, [&]() {
            return dot(grid.spatial_gradient(q), upstream);
        });
        CHECK(close(sink[idx], fd, 1e-4));
    }
}

TEST_CASE("analytic SDFs: values, gradients, eikonal property") {
    SUBCASE("unit sphere") {
        SdfField f(std::make_shared<SphereSdf>(Vec3{0, 0, 0}, 1.0));
        auto [v, g] = sdf_query(f, {2, 0, 0});
        CHECK(v == doctest::Approx(1.0));
        CHECK(g.x == doctest::Approx(1.0));
        CHECK(g.y == doctest::Approx(0.0));
        CHECK(sdf_query(f, {0, 0, 0}).first == doctest::Approx(-1.0));
    }
    SUBCASE("eikonal within 1e-6 off the medial axis") {
        std::vector<SdfField> fields;
        fields.emplace_back(std::make_shared<SphereSdf>(Vec3{0.2, -0.1, 0.3}, 0.6));
        fields.emplace_back(std::make_shared<BoxSdf>(Vec3{-0.1, 0.2, 0.0},
                                                     Vec3{0.4, 0.3, 0.5},
                                                     Mat3::rotation_y(0.4)));
        fields.emplace_back(std::make_shared<PlaneSdf>(Vec3{0.3, 0.8, -0.2}, 0.1));
        fields.emplace_back(std::make_shared<RoomShellSdf>(Vec3{0, 0, 0}, Vec3{0.9, 0.8, 0.7}));
        Rng rng(13);
        for (const auto& field : fields) {
            int checked = 0;
            while (checked < 60) {
                Vec3 p = rng.uniform_in_box({{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}});
                // The medial axis is where nearby gradients disagree; probe
                // smooth spots only.
                Vec3 g0, g1;
                field.value_and_gradient(p, &g0);
                field.value_and_gradient(p + g0 * 1e-4, &g1);
                if (length(g0 - g1) > 1e-6) continue;
                CHECK(std::abs(length(g0) - 1.0) < 1e-6);
                ++checked;
            }
        }
    }
    SUBCASE("grid-sampled sphere approximates the analytic value") {
        SdfField analytic(std::make_shared<SphereSdf>(Vec3{0, 0, 0}, 1.0));
        SdfField grid = SdfField::rasterized(analytic, 32, 32, 32, {{-2, -2, -2}, {2, 2, 2}});
        CHECK(std::abs(grid.value({1.5, 0, 0}) - 0.5) < 0.02);
    }
    SUBCASE("union takes the argmin gradient") {
        auto a = std::make_shared<SphereSdf>(Vec3{-0.5, 0, 0}, 0.3);
        auto b = std::make_shared<SphereSdf>(Vec3{0.7, 0, 0}, 0.3);
        UnionSdf u({a, b});
        CHECK(u.value({0.7, 0.5, 0}) == doctest::Approx(0.2));
        Vec3 g = u.gradient({0.7, 0.5, 0});
        CHECK(g.y == doctest::Approx(1.0));
    }
}

TEST_CASE("grid serialization round-trips through float32") {
    Aabb bounds{{-1, -0.5, 0}, {1, 0.5, 2}};
    DenseGrid3 grid(4, 5, 6, 2, bounds);
    Rng rng(21);
    for (double& v : grid.values()) v = rng.uniform(-3.0, 3.0);
    std::string path = "/tmp/sdfrecon_test_grid.grid";
    grid.save(path);
    DenseGrid3 loaded = DenseGrid3::load(path);
    REQUIRE(loaded.nx() == 4);
    REQUIRE(loaded.ny() == 5);
    REQUIRE(loaded.nz() == 6);
    REQUIRE(loaded.channels() == 2);
    CHECK(loaded.bounds().min.y == doctest::Approx(-0.5));
    for (std::size_t i = 0; i < grid.value_count(); ++i)
        CHECK(loaded.values()[i] ==
              doctest::Approx(static_cast<double>(static_cast<float>(grid.values()[i]))));
}

TEST_CASE("ray-box clipping") {
    Aabb bounds{{-1, -1, -1}, {1, 1, 1}};
    Ray ray;
    ray.origin = {0, 0, -5};
    ray.direction = {0, 0, 1};
    ray.near = 0.0;
    ray.far = 100.0;
    REQUIRE(clip_ray_to_bounds(ray, bounds));
    CHECK(ray.near == doctest::Approx(4.0));
    CHECK(ray.far == doctest::Approx(6.0));
    Ray miss;
    miss.origin = {5, 5, -5};
    miss.direction = {0, 0, 1};
    miss.near = 0.0;
    miss.far = 100.0;
    CHECK_FALSE(clip_ray_to_bounds(miss, bounds));
}
