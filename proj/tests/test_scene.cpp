// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "sdfrecon/error.hpp"
#include "sdfrecon/scene.hpp"
#include "test_util.hpp"

using namespace sdfrecon;
using sdfrecon::testing::close;
using sdfrecon::testing::finite_difference;

namespace {

SceneModel two_sphere_model() {
    SceneModel model;
    model.bounds = {{-1, -1, -1}, {1, 1, 1}};
    for (int i = 0; i < 2; ++i) {
        SceneObject obj;
        obj.name = i == 0 ? "background" : "ball";
        obj.field = SdfField(std::make_shared<SphereSdf>(Vec3{0, 0, 0}, 0.5));
        model.objects.push_back(std::move(obj));
    }
    model.color = DenseGrid3(2, 2, 2, 3, model.bounds);
    return model;
}

}  // namespace

TEST_CASE("scene SDF is the min with lowest-index tie break") {
    SUBCASE("single object degenerates to that field") {
        SceneModel m;
        m.bounds = {{-1, -1, -1}, {1, 1, 1}};
        SceneObject obj;
        obj.name = "only";
        obj.field = SdfField(std::make_shared<SphereSdf>(Vec3{0, 0, 0}, 0.5));
        m.objects.push_back(std::move(obj));
        m.color = DenseGrid3(2, 2, 2, 3, m.bounds);
        Rng rng(2);
        for (int i = 0; i < 20; ++i) {
            Vec3 p = rng.uniform_in_box(m.bounds);
            auto [v, arg] = scene_sdf(m, p);
            CHECK(v == doctest::Approx(m.objects[0].field.value(p)));
            CHECK(arg == 1);
        }
    }
    SUBCASE("min of two fields picks the lower value") {
        SceneModel m;
        m.bounds = {{-2, -2, -2}, {2, 2, 2}};
        SceneObject a, b;
        a.name = "background";
        a.field = SdfField(std::make_shared<SphereSdf>(Vec3{-1, 0, 0}, 0.4));  // s=+1 at p
        b.name = "box";
        b.field = SdfField(std::make_shared<BoxSdf>(Vec3{0.4, 0, 0}, Vec3{0.9, 0.9, 0.9}));
        m.objects.push_back(std::move(a));
        m.objects.push_back(std::move(b));
        m.color = DenseGrid3(2, 2, 2, 3, m.bounds);
        Vec3 p{0.4, 0, 0};  // inside the box (-0.9), distance 1 from the sphere
        auto [v, arg] = scene_sdf(m, p);
        CHECK(v == doctest::Approx(-0.9));
        CHECK(arg == 2);
    }
    SUBCASE("ties break to the lower object id") {
        SceneModel m = two_sphere_model();
        Rng rng(4);
        for (int i = 0; i < 30; ++i) {
            auto [v, arg] = scene_sdf(m, rng.uniform_in_box(m.bounds));
            CHECK(arg == 1);
        }
    }
}

TEST_CASE("semantic logits follow the closed form") {
    SceneModel m = two_sphere_model();
    m.gamma = 10.0;
    SUBCASE("surface point gives gamma/2") {
        // s = 0 on the sphere of radius 0.5.
        SemanticLogits h = semantic_logits(m, {0.5, 0, 0});
        CHECK(h.h[0] == doctest::Approx(5.0));
    }
    SUBCASE("far outside decays to zero") {
        CHECK(semantic_logit(100.0, 10.0) < 1e-300);
        CHECK(semantic_logit(1e6, 10.0) == doctest::Approx(0.0));
    }
    SUBCASE("closed form at s = -0.2") {
        double expect = 10.0 / (1.0 + std::exp(-2.0));
        CHECK(semantic_logit(-0.2, 10.0) == doctest::Approx(expect));
        CHECK(semantic_logit(-0.2, 10.0) == doctest::Approx(8.80797).epsilon(1e-5));
    }
    SUBCASE("strictly decreasing bijection with exact round trip") {
        // Inverse of h = gamma * sigmoid(-gamma s): s = log(gamma/h - 1) / gamma
        // (checks out on the closed-form example: h = 8.808 at s = -0.2).
        double prev = semantic_logit(-3.0, 10.0);
        for (double s = -2.9; s < 3.0; s += 0.1) {
            double h = semantic_logit(s, 10.0);
            CHECK(h < prev);
            prev = h;
            // gamma/h - 1 cancels catastrophically once h saturates; the
            // 1e-9 round trip is meaningful where doubles can express it.
            if (std::abs(s) > 1.5) continue;
            double recovered = std::log(10.0 / h - 1.0) / 10.0;
            CHECK(std::abs(recovered - s) < 1e-9);
        }
    }
    SUBCASE("derivative matches finite differences") {
        Rng rng(8);
        for (int i = 0; i < 50; ++i) {
            double s = rng.uniform(-0.8, 0.8);
            double fd = (semantic_logit(s + 1e-6, 10.0) - semantic_logit(s - 1e-6, 10.0)) / 2e-6;
            CHECK(close(semantic_logit_ds(s, 10.0), fd, 1e-5));
        }
    }
}

TEST_CASE("density transform: boundary values, monotonicity, derivatives") {
    SUBCASE("value 1/(2 beta) at the surface") {
        CHECK(sdf_to_density(0.0, 0.1) == doctest::Approx(5.0));
    }
    SUBCASE("saturates to 1/beta deep inside") {
        CHECK(sdf_to_density(-50.0, 0.1) == doctest::Approx(10.0));
    }
    SUBCASE("closed form at s = beta") {
        CHECK(sdf_to_density(0.1, 0.1) == doctest::Approx(5.0 * std::exp(-1.0)));
    }
    SUBCASE("continuous at zero and strictly decreasing") {
        double lo = sdf_to_density(-1e-12, 0.1);
        double hi = sdf_to_density(1e-12, 0.1);
        CHECK(std::abs(lo - hi) < 1e-9);
        double prev = sdf_to_density(-2.0, 0.17);
        for (double s = -1.95; s < 2.0; s += 0.05) {
            double cur = sdf_to_density(s, 0.17);
            CHECK(cur < prev);
            prev = cur;
        }
    }
    SUBCASE("rejects non-positive beta") {
        CHECK_THROWS_AS(sdf_to_density(0.0, 0.0), InputError);
        CHECK_THROWS_AS(sdf_to_density(0.0, -1.0), InputError);
    }
    SUBCASE("adjoints match finite differences in s and log beta") {
        Rng rng(12);
        for (int i = 0; i < 100; ++i) {
            double s = rng.uniform(-0.5, 0.5);
            if (std::abs(s) < 1e-3) continue;  // C1 kink at the surface
            double beta = rng.uniform(0.05, 0.3);
            double ds, dlogb;
            sdf_to_density_grad(s, beta, &ds, &dlogb);
            double fd_s = (sdf_to_density(s + 1e-6, beta) - sdf_to_density(s - 1e-6, beta)) / 2e-6;
            CHECK(close(ds, fd_s, 1e-4));
            double lb = std::log(beta);
            double fd_b = (sdf_to_density(s, std::exp(lb + 1e-6)) -
                           sdf_to_density(s, std::exp(lb - 1e-6))) /
                          2e-6;
            CHECK(close(dlogb, fd_b, 1e-4));
        }
    }
}

TEST_CASE("model serialization round-trips grids, prompts and beta") {
    SceneModel model = sdfrecon::testing::make_micro_model(4, 31);
    model.objects[0].prompt = "an empty room";
    model.objects[1].prompt = "a red ball";
    model.set_beta(0.07);
    std::string dir = "/tmp/sdfrecon_test_model";
    model.save(dir);
    SceneModel loaded = SceneModel::load(dir);
    REQUIRE(loaded.object_count() == 2);
    CHECK(loaded.objects[1].name == "ball");
    CHECK(loaded.objects[1].prompt == "a red ball");
    CHECK(loaded.beta() == doctest::Approx(0.07));
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        Vec3 p = rng.uniform_in_box(model.bounds);
        CHECK(std::abs(loaded.objects[1].field.value(p) - model.objects[1].field.value(p)) <
              1e-6);
    }
}
