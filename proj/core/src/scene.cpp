// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/scene.hpp"

#include <cstdio>
#include <filesystem>

#include "sdfrecon/config.hpp"
#include "sdfrecon/error.hpp"

namespace sdfrecon {

void SceneModel::set_beta(double b) {
    if (b <= 0.0) throw InputError("beta must be positive");
    log_beta = std::log(b);
}

std::vector<ParamArray> SceneModel::param_arrays() {
    std::vector<ParamArray> params;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        ParamArray a;
        a.name = "sdf." + objects[i].name;
        if (objects[i].field.is_grid()) {
            DenseGrid3& g = objects[i].field.grid();
            g.param_id = static_cast<int>(params.size());
            a.data = g.data();
            a.size = g.value_count();
        }
        params.push_back(a);
    }
    color.param_id = static_cast<int>(params.size());
    params.push_back({"color", color.data(), color.value_count()});
    beta_param_id_ = static_cast<int>(params.size());
    params.push_back({"log_beta", &log_beta, 1});
    return params;
}

std::pair<double, int> scene_sdf(const SceneModel& model, const Vec3& p) {
    double best = model.objects.front().field.value(p);
    int arg = 1;
    for (int j = 2; j <= model.object_count(); ++j) {
        double v = model.objects[j - 1].field.value(p);
        if (v < best) {
            best = v;
            arg = j;
        }
    }
    return {best, arg};
}

double semantic_logit(double s, double gamma) { return gamma * sigmoid(-gamma * s); }

double semantic_logit_ds(double s, double gamma) {
    double u = sigmoid(-gamma * s);
    return -gamma * gamma * u * (1.0 - u);
}

SemanticLogits semantic_logits(const SceneModel& model, const Vec3& p) {
    SemanticLogits out;
    out.k = model.object_count();
    for (int j = 0; j < out.k; ++j)
        out.h[j] = semantic_logit(model.objects[j].field.value(p), model.gamma);
    return out;
}

double sdf_to_density(double s, double beta) {
    if (beta <= 0.0) throw InputError("sdf_to_density: beta must be positive");
    if (s >= 0.0) return 0.5 / beta * std::exp(-s / beta);
    return (1.0 - 0.5 * std::exp(s / beta)) / beta;
}

void sdf_to_density_grad(double s, double beta, double* d_s, double* d_log_beta) {
    if (beta <= 0.0) throw InputError("sdf_to_density_grad: beta must be positive");
    double e = std::exp(-std::abs(s) / beta);
    double ds = -0.5 * e / (beta * beta);
    double dbeta;
    if (s >= 0.0) {
        dbeta = 0.5 * e * (s / beta - 1.0) / (beta * beta);
    } else {
        dbeta = -1.0 / (beta * beta) + 0.5 * e * (1.0 + s / beta) / (beta * beta);
    }
    if (d_s) *d_s = ds;
    if (d_log_beta) *d_log_beta = dbeta * beta;
}

void SceneModel::save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    KeyValueFile manifest;
    manifest.set_int("object_count", object_count());
    manifest.set_double("gamma", gamma);
    manifest.set_double("log_beta", log_beta);
    manifest.set_vec3("bounds_min", bounds.min);
    manifest.set_vec3("bounds_max", bounds.max);
    for (int id = 1; id <= object_count(); ++id) {
        const SceneObject& obj = objects[id - 1];
        std::string prefix = "object." + std::to_string(id) + ".";
        manifest.set(prefix + "name", obj.name);
        manifest.set(prefix + "prompt", obj.prompt);
        if (!obj.field.is_grid())
            throw InputError("SceneModel::save: object '" + obj.name +
                             "' has an analytic field; only grid fields serialize");
        char fname[64];
        std::snprintf(fname, sizeof(fname), "object_%02d.grid", id);
        manifest.set(prefix + "file", fname);
        obj.field.grid().save((fs::path(dir) / fname).string());
    }
    color.save((fs::path(dir) / "color.grid").string());
    manifest.set("color_file", "color.grid");
    manifest.save((fs::path(dir) / "model.txt").string());
}

SceneModel SceneModel::load(const std::string& dir) {
    namespace fs = std::filesystem;
    KeyValueFile manifest = KeyValueFile::parse_file((fs::path(dir) / "model.txt").string());
    SceneModel model;
    model.gamma = manifest.get_double("gamma");
    model.log_beta = manifest.get_double("log_beta");
    model.bounds.min = manifest.get_vec3("bounds_min");
    model.bounds.max = manifest.get_vec3("bounds_max");
    int k = static_cast<int>(manifest.get_int("object_count"));
    if (k < 1 || k > kMaxObjects) throw InputError("model manifest: bad object_count");
    for (int id = 1; id <= k; ++id) {
        std::string prefix = "object." + std::to_string(id) + ".";
        SceneObject obj;
        obj.name = manifest.get(prefix + "name");
        obj.prompt = manifest.get_or(prefix + "prompt", "");
        std::string file = manifest.get(prefix + "file");
        obj.field = SdfField(DenseGrid3::load((fs::path(dir) / file).string()));
        model.objects.push_back(std::move(obj));
    }
    model.color = DenseGrid3::load((fs::path(dir) / manifest.get("color_file")).string());
    return model;
}

}  // namespace sdfrecon
