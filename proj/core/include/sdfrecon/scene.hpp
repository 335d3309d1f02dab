// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sdfrecon/sdf.hpp"

namespace sdfrecon {

inline constexpr int kMaxObjects = 8;

// One named object of the scene. Object ids are 1-based; id 1 is the
// background by convention, stored at index 0.
struct SceneObject {
    std::string name;
    std::string prompt;
    SdfField field;
};

// Per-point instance logits h_j = gamma * sigmoid(-gamma * s_j), bounded in
// (0, gamma) with h = gamma/2 exactly on the surface.
struct SemanticLogits {
    int k = 0;
    double h[kMaxObjects];
};

// A flat view over one trainable array.
struct ParamArray {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
};

// Per-thread gradient shadow buffers, one slot per trainable array. Slot
// layout mirrors SceneModel::param_arrays(); the log-beta slot has size 1.
struct GradStore {
    std::vector<std::vector<double>> slots;

    void init_like(const std::vector<ParamArray>& params) {
        slots.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) slots[i].assign(params[i].size, 0.0);
    }
    void zero() {
        for (auto& s : slots) std::fill(s.begin(), s.end(), 0.0);
    }
    void add_from(const GradStore& other) {
        for (std::size_t i = 0; i < slots.size(); ++i)
            for (std::size_t j = 0; j < slots[i].size(); ++j) slots[i][j] += other.slots[i][j];
    }
    double* slot(int param_id) { return param_id >= 0 ? slots[param_id].data() : nullptr; }
};

// The optimizable scene: k object SDFs (background first), a shared color
// grid (raw values, sigmoid-mapped to [0,1] on query) and the density
// sharpness beta optimized in log space.
class SceneModel {
public:
    std::vector<SceneObject> objects;
    DenseGrid3 color;  // 3 channels, raw (pre-sigmoid)
    double log_beta = std::log(0.1);
    double gamma = 10.0;  // fixed
    Aabb bounds;

    int object_count() const { return static_cast<int>(objects.size()); }
    double beta() const { return std::exp(log_beta); }
    void set_beta(double b);

    // Background is object id 1 (index 0).
    static constexpr int kBackgroundId = 1;

    const SceneObject& object_by_id(int id) const { return objects.at(id - 1); }
    SceneObject& object_by_id(int id) { return objects.at(id - 1); }

    // Trainable arrays in a fixed order: one slot per grid-backed object SDF
    // (analytic fields get an empty slot), then the color grid, then logize
    // beta. Assigns grid param ids as a side effect.
    std::vector<ParamArray> param_arrays();

    // Index of the log-beta slot in param_arrays().
    int beta_param_id() const { return beta_param_id_; }

    Vec3 color_at(const Vec3& p) const {
        Vec3 raw = color.sample_vec3(p);
        return {sigmoid(raw.x), sigmoid(raw.y), sigmoid(raw.z)};
    }

    void save(const std::string& dir) const;
    static SceneModel load(const std::string& dir);

private:
    int beta_param_id_ = -1;
};

// min over object SDFs; ties resolved to the lowest object id.
// Returns (value, 1-based argmin object id).
std::pair<double, int> scene_sdf(const SceneModel& model, const Vec3& p);

SemanticLogits semantic_logits(const SceneModel& model, const Vec3& p);

// Single logit transform and its derivative d h / d s.
double semantic_logit(double s, double gamma);
double semantic_logit_ds(double s, double gamma);

// Laplace-CDF density: continuous, strictly decreasing, bounded by 1/beta.
double sdf_to_density(double s, double beta);
// Partial derivatives at (s, beta); d_log_beta is d sigma / d log(beta).
void sdf_to_density_grad(double s, double beta, double* d_s, double* d_log_beta);

}  // namespace sdfrecon
