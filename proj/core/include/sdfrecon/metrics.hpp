// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sdfrecon/image.hpp"
#include "sdfrecon/mesh.hpp"

namespace sdfrecon {

// Uniform-cell spatial index answering exact nearest neighbors under the L1
// metric via expanding-ring search with per-cell lower bounds.
class PointIndex {
public:
    explicit PointIndex(const std::vector<Vec3>& points);

    // (index of nearest point, L1 distance).
    std::pair<int, double> nearest_l1(const Vec3& query) const;

private:
    std::vector<Vec3> points_;
    Aabb box_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<int> cell_start_;  // CSR layout over cells
    std::vector<int> cell_items_;

    int cell_of(const Vec3& p, int* cx, int* cy, int* cz) const;
};

struct ChamferResult {
    double chamfer = 0.0;       // (accuracy + completeness) / 2
    double f_score = 0.0;       // percent
    double accuracy = 0.0;      // mean nn distance pred -> gt
    double completeness = 0.0;  // mean nn distance gt -> pred
    double precision = 0.0;     // percent within threshold
    double recall = 0.0;        // percent
};

// Point-cloud reconstruction metrics with L1 nearest-neighbor distances.
ChamferResult chamfer_fscore(const PointCloud& pred, const PointCloud& gt,
                             double threshold = 0.05);

// Mean nearest-neighbor normal dot product, both directions, averaged, x100.
double normal_consistency(const PointCloud& pred, const PointCloud& gt);

// Mean IoU (percent) over objects present in either view; masks binarized at
// 0.5. Objects absent in both are skipped; an empty comparable set is an
// input error.
double mask_miou(const std::vector<Image>& pred_masks, const std::vector<Image>& gt_masks);

// Drop points whose predicate is false (used for visible-area evaluation).
PointCloud filter_points(const PointCloud& cloud, const std::vector<bool>& keep);

struct ObjectMetrics {
    std::string name;
    double chamfer = 0.0;
    double f_score = 0.0;
    double normal_consistency = 0.0;
    double mask_miou = -1.0;  // < 0 when not evaluated
};

struct MetricsReport {
    std::string units = "normalized";
    std::vector<ObjectMetrics> per_object;
    ObjectMetrics scene;

    std::string to_text() const;
    void save(const std::string& path) const;
};

}  // namespace sdfrecon
