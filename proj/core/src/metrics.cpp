// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/metrics.hpp"

#include <fstream>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

PointIndex::PointIndex(const std::vector<Vec3>& points) : points_(points) {
    if (points_.empty()) throw InputError("PointIndex: empty point cloud");
    box_ = Aabb::empty();
    for (const Vec3& p : points_) box_.expand(p);
    // Nudge so max-corner points land inside the last cell.
    Vec3 pad = box_.extent() * 1e-9 + Vec3{1e-12, 1e-12, 1e-12};
    box_.min -= pad;
    box_.max += pad;
    double volume = box_.extent().x * box_.extent().y * box_.extent().z;
    double target = std::cbrt(std::max(volume, 1e-30) / points_.size());
    cell_ = std::max(target, 1e-12);
    nx_ = std::max(1, std::min(256, static_cast<int>(box_.extent().x / cell_) + 1));
    ny_ = std::max(1, std::min(256, static_cast<int>(box_.extent().y / cell_) + 1));
    nz_ = std::max(1, std::min(256, static_cast<int>(box_.extent().z / cell_) + 1));

    std::vector<int> counts(static_cast<std::size_t>(nx_) * ny_ * nz_ + 1, 0);
    std::vector<int> cell_index(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        int cx, cy, cz;
        cell_index[i] = cell_of(points_[i], &cx, &cy, &cz);
        counts[cell_index[i] + 1]++;
    }
    for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
    cell_start_ = counts;
    cell_items_.resize(points_.size());
    std::vector<int> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i)
        cell_items_[cursor[cell_index[i]]++] = static_cast<int>(i);
}

int PointIndex::cell_of(const Vec3& p, int* cx, int* cy, int* cz) const {
    Vec3 e = box_.extent();
    *cx = std::clamp(static_cast<int>((p.x - box_.min.x) / e.x * nx_), 0, nx_ - 1);
    *cy = std::clamp(static_cast<int>((p.y - box_.min.y) / e.y * ny_), 0, ny_ - 1);
    *cz = std::clamp(static_cast<int>((p.z - box_.min.z) / e.z * nz_), 0, nz_ - 1);
    return (*cz * ny_ + *cy) * nx_ + *cx;
}

std::pair<int, double> PointIndex::nearest_l1(const Vec3& query) const {
    int qx, qy, qz;
    cell_of(query, &qx, &qy, &qz);
    Vec3 e = box_.extent();
    const Vec3 cell_size{e.x / nx_, e.y / ny_, e.z / nz_};

    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    auto scan_cell = [&](int cx, int cy, int cz) {
        int c = (cz * ny_ + cy) * nx_ + cx;
        for (int i = cell_start_[c]; i < cell_start_[c + 1]; ++i) {
            int idx = cell_items_[i];
            double d = length1(points_[idx] - query);
            if (d < best_d) {
                best_d = d;
                best = idx;
            }
        }
    };
    auto cell_lower_bound = [&](int cx, int cy, int cz) {
        double lb = 0.0;
        double lo = box_.min.x + cx * cell_size.x, hi = lo + cell_size.x;
        lb += std::max({lo - query.x, query.x - hi, 0.0});
        lo = box_.min.y + cy * cell_size.y, hi = lo + cell_size.y;
        lb += std::max({lo - query.y, query.y - hi, 0.0});
        lo = box_.min.z + cz * cell_size.z, hi = lo + cell_size.z;
        lb += std::max({lo - query.z, query.z - hi, 0.0});
        return lb;
    };

    int max_ring = std::max({nx_, ny_, nz_});
    for (int ring = 0; ring <= max_ring; ++ring) {
        // Once a result is known, stop when even the closest cell of this
        // ring cannot beat it.
        if (best >= 0) {
            double ring_min = std::numeric_limits<double>::infinity();
            bool any = false;
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                        int cx = qx + dx, cy = qy + dy, cz = qz + dz;
                        if (cx < 0 || cy < 0 || cz < 0 || cx >= nx_ || cy >= ny_ || cz >= nz_)
                            continue;
                        any = true;
                        ring_min = std::min(ring_min, cell_lower_bound(cx, cy, cz));
                    }
            if (!any || ring_min >= best_d) break;
        }
        for (int dz = -ring; dz <= ring; ++dz)
            for (int dy = -ring; dy <= ring; ++dy)
                for (int dx = -ring; dx <= ring; ++dx) {
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                    int cx = qx + dx, cy = qy + dy, cz = qz + dz;
                    if (cx < 0 || cy < 0 || cz < 0 || cx >= nx_ || cy >= ny_ || cz >= nz_)
                        continue;
                    if (best >= 0 && cell_lower_bound(cx, cy, cz) >= best_d) continue;
                    scan_cell(cx, cy, cz);
                }
    }
    return {best, best_d};
}

ChamferResult chamfer_fscore(const PointCloud& pred, const PointCloud& gt, double threshold) {
    if (pred.points.empty() || gt.points.empty())
        throw InputError("chamfer_fscore: empty point cloud");
    PointIndex gt_index(gt.points);
    PointIndex pred_index(pred.points);
    ChamferResult r;
    std::size_t hit = 0;
    for (const Vec3& p : pred.points) {
        double d = gt_index.nearest_l1(p).second;
        r.accuracy += d;
        hit += d < threshold ? 1 : 0;
    }
    r.accuracy /= static_cast<double>(pred.points.size());
    r.precision = 100.0 * hit / static_cast<double>(pred.points.size());
    hit = 0;
    for (const Vec3& p : gt.points) {
        double d = pred_index.nearest_l1(p).second;
        r.completeness += d;
        hit += d < threshold ? 1 : 0;
    }
    r.completeness /= static_cast<double>(gt.points.size());
    r.recall = 100.0 * hit / static_cast<double>(gt.points.size());
    r.chamfer = 0.5 * (r.accuracy + r.completeness);
    r.f_score = (r.precision + r.recall) > 0.0
                    ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                    : 0.0;
    return r;
}

double normal_consistency(const PointCloud& pred, const PointCloud& gt) {
    if (pred.points.empty() || gt.points.empty())
        throw InputError("normal_consistency: empty point cloud");
    if (pred.normals.size() != pred.points.size() || gt.normals.size() != gt.points.size())
        throw InputError("normal_consistency: clouds must carry normals");
    PointIndex gt_index(gt.points);
    PointIndex pred_index(pred.points);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.points.size(); ++i) {
        int j = gt_index.nearest_l1(pred.points[i]).first;
        acc += dot(pred.normals[i], gt.normals[j]);
    }
    double fwd = acc / static_cast<double>(pred.points.size());
    acc = 0.0;
    for (std::size_t i = 0; i < gt.points.size(); ++i) {
        int j = pred_index.nearest_l1(gt.points[i]).first;
        acc += dot(gt.normals[i], pred.normals[j]);
    }
    double bwd = acc / static_cast<double>(gt.points.size());
    return 100.0 * 0.5 * (fwd + bwd);
}

double mask_miou(const std::vector<Image>& pred_masks, const std::vector<Image>& gt_masks) {
    if (pred_masks.size() != gt_masks.size())
        throw InputError("mask_miou: object count mismatch");
    double acc = 0.0;
    int counted = 0;
    for (std::size_t obj = 0; obj < pred_masks.size(); ++obj) {
        const Image& a = pred_masks[obj];
        const Image& b = gt_masks[obj];
        if (a.width() != b.width() || a.height() != b.height())
            throw InputError("mask_miou: resolution mismatch");
        std::size_t inter = 0, uni = 0;
        for (int y = 0; y < a.height(); ++y)
            for (int x = 0; x < a.width(); ++x) {
                bool pa = a.at(x, y) > 0.5;
                bool pb = b.at(x, y) > 0.5;
                inter += pa && pb ? 1 : 0;
                uni += pa || pb ? 1 : 0;
            }
        if (uni == 0) continue;  // absent in both views
        acc += static_cast<double>(inter) / static_cast<double>(uni);
        ++counted;
    }
    if (counted == 0) throw InputError("mask_miou: no overlapping object set");
    return 100.0 * acc / counted;
}

PointCloud filter_points(const PointCloud& cloud, const std::vector<bool>& keep) {
    PointCloud out;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if (!keep[i]) continue;
        out.points.push_back(cloud.points[i]);
        if (i < cloud.normals.size()) out.normals.push_back(cloud.normals[i]);
    }
    return out;
}

std::string MetricsReport::to_text() const {
    std::string out;
    char buf[256];
    auto line = [&](const std::string& prefix, const ObjectMetrics& m) {
        std::snprintf(buf, sizeof(buf), "%s.chamfer=%.6f\n%s.f_score=%.3f\n%s.normal_consistency=%.3f\n",
                      prefix.c_str(), m.chamfer, prefix.c_str(), m.f_score, prefix.c_str(),
                      m.normal_consistency);
        out += buf;
        if (m.mask_miou >= 0.0) {
            std::snprintf(buf, sizeof(buf), "%s.mask_miou=%.3f\n", prefix.c_str(), m.mask_miou);
            out += buf;
        }
    };
    out += "units=" + units + "\n";
    for (std::size_t i = 0; i < per_object.size(); ++i) {
        std::string prefix = "object." + std::to_string(i + 1) + "." + per_object[i].name;
        line(prefix, per_object[i]);
    }
    line("scene", scene);
    return out;
}

void MetricsReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write: " + path);
    out << to_text();
}

}  // namespace sdfrecon
