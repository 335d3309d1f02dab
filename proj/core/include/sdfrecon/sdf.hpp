// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "sdfrecon/grid.hpp"
#include "sdfrecon/math.hpp"

namespace sdfrecon {

// Exact signed distance primitives (negative inside). Gradients are the
// analytic unit gradients away from the medial axis.
class AnalyticSdf {
public:
    virtual ~AnalyticSdf() = default;
    virtual double value(const Vec3& p) const = 0;
    virtual Vec3 gradient(const Vec3& p) const = 0;
};

class SphereSdf final : public AnalyticSdf {
public:
    SphereSdf(const Vec3& center, double radius) : center_(center), radius_(radius) {}
    double value(const Vec3& p) const override { return length(p - center_) - radius_; }
    Vec3 gradient(const Vec3& p) const override {
        Vec3 d = p - center_;
        double len = length(d);
        return len > 1e-12 ? d / len : Vec3{1, 0, 0};
    }
    Vec3 center() const { return center_; }
    double radius() const { return radius_; }

private:
    Vec3 center_;
    double radius_;
};

class BoxSdf final : public AnalyticSdf {
public:
    BoxSdf(const Vec3& center, const Vec3& half_extents, const Mat3& rotation = Mat3::identity())
        : center_(center), half_(half_extents), rot_(rotation) {}
    double value(const Vec3& p) const override;
    Vec3 gradient(const Vec3& p) const override;
    Vec3 center() const { return center_; }
    Vec3 half_extents() const { return half_; }
    Mat3 rotation() const { return rot_; }

private:
    Vec3 center_;
    Vec3 half_;
    Mat3 rot_;
};

class PlaneSdf final : public AnalyticSdf {
public:
    PlaneSdf(const Vec3& normal, double offset) : n_(normalized(normal)), d_(offset) {}
    double value(const Vec3& p) const override { return dot(n_, p) - d_; }
    Vec3 gradient(const Vec3&) const override { return n_; }

private:
    Vec3 n_;
    double d_;
};

// Hollow room: positive inside the box (free space), negative beyond the
// walls. The negation of the box SDF, so the zero set is the wall surface.
class RoomShellSdf final : public AnalyticSdf {
public:
    RoomShellSdf(const Vec3& center, const Vec3& half_extents) : box_(center, half_extents) {}
    double value(const Vec3& p) const override { return -box_.value(p); }
    Vec3 gradient(const Vec3& p) const override { return box_.gradient(p) * -1.0; }
    Vec3 center() const { return box_.center(); }
    Vec3 half_extents() const { return box_.half_extents(); }

private:
    BoxSdf box_;
};

// Union of children (pointwise min). Exact off the medial axis.
class UnionSdf final : public AnalyticSdf {
public:
    explicit UnionSdf(std::vector<std::shared_ptr<const AnalyticSdf>> children)
        : children_(std::move(children)) {}
    double value(const Vec3& p) const override;
    Vec3 gradient(const Vec3& p) const override;
    const std::vector<std::shared_ptr<const AnalyticSdf>>& children() const { return children_; }

private:
    std::vector<std::shared_ptr<const AnalyticSdf>> children_;
};

// A signed distance field backed either by an analytic primitive or by a
// trainable dense grid.
class SdfField {
public:
    SdfField() = default;
    explicit SdfField(std::shared_ptr<const AnalyticSdf> analytic)
        : analytic_(std::move(analytic)) {}
    explicit SdfField(DenseGrid3 grid) : grid_(std::move(grid)), is_grid_(true) {}

    bool is_grid() const { return is_grid_; }
    DenseGrid3& grid() { return grid_; }
    const DenseGrid3& grid() const { return grid_; }
    const AnalyticSdf* analytic() const { return analytic_.get(); }

    double value(const Vec3& p) const {
        return is_grid_ ? grid_.sample(p) : analytic_->value(p);
    }
    // Value plus spatial gradient (exact analytic gradient, or the per-cell
    // trilinear gradient for grids).
    double value_and_gradient(const Vec3& p, Vec3* grad) const {
        if (is_grid_) {
            GridQuery q = grid_.locate(p);
            return grid_.sample_with_gradient(q, grad);
        }
        if (grad) *grad = analytic_->gradient(p);
        return analytic_->value(p);
    }

    // Rasterize any field into a grid representation (used to build
    // trainable initializations from analytic shapes).
    static SdfField rasterized(const SdfField& src, int nx, int ny, int nz, const Aabb& bounds);

private:
    std::shared_ptr<const AnalyticSdf> analytic_;
    DenseGrid3 grid_;
    bool is_grid_ = false;
};

// (value, gradient) of a field at p.
std::pair<double, Vec3> sdf_query(const SdfField& field, const Vec3& p);

// Accumulate `upstream` (d loss / d value at p) into the grid's adjoint
// buffer with trilinear weights.
void grid_backprop(DenseGrid3& grid, const Vec3& p, double upstream);

}  // namespace sdfrecon
