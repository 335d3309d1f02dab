// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/sdf.hpp"

#include "sdfrecon/error.hpp"

namespace sdfrecon {

double BoxSdf::value(const Vec3& p) const {
    Vec3 q = rot_.transposed_mul(p - center_);
    Vec3 a = cwise_abs(q) - half_;
    Vec3 outside = cwise_max(a, {0, 0, 0});
    double inside = std::min(max_component(a), 0.0);
    return length(outside) + inside;
}

Vec3 BoxSdf::gradient(const Vec3& p) const {
    Vec3 q = rot_.transposed_mul(p - center_);
    Vec3 a = cwise_abs(q) - half_;
    Vec3 sign{q.x >= 0 ? 1.0 : -1.0, q.y >= 0 ? 1.0 : -1.0, q.z >= 0 ? 1.0 : -1.0};
    Vec3 g_local;
    Vec3 outside = cwise_max(a, {0, 0, 0});
    double out_len = length(outside);
    if (out_len > 1e-12) {
        g_local = cwise_mul(sign, outside / out_len);
    } else {
        // Inside: push along the axis of least penetration.
        int axis = 0;
        if (a.y > a[axis]) axis = 1;
        if (a.z > a[axis]) axis = 2;
        g_local = {0, 0, 0};
        g_local[axis] = sign[axis];
    }
    return rot_ * g_local;
}

double UnionSdf::value(const Vec3& p) const {
    double best = children_.front()->value(p);
    for (std::size_t i = 1; i < children_.size(); ++i)
        best = std::min(best, children_[i]->value(p));
    return best;
}

Vec3 UnionSdf::gradient(const Vec3& p) const {
    double best = children_.front()->value(p);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < children_.size(); ++i) {
        double v = children_[i]->value(p);
        if (v < best) {
            best = v;
            arg = i;
        }
    }
    return children_[arg]->gradient(p);
}

SdfField SdfField::rasterized(const SdfField& src, int nx, int ny, int nz, const Aabb& bounds) {
    DenseGrid3 grid(nx, ny, nz, 1, bounds);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                grid.values()[grid.node_index(i, j, k)] = src.value(grid.node_position(i, j, k));
    return SdfField(std::move(grid));
}

std::pair<double, Vec3> sdf_query(const SdfField& field, const Vec3& p) {
    Vec3 g;
    double v = field.value_and_gradient(p, &g);
    return {v, g};
}

void grid_backprop(DenseGrid3& grid, const Vec3& p, double upstream) {
    GridQuery q = grid.locate(p);
    grid.accum_value_grad(q, upstream);
}

}  // namespace sdfrecon
