// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <string>
#include <vector>

#include "sdfrecon/math.hpp"

namespace sdfrecon {

// Resolved trilinear cell for a query point: corner indices, weights and the
// per-axis derivative scale. Computed once, shared by value/gradient sampling
// and their adjoints so forward and backward always agree.
struct GridQuery {
    int i0[3];          // lower corner (per axis)
    double f[3];        // fractional position inside the cell
    double inv_h[3];    // d(lattice coord)/d(world coord)
    bool clamped[3];    // query fell outside bounds on this axis
};

// Dense axis-aligned trilinear grid with C channels and an adjoint buffer of
// identical shape. Values at lattice points are reproduced exactly; queries
// outside the bounds clamp to the boundary value.
class DenseGrid3 {
public:
    DenseGrid3() = default;
    DenseGrid3(int nx, int ny, int nz, int channels, const Aabb& bounds,
               double fill = 0.0);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    int channels() const { return channels_; }
    const Aabb& bounds() const { return bounds_; }
    bool empty() const { return values_.empty(); }
    std::size_t value_count() const { return values_.size(); }

    // World position of lattice node (i,j,k).
    Vec3 node_position(int i, int j, int k) const;
    Vec3 cell_size() const;

    std::size_t node_index(int i, int j, int k, int c = 0) const {
        return (static_cast<std::size_t>(k) * ny_ + j) * nx_ * channels_ +
               static_cast<std::size_t>(i) * channels_ + c;
    }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    // Adjoint buffer, lazily allocated and zeroed on first use.
    std::vector<double>& grad();
    const std::vector<double>& grad() const { return grad_; }
    void zero_grad();

    GridQuery locate(const Vec3& p) const;

    // Scalar sampling (channel c).
    double sample(const GridQuery& q, int c = 0) const;
    double sample(const Vec3& p, int c = 0) const { return sample(locate(p), c); }

    // Spatial gradient of channel c; exact within the cell, zero along
    // clamped axes.
    Vec3 spatial_gradient(const GridQuery& q, int c = 0) const;

    double sample_with_gradient(const GridQuery& q, Vec3* grad_out, int c = 0) const;
    double sample_with_gradient(const Vec3& p, Vec3* grad_out, int c = 0) const {
        return sample_with_gradient(locate(p), grad_out, c);
    }

    Vec3 sample_vec3(const GridQuery& q) const;
    Vec3 sample_vec3(const Vec3& p) const { return sample_vec3(locate(p)); }

    // d(sample)/d(corner values): scatter `upstream` with trilinear weights
    // into `sink` (a buffer shaped like values()).
    void accum_value_grad(const GridQuery& q, double upstream, double* sink, int c = 0) const;
    void accum_value_grad_vec3(const GridQuery& q, const Vec3& upstream, double* sink) const;

    // d(spatial_gradient)/d(corner values).
    void accum_spatial_grad(const GridQuery& q, const Vec3& upstream, double* sink, int c = 0) const;

    // Convenience overloads accumulating into the grid's own grad buffer.
    void accum_value_grad(const GridQuery& q, double upstream, int c = 0) {
        accum_value_grad(q, upstream, grad().data(), c);
    }
    void accum_spatial_grad(const GridQuery& q, const Vec3& upstream, int c = 0) {
        accum_spatial_grad(q, upstream, grad().data(), c);
    }

    void fill(double v);

    // Binary `.grid` file: magic, version, resolution, channel count, bounds,
    // then float32 little-endian values in x-fastest order.
    void save(const std::string& path) const;
    static DenseGrid3 load(const std::string& path);

    // Identifier assigned by the owning model for gradient routing; -1 when
    // the grid is not a trainable parameter.
    int param_id = -1;

private:
    int nx_ = 0, ny_ = 0, nz_ = 0, channels_ = 1;
    Aabb bounds_;
    std::vector<double> values_;
    std::vector<double> grad_;
};

}  // namespace sdfrecon
