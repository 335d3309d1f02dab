// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/grid.hpp"

#include <cstdio>
#include <cstring>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

namespace {
constexpr char kMagic[4] = {'S', 'R', 'G', 'D'};
constexpr uint32_t kVersion = 1;
}  // namespace

DenseGrid3::DenseGrid3(int nx, int ny, int nz, int channels, const Aabb& bounds,
                       double fill)
    : nx_(nx), ny_(ny), nz_(nz), channels_(channels), bounds_(bounds) {
    if (nx < 2 || ny < 2 || nz < 2 || channels < 1)
        throw InputError("DenseGrid3: resolution must be >= 2 per axis and channels >= 1");
    values_.assign(static_cast<std::size_t>(nx) * ny * nz * channels, fill);
}

Vec3 DenseGrid3::node_position(int i, int j, int k) const {
    Vec3 e = bounds_.extent();
    return {bounds_.min.x + e.x * i / (nx_ - 1),
            bounds_.min.y + e.y * j / (ny_ - 1),
            bounds_.min.z + e.z * k / (nz_ - 1)};
}

Vec3 DenseGrid3::cell_size() const {
    Vec3 e = bounds_.extent();
    return {e.x / (nx_ - 1), e.y / (ny_ - 1), e.z / (nz_ - 1)};
}

std::vector<double>& DenseGrid3::grad() {
    if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
    return grad_;
}

void DenseGrid3::zero_grad() {
    if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
    else std::fill(grad_.begin(), grad_.end(), 0.0);
}

GridQuery DenseGrid3::locate(const Vec3& p) const {
    GridQuery q;
    const int n[3] = {nx_, ny_, nz_};
    Vec3 e = bounds_.extent();
    for (int a = 0; a < 3; ++a) {
        double scale = (n[a] - 1) / e[a];
        double u = (p[a] - bounds_.min[a]) * scale;
        q.clamped[a] = (u < 0.0 || u > n[a] - 1);
        u = std::clamp(u, 0.0, static_cast<double>(n[a] - 1));
        int i0 = std::min(static_cast<int>(u), n[a] - 2);
        q.i0[a] = i0;
        q.f[a] = u - i0;
        q.inv_h[a] = scale;
    }
    return q;
}

double DenseGrid3::sample(const GridQuery& q, int c) const {
    const double fx = q.f[0], fy = q.f[1], fz = q.f[2];
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        double wz = dz ? fz : 1.0 - fz;
        for (int dy = 0; dy < 2; ++dy) {
            double wy = dy ? fy : 1.0 - fy;
            double wyz = wy * wz;
            std::size_t base = node_index(q.i0[0], q.i0[1] + dy, q.i0[2] + dz, c);
            acc += wyz * ((1.0 - fx) * values_[base] + fx * values_[base + channels_]);
        }
    }
    return acc;
}

Vec3 DenseGrid3::spatial_gradient(const GridQuery& q, int c) const {
    const double fx = q.f[0], fy = q.f[1], fz = q.f[2];
    double gx = 0.0, gy = 0.0, gz = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        double wz = dz ? fz : 1.0 - fz;
        double sz = dz ? 1.0 : -1.0;
        for (int dy = 0; dy < 2; ++dy) {
            double wy = dy ? fy : 1.0 - fy;
            double sy = dy ? 1.0 : -1.0;
            std::size_t base = node_index(q.i0[0], q.i0[1] + dy, q.i0[2] + dz, c);
            double v0 = values_[base], v1 = values_[base + channels_];
            gx += wy * wz * (v1 - v0);
            double vx = (1.0 - fx) * v0 + fx * v1;
            gy += sy * wz * vx;
            gz += wy * sz * vx;
        }
    }
    Vec3 g{gx * q.inv_h[0], gy * q.inv_h[1], gz * q.inv_h[2]};
    if (q.clamped[0]) g.x = 0.0;
    if (q.clamped[1]) g.y = 0.0;
    if (q.clamped[2]) g.z = 0.0;
    return g;
}

double DenseGrid3::sample_with_gradient(const GridQuery& q, Vec3* grad_out, int c) const {
    if (grad_out) *grad_out = spatial_gradient(q, c);
    return sample(q, c);
}

Vec3 DenseGrid3::sample_vec3(const GridQuery& q) const {
    assert(channels_ >= 3);
    return {sample(q, 0), sample(q, 1), sample(q, 2)};
}

void DenseGrid3::accum_value_grad(const GridQuery& q, double upstream, double* sink, int c) const {
    const double fx = q.f[0], fy = q.f[1], fz = q.f[2];
    for (int dz = 0; dz < 2; ++dz) {
        double wz = dz ? fz : 1.0 - fz;
        for (int dy = 0; dy < 2; ++dy) {
            double wyz = (dy ? fy : 1.0 - fy) * wz;
            std::size_t base = node_index(q.i0[0], q.i0[1] + dy, q.i0[2] + dz, c);
            sink[base] += upstream * wyz * (1.0 - fx);
            sink[base + channels_] += upstream * wyz * fx;
        }
    }
}

void DenseGrid3::accum_value_grad_vec3(const GridQuery& q, const Vec3& upstream, double* sink) const {
    for (int c = 0; c < 3; ++c) accum_value_grad(q, upstream[c], sink, c);
}

void DenseGrid3::accum_spatial_grad(const GridQuery& q, const Vec3& upstream, double* sink, int c) const {
    const double fx = q.f[0], fy = q.f[1], fz = q.f[2];
    double ux = q.clamped[0] ? 0.0 : upstream.x * q.inv_h[0];
    double uy = q.clamped[1] ? 0.0 : upstream.y * q.inv_h[1];
    double uz = q.clamped[2] ? 0.0 : upstream.z * q.inv_h[2];
    for (int dz = 0; dz < 2; ++dz) {
        double wz = dz ? fz : 1.0 - fz;
        double sz = dz ? 1.0 : -1.0;
        for (int dy = 0; dy < 2; ++dy) {
            double wy = dy ? fy : 1.0 - fy;
            double sy = dy ? 1.0 : -1.0;
            std::size_t base = node_index(q.i0[0], q.i0[1] + dy, q.i0[2] + dz, c);
            // gx term: d/dv0 = -wy*wz, d/dv1 = +wy*wz
            // gy term: d/dv0 = sy*wz*(1-fx), d/dv1 = sy*wz*fx
            // gz term: d/dv0 = wy*sz*(1-fx), d/dv1 = wy*sz*fx
            double lin = uy * sy * wz + uz * wy * sz;
            sink[base] += -ux * wy * wz + lin * (1.0 - fx);
            sink[base + channels_] += ux * wy * wz + lin * fx;
        }
    }
}

void DenseGrid3::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void DenseGrid3::save(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InputError("cannot open for writing: " + path);
    auto put_u32 = [&](uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        std::fwrite(b, 1, 4, f);
    };
    auto put_f32 = [&](float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(bits);
    };
    std::fwrite(kMagic, 1, 4, f);
    put_u32(kVersion);
    put_u32(static_cast<uint32_t>(nx_));
    put_u32(static_cast<uint32_t>(ny_));
    put_u32(static_cast<uint32_t>(nz_));
    put_u32(static_cast<uint32_t>(channels_));
    for (int a = 0; a < 3; ++a) put_f32(static_cast<float>(bounds_.min[a]));
    for (int a = 0; a < 3; ++a) put_f32(static_cast<float>(bounds_.max[a]));
    for (double v : values_) put_f32(static_cast<float>(v));
    std::fclose(f);
}

DenseGrid3 DenseGrid3::load(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw InputError("cannot open: " + path);
    auto get_u32 = [&]() -> uint32_t {
        unsigned char b[4];
        if (std::fread(b, 1, 4, f) != 4) {
            std::fclose(f);
            throw InputError("truncated grid file: " + path);
        }
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };
    auto get_f32 = [&]() -> float {
        uint32_t bits = get_u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    };
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        std::fclose(f);
        throw InputError("not a grid file: " + path);
    }
    uint32_t version = get_u32();
    if (version != kVersion) {
        std::fclose(f);
        throw InputError("unsupported grid version in " + path);
    }
    uint32_t nx = get_u32(), ny = get_u32(), nz = get_u32(), c = get_u32();
    if (nx < 2 || ny < 2 || nz < 2 || c < 1 || nx > 4096 || ny > 4096 || nz > 4096 || c > 16) {
        std::fclose(f);
        throw InputError("implausible grid header in " + path);
    }
    Aabb bounds;
    for (int a = 0; a < 3; ++a) bounds.min[a] = get_f32();
    for (int a = 0; a < 3; ++a) bounds.max[a] = get_f32();
    DenseGrid3 grid(static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz),
                    static_cast<int>(c), bounds);
    for (double& v : grid.values_) v = get_f32();
    std::fclose(f);
    return grid;
}

}  // namespace sdfrecon
