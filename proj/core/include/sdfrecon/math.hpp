// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace sdfrecon {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double length1(const Vec3& v) { return std::abs(v.x) + std::abs(v.y) + std::abs(v.z); }
inline Vec3 normalized(const Vec3& v) {
    double len = length(v);
    return len > 0.0 ? v / len : Vec3{0.0, 0.0, 0.0};
}
inline Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
inline Vec3 cwise_abs(const Vec3& v) { return {std::abs(v.x), std::abs(v.y), std::abs(v.z)}; }
inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}
inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline double max_component(const Vec3& v) { return std::max(v.x, std::max(v.y, v.z)); }

// Row-major 3x3 matrix.
struct Mat3 {
    double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }
    static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
        Mat3 r;
        r.m[0] = c0.x; r.m[1] = c1.x; r.m[2] = c2.x;
        r.m[3] = c0.y; r.m[4] = c1.y; r.m[5] = c2.y;
        r.m[6] = c0.z; r.m[7] = c1.z; r.m[8] = c2.z;
        return r;
    }
    static Mat3 rotation_y(double angle) {
        double c = std::cos(angle), s = std::sin(angle);
        Mat3 r;
        r.m[0] = c;  r.m[1] = 0; r.m[2] = s;
        r.m[3] = 0;  r.m[4] = 1; r.m[5] = 0;
        r.m[6] = -s; r.m[7] = 0; r.m[8] = c;
        return r;
    }
    static Mat3 rotation_x(double angle) {
        double c = std::cos(angle), s = std::sin(angle);
        Mat3 r;
        r.m[0] = 1; r.m[1] = 0; r.m[2] = 0;
        r.m[3] = 0; r.m[4] = c; r.m[5] = -s;
        r.m[6] = 0; r.m[7] = s; r.m[8] = c;
        return r;
    }

    double operator()(int r, int c) const { return m[3 * r + c]; }
    double& operator()(int r, int c) { return m[3 * r + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
    // R^T v without materializing the transpose.
    Vec3 transposed_mul(const Vec3& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
                m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }
    bool is_orthonormal(double tol = 1e-6) const {
        Mat3 rtr = transposed() * (*this);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > tol) return false;
        return true;
    }
};

struct Aabb {
    Vec3 min{-1.0, -1.0, -1.0};
    Vec3 max{1.0, 1.0, 1.0};

    Vec3 extent() const { return max - min; }
    Vec3 center() const { return (min + max) * 0.5; }
    double diagonal() const { return length(max - min); }
    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    void expand(const Vec3& p) {
        min = cwise_min(min, p);
        max = cwise_max(max, p);
    }
    static Aabb empty() {
        double inf = std::numeric_limits<double>::infinity();
        return {{inf, inf, inf}, {-inf, -inf, -inf}};
    }
    // Parametric overlap of a ray with the box; false when disjoint.
    bool clip_ray(const Vec3& o, const Vec3& d, double& t0, double& t1) const {
        for (int a = 0; a < 3; ++a) {
            double inv = 1.0 / d[a];
            double tn = (min[a] - o[a]) * inv;
            double tf = (max[a] - o[a]) * inv;
            if (inv < 0.0) std::swap(tn, tf);
            t0 = std::max(t0, tn);
            t1 = std::min(t1, tf);
            if (t0 > t1) return false;
        }
        return true;
    }
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double deg_to_rad(double d) { return d * kPi / 180.0; }

}  // namespace sdfrecon
