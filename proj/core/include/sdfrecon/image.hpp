// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sdfrecon/math.hpp"

namespace sdfrecon {

// Row-major, top-down raster with `channels` interleaved doubles per pixel.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y, int c = 0) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    Vec3 rgb(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
    void set_rgb(int x, int y, const Vec3& v) {
        at(x, y, 0) = v.x;
        at(x, y, 1) = v.y;
        at(x, y, 2) = v.z;
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // Bilinear lookup at continuous pixel coordinates, clamped to edges.
    double sample_bilinear(double x, double y, int c = 0) const;

    // Box-filter downsample by an integer factor (exact area average).
    Image downsample_area(int factor) const;

private:
    int width_ = 0, height_ = 0, channels_ = 0;
    std::vector<double> data_;
};

// 8-bit PNG; values clamped to [0,1] and quantized. 1 or 3 channels.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Float PFM (little-endian, bottom-up rows per convention). 1 or 3 channels.
void write_pfm(const std::string& path, const Image& image);
Image read_pfm(const std::string& path);

// 8-bit gray PNG storing small integer labels verbatim.
void write_label_png(const std::string& path, const std::vector<int>& labels, int width, int height);
std::vector<int> read_label_png(const std::string& path, int* width, int* height);

}  // namespace sdfrecon
