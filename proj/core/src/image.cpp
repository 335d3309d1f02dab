// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0

#include "sdfrecon/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>

#include "sdfrecon/error.hpp"

namespace sdfrecon {

double Image::sample_bilinear(double x, double y, int c) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    int x0 = std::min(static_cast<int>(x), width_ - 2 >= 0 ? width_ - 2 : 0);
    int y0 = std::min(static_cast<int>(y), height_ - 2 >= 0 ? height_ - 2 : 0);
    int x1 = std::min(x0 + 1, width_ - 1);
    int y1 = std::min(y0 + 1, height_ - 1);
    double fx = x - x0, fy = y - y0;
    return (1 - fx) * (1 - fy) * at(x0, y0, c) + fx * (1 - fy) * at(x1, y0, c) +
           (1 - fx) * fy * at(x0, y1, c) + fx * fy * at(x1, y1, c);
}

Image Image::downsample_area(int factor) const {
    if (factor < 1 || width_ % factor != 0 || height_ % factor != 0)
        throw InputError("downsample_area: size not divisible by factor");
    Image out(width_ / factor, height_ / factor, channels_);
    double inv = 1.0 / (factor * factor);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < channels_; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = acc * inv;
            }
    return out;
}

namespace {

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* file = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (file) std::fclose(file);
    }
};

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* file = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (file) std::fclose(file);
    }
};

void write_png_bytes(const std::string& path, const std::vector<unsigned char>& bytes,
                     int width, int height, int channels) {
    PngWriteCloser raii;
    raii.file = std::fopen(path.c_str(), "wb");
    if (!raii.file) throw InputError("cannot open for writing: " + path);
    raii.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!raii.png) throw InputError("png_create_write_struct failed");
    raii.info = png_create_info_struct(raii.png);
    if (!raii.info) throw InputError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(raii.png))) throw InputError("libpng write error: " + path);
    png_init_io(raii.png, raii.file);
    int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(raii.png, raii.info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(raii.png, raii.info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * width * channels);
    png_write_image(raii.png, rows.data());
    png_write_end(raii.png, nullptr);
}

std::vector<unsigned char> read_png_bytes(const std::string& path, int* width, int* height,
                                          int* channels) {
    PngReadCloser raii;
    raii.file = std::fopen(path.c_str(), "rb");
    if (!raii.file) throw InputError("cannot open: " + path);
    raii.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!raii.png) throw InputError("png_create_read_struct failed");
    raii.info = png_create_info_struct(raii.png);
    if (!raii.info) throw InputError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(raii.png))) throw InputError("libpng read error: " + path);
    png_init_io(raii.png, raii.file);
    png_read_info(raii.png, raii.info);
    png_uint_32 w = png_get_image_width(raii.png, raii.info);
    png_uint_32 h = png_get_image_height(raii.png, raii.info);
    int bit_depth = png_get_bit_depth(raii.png, raii.info);
    int color_type = png_get_color_type(raii.png, raii.info);
    if (bit_depth == 16) png_set_strip_16(raii.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(raii.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(raii.png);
    if (png_get_valid(raii.png, raii.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(raii.png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(raii.png);
    png_read_update_info(raii.png, raii.info);
    int ch = static_cast<int>(png_get_channels(raii.png, raii.info));
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * ch);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * ch;
    png_read_image(raii.png, rows.data());
    *width = static_cast<int>(w);
    *height = static_cast<int>(h);
    *channels = ch;
    return bytes;
}

}  // namespace

void write_png(const std::string& path, const Image& image) {
    if (image.channels() != 1 && image.channels() != 3)
        throw InputError("write_png: expected 1 or 3 channels");
    std::vector<unsigned char> bytes(static_cast<std::size_t>(image.width()) * image.height() *
                                     image.channels());
    std::size_t idx = 0;
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c)
                bytes[idx++] =
                    static_cast<unsigned char>(std::lround(clamp01(image.at(x, y, c)) * 255.0));
    write_png_bytes(path, bytes, image.width(), image.height(), image.channels());
}

Image read_png(const std::string& path) {
    int w, h, ch;
    std::vector<unsigned char> bytes = read_png_bytes(path, &w, &h, &ch);
    Image image(w, h, ch);
    std::size_t idx = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) image.at(x, y, c) = bytes[idx++] / 255.0;
    return image;
}

void write_label_png(const std::string& path, const std::vector<int>& labels, int width,
                     int height) {
    if (labels.size() != static_cast<std::size_t>(width) * height)
        throw InputError("write_label_png: label count does not match size");
    std::vector<unsigned char> bytes(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 255) throw InputError("write_label_png: label out of range");
        bytes[i] = static_cast<unsigned char>(labels[i]);
    }
    write_png_bytes(path, bytes, width, height, 1);
}

std::vector<int> read_label_png(const std::string& path, int* width, int* height) {
    int w, h, ch;
    std::vector<unsigned char> bytes = read_png_bytes(path, &w, &h, &ch);
    if (ch != 1) throw InputError("read_label_png: expected a gray PNG: " + path);
    std::vector<int> labels(bytes.begin(), bytes.end());
    if (width) *width = w;
    if (height) *height = h;
    return labels;
}

void write_pfm(const std::string& path, const Image& image) {
    if (image.channels() != 1 && image.channels() != 3)
        throw InputError("write_pfm: expected 1 or 3 channels");
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InputError("cannot open for writing: " + path);
    std::fprintf(f, "%s\n%d %d\n-1.0\n", image.channels() == 1 ? "Pf" : "PF", image.width(),
                 image.height());
    // PFM rows run bottom-to-top.
    for (int y = image.height() - 1; y >= 0; --y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c) {
                float v = static_cast<float>(image.at(x, y, c));
                std::fwrite(&v, 4, 1, f);
            }
    std::fclose(f);
}

Image read_pfm(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw InputError("cannot open: " + path);
    char tag[3] = {0, 0, 0};
    int w = 0, h = 0;
    double scale = 0.0;
    if (std::fscanf(f, "%2s %d %d %lf", tag, &w, &h, &scale) != 4 || w <= 0 || h <= 0) {
        std::fclose(f);
        throw InputError("bad PFM header: " + path);
    }
    std::fgetc(f);  // single whitespace after the scale
    int channels = std::strcmp(tag, "PF") == 0 ? 3 : std::strcmp(tag, "Pf") == 0 ? 1 : 0;
    if (channels == 0) {
        std::fclose(f);
        throw InputError("not a PFM file: " + path);
    }
    if (scale > 0.0) {
        std::fclose(f);
        throw InputError("big-endian PFM unsupported: " + path);
    }
    Image image(w, h, channels);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                float v;
                if (std::fread(&v, 4, 1, f) != 1) {
                    std::fclose(f);
                    throw InputError("truncated PFM: " + path);
                }
                image.at(x, y, c) = v;
            }
    std::fclose(f);
    return image;
}

}  // namespace sdfrecon
