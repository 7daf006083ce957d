#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "core/sketch.hpp"

namespace pg {

// Grayscale image, row-major, values in [0,1] with 1.0 = white.
struct RasterImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    RasterImage() = default;
    RasterImage(std::size_t w, std::size_t h, double fill = 1.0) : width(w), height(h), pixels(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

struct RasterOptions {
    std::size_t width = 56;
    std::size_t height = 56;
    double stroke_width = 3.0;
};

constexpr double kRasterMarginFraction = 0.05;

// Fits the sketch uniformly into the canvas with a 5% margin (widened by the
// stroke half-width plus the anti-aliasing band so no stroke reaches the
// border) and draws coverage-shaded black strokes on white.
RasterImage rasterize(const Sketch& s, const RasterOptions& options = {});

// 8-bit grayscale PNG; 255 = white.
void write_png(const std::filesystem::path& path, const RasterImage& img);
RasterImage read_png(const std::filesystem::path& path);

// Rounds every pixel to the nearest 8-bit level, as a PNG round trip would.
RasterImage quantize8(const RasterImage& img);

}  // namespace pg
