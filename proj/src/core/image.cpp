#include "core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>

#include "core/error.hpp"

namespace pg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Distance from p to an arc given in canvas coordinates; angles are measured
// in the sketch frame (y up), so the canvas flip is undone here.
double arc_distance(Vec2 p, Vec2 center, double radius, double start_deg, double sweep_deg, Vec2 a, Vec2 b) {
    double ang = std::atan2(-(p.y - center.y), p.x - center.x) / kDegToRad;
    double rel = std::fmod(ang - start_deg, 360.0);
    if (rel < 0.0) rel += 360.0;
    if (rel <= sweep_deg) return std::abs(std::hypot(p.x - center.x, p.y - center.y) - radius);
    return std::min(distance(p, a), distance(p, b));
}

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};

}  // namespace

RasterImage rasterize(const Sketch& s, const RasterOptions& options) {
    require(options.width >= 16 && options.height >= 16, ErrorKind::Config, "rasterize: width and height must be >= 16");
    require(options.stroke_width > 0.0, ErrorKind::Config, "rasterize: stroke width must be positive");
    const auto box = s.bounds();
    require(!s.entities.empty() && box.max_side() > 0.0, ErrorKind::DegenerateInput,
            "rasterize: sketch has no spatial extent");

    const double w = static_cast<double>(options.width), h = static_cast<double>(options.height);
    const double half = options.stroke_width / 2.0;
    const double inset_x = kRasterMarginFraction * w + half + 0.5;
    const double inset_y = kRasterMarginFraction * h + half + 0.5;
    const double avail_w = w - 2.0 * inset_x, avail_h = h - 2.0 * inset_y;
    require(avail_w > 0.0 && avail_h > 0.0, ErrorKind::Config, "rasterize: stroke too wide for canvas");

    double scale = std::numeric_limits<double>::infinity();
    if (box.width() > 0.0) scale = std::min(scale, avail_w / box.width());
    if (box.height() > 0.0) scale = std::min(scale, avail_h / box.height());
    const double cx = (box.min_x + box.max_x) / 2.0, cy = (box.min_y + box.max_y) / 2.0;
    auto to_canvas = [&](Vec2 p) { return Vec2{w / 2.0 + (p.x - cx) * scale, h / 2.0 - (p.y - cy) * scale}; };

    std::vector<double> coverage(options.width * options.height, 0.0);
    const double reach = half + 0.5;

    for (const auto& e : s.entities) {
        Vec2 lo, hi, a, b, center;
        double radius = 0.0;
        if (e.kind == EntityKind::Line) {
            a = to_canvas(endpoint(e, End::Start));
            b = to_canvas(endpoint(e, End::End));
            lo = {std::min(a.x, b.x), std::min(a.y, b.y)};
            hi = {std::max(a.x, b.x), std::max(a.y, b.y)};
        } else {
            center = to_canvas(e.anchor);
            radius = e.size * scale;
            lo = {center.x - radius, center.y - radius};
            hi = {center.x + radius, center.y + radius};
            if (e.kind == EntityKind::Arc) {
                a = to_canvas(endpoint(e, End::Start));
                b = to_canvas(endpoint(e, End::End));
            }
        }
        const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(lo.x - reach)));
        const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(lo.y - reach)));
        const auto x1 = static_cast<std::size_t>(std::clamp(std::ceil(hi.x + reach), 0.0, w - 1.0));
        const auto y1 = static_cast<std::size_t>(std::clamp(std::ceil(hi.y + reach), 0.0, h - 1.0));

        for (std::size_t y = y0; y <= y1; ++y) {
            for (std::size_t x = x0; x <= x1; ++x) {
                const Vec2 p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
                double d = 0.0;
                switch (e.kind) {
                    case EntityKind::Line: d = segment_distance(p, a, b); break;
                    case EntityKind::Circle: d = std::abs(distance(p, center) - radius); break;
                    case EntityKind::Arc: d = arc_distance(p, center, radius, e.angle_deg, e.sweep_deg, a, b); break;
                }
                const double c = std::clamp(half + 0.5 - d, 0.0, 1.0);
                auto& slot = coverage[y * options.width + x];
                slot = std::max(slot, c);
            }
        }
    }

    RasterImage img(options.width, options.height);
    for (std::size_t i = 0; i < coverage.size(); ++i) img.pixels[i] = 1.0 - coverage[i];
    return img;
}

RasterImage quantize8(const RasterImage& img) {
    RasterImage out = img;
    for (auto& v : out.pixels) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

void write_png(const std::filesystem::path& path, const RasterImage& img) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    require(file != nullptr, ErrorKind::Io, "write_png: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::Io, "write_png: libpng initialisation failed");
    }
    std::vector<png_byte> row(img.width);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::Io, "write_png: encoding failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x)
            row[x] = static_cast<png_byte>(std::lround(std::clamp(img.at(x, y), 0.0, 1.0) * 255.0));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RasterImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
    require(file != nullptr, ErrorKind::Io, "read_png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Io, "read_png: libpng initialisation failed");
    }
    RasterImage img;
    std::vector<png_byte> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Io, "read_png: decoding failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.pixels.resize(img.width * img.height);
    row.resize(png_get_rowbytes(png, info));
    for (std::size_t y = 0; y < img.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t x = 0; x < img.width; ++x) img.at(x, y) = row[x] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace pg
