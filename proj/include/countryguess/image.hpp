#pragma once

// Pixel containers, equirectangular panoramas, rectilinear views and the
// per-image statistics (luminance, channel histograms) the evidence modules use.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace countryguess {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;

    bool operator==(const Rgb&) const = default;
};

/// Row-major 8-bit RGB raster.
class RgbImage {
public:
    RgbImage() = default;

    RgbImage(int width, int height, Rgb fill = {}) : width_(width), height_(height) {
        if (width < 0 || height < 0) throw ArgumentError("negative image dimensions");
        pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    RgbImage(int width, int height, std::vector<Rgb> pixels) : width_(width), height_(height), pixels_(std::move(pixels)) {
        if (width < 0 || height < 0) throw ArgumentError("negative image dimensions");
        if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            throw ShapeError("pixel count does not match dimensions");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }
    std::size_t pixel_count() const noexcept { return pixels_.size(); }

    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
    const Rgb& at(int x, int y) const { return pixels_[index(x, y)]; }

    const std::vector<Rgb>& pixels() const noexcept { return pixels_; }
    std::vector<Rgb>& pixels() noexcept { return pixels_; }

    bool operator==(const RgbImage&) const = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

inline double wrap_degrees(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r < 0) r += 360.0;
    if (r >= 360.0) r -= 360.0;
    return r;
}

/// Full-sphere equirectangular image; width is twice the height.
/// `north_offset_deg` is the azimuth shift that maps absolute headings to
/// image columns. When the caller did not know it, `north_offset_known` is false
/// and the offset is 0.
class Panorama {
public:
    Panorama() = default;

    explicit Panorama(RgbImage image, std::optional<double> north_offset_deg = std::nullopt)
        : image_(std::move(image)), north_offset_deg_(north_offset_deg ? wrap_degrees(*north_offset_deg) : 0.0),
          north_offset_known_(north_offset_deg.has_value()) {
        if (image_.empty()) throw ShapeError("panorama has no pixels");
        if (image_.width() != 2 * image_.height())
            throw ShapeError("panorama must be 2:1 equirectangular, got " + std::to_string(image_.width()) + "x" +
                             std::to_string(image_.height()));
    }

    const RgbImage& image() const noexcept { return image_; }
    int width() const noexcept { return image_.width(); }
    int height() const noexcept { return image_.height(); }
    double north_offset_deg() const noexcept { return north_offset_deg_; }
    bool north_offset_known() const noexcept { return north_offset_known_; }

private:
    RgbImage image_;
    double north_offset_deg_ = 0.0;
    bool north_offset_known_ = false;
};

struct View {
    RgbImage image;
    double heading_deg = 0.0;
    double pitch_deg = 0.0;
    double fov_deg = 90.0;
};

namespace detail {
inline constexpr double deg2rad = std::numbers::pi / 180.0;
inline constexpr double rad2deg = 180.0 / std::numbers::pi;
} // namespace detail

struct RayAngles {
    double azimuth_deg;
    double elevation_deg;
};

/// Direction (azimuth clockwise from north, elevation above horizon) of the ray
/// through output pixel (px, py) of a pinhole camera. Horizontal field of view is `fov_deg`.

inline RayAngles view_ray(double heading_deg, double pitch_deg, double fov_deg, int out_width, int out_height, double px,
                          double py) {
    using namespace detail;
    const double h = heading_deg * deg2rad;
    const double p = pitch_deg * deg2rad;
    const double half = std::tan(fov_deg * deg2rad / 2.0);
    const double u = (2.0 * (px + 0.5) / out_width - 1.0) * half;
    const double v = (1.0 - 2.0 * (py + 0.5) / out_height) * half * out_height / out_width;

    // East-north-up frame.
    const double fx = std::cos(p) * std::sin(h), fy = std::cos(p) * std::cos(h), fz = std::sin(p);
    const double rx = std::cos(h), ry = -std::sin(h), rz = 0.0;
    // up = right x forward
    const double ux = ry * fz - rz * fy, uy = rz * fx - rx * fz, uz = rx * fy - ry * fx;

    double dx = fx + u * rx + v * ux;
    double dy = fy + u * ry + v * uy;
    double dz = fz + u * rz + v * uz;
    const double n = std::sqrt(dx * dx + dy * dy + dz * dz);
    dx /= n, dy /= n, dz /= n;
    return {wrap_degrees(std::atan2(dx, dy) * rad2deg), std::asin(std::clamp(dz, -1.0, 1.0)) * rad2deg};
}

/// Panorama pixel holding the given absolute direction.
inline std::pair<int, int> panorama_pixel(const Panorama& pano, double azimuth_deg, double elevation_deg) {
    const int w = pano.width(), h = pano.height();
    double col = wrap_degrees(azimuth_deg + pano.north_offset_deg()) / 360.0 * w;
    double row = (0.5 - elevation_deg / 180.0) * h;
    int x = static_cast<int>(std::floor(col)) % w;
    if (x < 0) x += w;
    int y = std::clamp(static_cast<int>(std::floor(row)), 0, h - 1);
    return {x, y};
}

inline View extract_view(const Panorama& pano, double heading_deg, double pitch_deg, double fov_deg, int out_width,
                         int out_height) {
    if (!std::isfinite(heading_deg)) throw ArgumentError("heading must be finite");
    if (!(pitch_deg >= -90.0 && pitch_deg <= 90.0)) throw ArgumentError("pitch outside [-90, 90]");
    if (!(fov_deg > 0.0 && fov_deg <= 120.0)) throw ArgumentError("fov outside (0, 120]");
    if (out_width <= 0 || out_height <= 0) throw ArgumentError("view dimensions must be positive");

    View view;
    view.heading_deg = wrap_degrees(heading_deg);
    view.pitch_deg = pitch_deg;
    view.fov_deg = fov_deg;
    view.image = RgbImage(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            auto ray = view_ray(view.heading_deg, pitch_deg, fov_deg, out_width, out_height, x, y);
            auto [px, py] = panorama_pixel(pano, ray.azimuth_deg, ray.elevation_deg);
            view.image.at(x, y) = pano.image().at(px, py);
        }
    }
    return view;
}

/// Rec.601 luma averaged over all pixels.
inline double mean_luminance(const RgbImage& img) {
    if (img.empty()) throw ArgumentError("mean_luminance of an empty image");
    double sum = 0.0;
    for (const auto& p : img.pixels()) sum += 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
    return sum / static_cast<double>(img.pixel_count());
}

inline double mean_luminance(const View& v) { return mean_luminance(v.image); }

/// Per-channel intensity frequencies; each channel sums to 1.
struct RgbHistogram {
    static constexpr int bins = 256;
    std::array<std::array<double, bins>, 3> channels{};

    bool operator==(const RgbHistogram&) const = default;
};

inline RgbHistogram channel_histogram(const RgbImage& img) {
    if (img.empty()) throw ArgumentError("channel_histogram of an empty image");
    std::array<std::array<std::uint64_t, 256>, 3> counts{};
    for (const auto& p : img.pixels()) {
        ++counts[0][p.r];
        ++counts[1][p.g];
        ++counts[2][p.b];
    }
    RgbHistogram h;
    const double n = static_cast<double>(img.pixel_count());
    for (int c = 0; c < 3; ++c)
        for (int v = 0; v < 256; ++v) h.channels[c][v] = static_cast<double>(counts[c][v]) / n;
    return h;
}

inline RgbHistogram channel_histogram(const View& v) { return channel_histogram(v.image); }
inline RgbHistogram channel_histogram(const Panorama& p) { return channel_histogram(p.image()); }

} // namespace countryguess
