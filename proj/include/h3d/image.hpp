#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace h3d {

/// Interleaved float raster. Linear intensity, nominally in [0,1].
///
/// Two coordinate systems are used across the library:
///  - index coordinates: pixel (x, y) has its value exactly at (x, y);
///  - sensor coordinates: pixel (x, y) covers [x, x+1) x [y, y+1), centre at (x+0.5, y+0.5).
/// Lattice geometry (GridLayout) is expressed in sensor coordinates.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels = 1, float fill = 0.0f)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || channels < 1)
            throw std::invalid_argument("Image: invalid dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    float& at(int x, int y, int c = 0) {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    float at(int x, int y, int c = 0) const {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    bool contains_index(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1;
    }

    /// Bilinear sample in index coordinates. Caller guarantees contains_index(x, y).
    /// Integral positions return the stored value exactly.
    float sample(double x, double y, int c = 0) const {
        const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, width_ - 1);
        const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, height_ - 1);
        const double fx = x - x0;
        const double fy = y - y0;
        const int x1 = std::min(x0 + 1, width_ - 1);
        const int y1 = std::min(y0 + 1, height_ - 1);
        if (fx == 0.0 && fy == 0.0) return at(x0, y0, c);
        const double top = (1.0 - fx) * at(x0, y0, c) + fx * at(x1, y0, c);
        const double bot = (1.0 - fx) * at(x0, y1, c) + fx * at(x1, y1, c);
        return static_cast<float>((1.0 - fy) * top + fy * bot);
    }

    /// Bilinear sample in sensor coordinates; zero outside the raster.
    float sample_sensor(double sx, double sy, int c = 0) const {
        const double x = sx - 0.5;
        const double y = sy - 0.5;
        if (x < -0.5 || y < -0.5 || x > width_ - 0.5 || y > height_ - 0.5) return 0.0f;
        return sample(std::clamp(x, 0.0, double(width_ - 1)), std::clamp(y, 0.0, double(height_ - 1)), c);
    }

    double mean() const {
        if (data_.empty()) return 0.0;
        double s = 0.0;
        for (float v : data_) s += v;
        return s / static_cast<double>(data_.size());
    }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<float> data_;
};

/// Rec. 709 luma for RGB, pass-through for single channel.
inline Image to_gray(const Image& img) {
    if (img.channels() == 1) return img;
    Image out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (img.channels() >= 3)
                out.at(x, y) = 0.2126f * img.at(x, y, 0) + 0.7152f * img.at(x, y, 1) + 0.0722f * img.at(x, y, 2);
            else
                out.at(x, y) = img.at(x, y, 0);
        }
    return out;
}

/// 4-neighbour Laplacian at interior pixels of a single-channel raster.
inline double laplacian_at(const Image& g, int x, int y) {
    return double(g.at(x - 1, y)) + g.at(x + 1, y) + g.at(x, y - 1) + g.at(x, y + 1) - 4.0 * g.at(x, y);
}

/// Variance of the Laplacian over the region at least `margin` pixels from the border
/// (margin >= 1). Channels are averaged to luma first.
inline double variance_of_laplacian(const Image& img, int margin = 2) {
    const Image g = to_gray(img);
    margin = std::max(margin, 1);
    double s = 0.0, s2 = 0.0;
    long n = 0;
    for (int y = margin; y < g.height() - margin; ++y)
        for (int x = margin; x < g.width() - margin; ++x) {
            const double l = laplacian_at(g, x, y);
            s += l;
            s2 += l * l;
            ++n;
        }
    if (n == 0) return 0.0;
    const double m = s / n;
    return std::max(0.0, s2 / n - m * m);
}

/// Central-difference gradient magnitude (zero on the outer ring).
inline Image gradient_magnitude(const Image& img) {
    const Image g = to_gray(img);
    Image out(g.width(), g.height(), 1);
    for (int y = 1; y + 1 < g.height(); ++y)
        for (int x = 1; x + 1 < g.width(); ++x) {
            const double gx = 0.5 * (double(g.at(x + 1, y)) - g.at(x - 1, y));
            const double gy = 0.5 * (double(g.at(x, y + 1)) - g.at(x, y - 1));
            out.at(x, y) = static_cast<float>(std::hypot(gx, gy));
        }
    return out;
}

/// Normalised 1D Gaussian taps, radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) return {1.0};
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * r + 1);
    double s = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        s += k[i + r];
    }
    for (double& v : k) v /= s;
    return k;
}

/// Half-sample symmetric reflection of index i into [0, n).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

/// Separable Gaussian blur with half-sample symmetric borders, per channel.
inline Image gaussian_blur(const Image& img, double sigma) {
    const std::vector<double> k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int W = img.width(), H = img.height(), C = img.channels();
    Image tmp(W, H, C), out(W, H, C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                double s = 0.0;
                for (int i = -r; i <= r; ++i) s += k[i + r] * img.at(reflect_index(x + i, W), y, c);
                tmp.at(x, y, c) = static_cast<float>(s);
            }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c) {
                double s = 0.0;
                for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, reflect_index(y + i, H), c);
                out.at(x, y, c) = static_cast<float>(s);
            }
    return out;
}

}  // namespace h3d
