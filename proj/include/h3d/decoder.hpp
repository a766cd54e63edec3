#pragma once

// Raw holoscopic image -> viewpoint, multiview, stereo, refocused and orthoscopic products.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/capture.hpp"
#include "h3d/image.hpp"
#include "h3d/lattice.hpp"
#include "h3d/optics.hpp"

namespace h3d {

/// One sample per microimage taken at local offset (u, v).
struct ViewpointImage {
    Image pixels;
    int u = 0;
    int v = 0;
};

/// Row-major k_u x k_v views: views[n * k_u + m] has u = u0 + m * stride, v = v0 + n * stride.
struct MultiviewSet {
    std::vector<ViewpointImage> views;
    int k_u = 0;
    int k_v = 0;
    int stride = 1;

    const ViewpointImage& at(int m, int n) const { return views.at(static_cast<std::size_t>(n) * k_u + m); }
};

struct StereoPair {
    ViewpointImage left;
    ViewpointImage right;
    int baseline_samples = 0;
};

struct RefocusResult {
    Image image;
    double disparity = 0.0;
    double sharpness = 0.0;
    /// Number of views that contributed to each output pixel (row-major, cols x rows).
    std::vector<int> contributing_count;
    int aperture = 0;
};

struct SweepPoint {
    double disparity = 0.0;
    double sharpness = 0.0;
};

struct RefocusSweep {
    std::vector<SweepPoint> curve;
    RefocusResult best;
};

/// Central view index along one axis for P whole views.
inline int central_view_index(int views) { return (views - 1) / 2; }

namespace detail {

inline void require_axis_aligned(const GridLayout& g, const char* op) {
    if (!g.axis_aligned())
        throw std::invalid_argument(std::string(op) + ": grid is slanted, rectify_slant first");
}

/// First index of `k` views spaced by `stride`, centred within P views.
inline int first_view(int views, int k, int stride, const char* op) {
    if (k < 1 || stride < 1) throw std::invalid_argument(std::string(op) + ": k and stride must be >= 1");
    const int span = (k - 1) * stride;
    if (span > views - 1)
        throw std::out_of_range(std::string(op) + ": " + std::to_string(k) + " views at stride " +
                                std::to_string(stride) + " exceed microimage pitch of " + std::to_string(views) +
                                " samples");
    return (views - 1 - span) / 2;
}

}  // namespace detail

/// VPI[i, j] = raw sampled at microimage (i, j), local offset (u, v). Integer pitch on a
/// pixel-aligned lattice reads pixels exactly; otherwise bilinear.
inline ViewpointImage extract_viewpoint(const RawH3DImage& raw, const GridLayout& grid, int u, int v) {
    detail::require_axis_aligned(grid, "extract_viewpoint");
    const int P = grid.views_per_axis();
    if (u < 0 || v < 0 || u >= P || v >= P)
        throw std::out_of_range("extract_viewpoint: view index (" + std::to_string(u) + "," + std::to_string(v) +
                                ") outside [0," + std::to_string(P - 1) + "]");
    const Image& src = raw.pixels;
    ViewpointImage out;
    out.u = u;
    out.v = v;
    out.pixels = Image(grid.cols, grid.rows, src.channels());
    const double off = (grid.pitch_px - 1.0) / 2.0;
    for (int j = 0; j < grid.rows; ++j)
        for (int i = 0; i < grid.cols; ++i) {
            const Vec2 c = grid.center(i, j);
            const double sx = c.x + u - off, sy = c.y + v - off;
            for (int ch = 0; ch < src.channels(); ++ch) out.pixels.at(i, j, ch) = src.sample_sensor(sx, sy, ch);
        }
    return out;
}

/// Inverse of extraction: writes a full P x P (stride 1) view set back into microimages.
inline RawH3DImage assemble_raw(const MultiviewSet& set, const GridLayout& grid, int width, int height) {
    detail::require_axis_aligned(grid, "assemble_raw");
    if (!grid.integer_pitch()) throw std::invalid_argument("assemble_raw: integer pitch required");
    const int P = grid.views_per_axis();
    if (set.k_u != P || set.k_v != P || set.stride != 1)
        throw std::invalid_argument("assemble_raw: need the full view set at stride 1");
    grid.validate(width, height);
    const int C = set.views.front().pixels.channels();
    RawH3DImage raw;
    raw.pixels = Image(width, height, C);
    raw.grid = grid;
    const double off = (grid.pitch_px - 1.0) / 2.0;
    for (const ViewpointImage& view : set.views)
        for (int j = 0; j < grid.rows; ++j)
            for (int i = 0; i < grid.cols; ++i) {
                const Vec2 c = grid.center(i, j);
                const int x = static_cast<int>(std::lround(c.x + view.u - off - 0.5));
                const int y = static_cast<int>(std::lround(c.y + view.v - off - 0.5));
                for (int ch = 0; ch < C; ++ch) raw.pixels.at(x, y, ch) = view.pixels.at(i, j, ch);
            }
    return raw;
}

/// k_u x k_v views symmetric about the central view, spaced by `stride` samples.
inline MultiviewSet multiview_set(const RawH3DImage& raw, const GridLayout& grid, int k_u, int k_v, int stride) {
    detail::require_axis_aligned(grid, "multiview_set");
    const int P = grid.views_per_axis();
    const int u0 = detail::first_view(P, k_u, stride, "multiview_set");
    const int v0 = detail::first_view(P, k_v, stride, "multiview_set");
    MultiviewSet set;
    set.k_u = k_u;
    set.k_v = k_v;
    set.stride = stride;
    set.views.reserve(static_cast<std::size_t>(k_u) * k_v);
    for (int n = 0; n < k_v; ++n)
        for (int m = 0; m < k_u; ++m) set.views.push_back(extract_viewpoint(raw, grid, u0 + m * stride, v0 + n * stride));
    return set;
}

/// Left/right views `baseline` samples apart on the central row. A negative baseline
/// mirrors the pair.
inline StereoPair stereo_pair(const RawH3DImage& raw, const GridLayout& grid, int baseline_samples) {
    detail::require_axis_aligned(grid, "stereo_pair");
    const int P = grid.views_per_axis();
    const int b = std::abs(baseline_samples);
    if (b > P - 1)
        throw std::out_of_range("stereo_pair: baseline " + std::to_string(baseline_samples) +
                                " exceeds microimage pitch of " + std::to_string(P) + " samples");
    const int ul = (P - 1 - b) / 2;
    const int v = central_view_index(P);
    StereoPair pair;
    pair.baseline_samples = baseline_samples;
    pair.left = extract_viewpoint(raw, grid, ul, v);
    pair.right = extract_viewpoint(raw, grid, ul + b, v);
    if (baseline_samples < 0) std::swap(pair.left, pair.right);
    return pair;
}

/// Shift-and-sum over the central k x k views:
/// F[i, j] = mean over views of VPI(u, v)[i + d (u - u_bar), j + d (v - v_bar)].
/// Samples falling outside a view are skipped and each pixel is divided by its own
/// contributor count.
inline RefocusResult refocus(const RawH3DImage& raw, const GridLayout& grid, double disparity, int aperture) {
    const MultiviewSet set = multiview_set(raw, grid, aperture, aperture, 1);
    const int cols = grid.cols, rows = grid.rows, C = raw.pixels.channels();
    const double ubar = set.at(0, 0).u + (aperture - 1) / 2.0;
    const double vbar = set.at(0, 0).v + (aperture - 1) / 2.0;

    std::vector<double> acc(static_cast<std::size_t>(cols) * rows * C, 0.0);
    RefocusResult res;
    res.disparity = disparity;
    res.aperture = aperture;
    res.contributing_count.assign(static_cast<std::size_t>(cols) * rows, 0);
    for (const ViewpointImage& view : set.views) {
        const double dx = disparity * (view.u - ubar), dy = disparity * (view.v - vbar);
        for (int j = 0; j < rows; ++j)
            for (int i = 0; i < cols; ++i) {
                const double x = i + dx, y = j + dy;
                if (!view.pixels.contains_index(x, y)) continue;
                const std::size_t idx = static_cast<std::size_t>(j) * cols + i;
                ++res.contributing_count[idx];
                for (int ch = 0; ch < C; ++ch) acc[idx * C + ch] += view.pixels.sample(x, y, ch);
            }
    }
    res.image = Image(cols, rows, C);
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < cols; ++i) {
            const std::size_t idx = static_cast<std::size_t>(j) * cols + i;
            const int n = res.contributing_count[idx];
            for (int ch = 0; ch < C; ++ch)
                res.image.at(i, j, ch) = n > 0 ? static_cast<float>(acc[idx * C + ch] / n) : 0.0f;
        }
    res.sharpness = variance_of_laplacian(res.image, 2);
    return res;
}

/// Sharpness over d in [d_min, d_max] with the given step. The best result maximises
/// sharpness; exact ties go to the smallest |d|.
inline RefocusSweep refocus_sweep(const RawH3DImage& raw, const GridLayout& grid, double d_min, double d_max,
                                  double step, int aperture) {
    if (!(step > 0.0) || !(d_max >= d_min)) throw std::invalid_argument("refocus_sweep: invalid range");
    RefocusSweep sweep;
    bool have = false;
    const int n = static_cast<int>(std::floor((d_max - d_min) / step + 1e-9));
    for (int k = 0; k <= n; ++k) {
        const double d = d_min + k * step;
        RefocusResult r = refocus(raw, grid, d, aperture);
        sweep.curve.push_back({d, r.sharpness});
        if (!have || r.sharpness > sweep.best.sharpness ||
            (r.sharpness == sweep.best.sharpness && std::abs(d) < std::abs(sweep.best.disparity))) {
            sweep.best = std::move(r);
            have = true;
        }
    }
    return sweep;
}

/// Rotates the raster by -slant about the sensor centre (bilinear) so the lattice becomes
/// axis-aligned. Uses the grid metadata, or estimates the lattice when none is attached.
inline RawH3DImage rectify_slant(const RawH3DImage& raw) {
    const GridLayout grid = raw.grid ? *raw.grid : estimate_grid(raw.pixels);
    if (!(std::abs(grid.slant_deg) <= kMaxSlantDeg)) throw std::invalid_argument("rectify_slant: |slant| > 15 deg");
    RawH3DImage out = raw;
    out.grid = grid;
    if (grid.slant_deg == 0.0) return out;
    const Image& src = raw.pixels;
    const int W = src.width(), H = src.height(), C = src.channels();
    const Vec2 sc{W / 2.0, H / 2.0};
    const double a = deg_to_rad(grid.slant_deg);
    Image dst(W, H, C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const Vec2 s = sc + rotate(Vec2{x + 0.5, y + 0.5} - sc, a);
            for (int c = 0; c < C; ++c) dst.at(x, y, c) = src.sample_sensor(s.x, s.y, c);
        }
    GridLayout g = grid;
    const Vec2 o = sc + rotate(Vec2{grid.origin_x_px, grid.origin_y_px} - sc, -a);
    g.slant_deg = 0.0;
    g.origin_x_px = o.x;
    g.origin_y_px = o.y;
    out.pixels = std::move(dst);
    out.grid = g;
    return out;
}

/// Resamples an axis-aligned lattice of fractional pitch onto round(pitch) pixels per
/// microimage; the output raster is exactly cols*P x rows*P.
inline RawH3DImage resample_to_integer_pitch(const RawH3DImage& raw, const GridLayout& grid) {
    detail::require_axis_aligned(grid, "resample_to_integer_pitch");
    const int P = static_cast<int>(std::lround(grid.pitch_px));
    if (P < 1) throw std::invalid_argument("resample_to_integer_pitch: pitch too small");
    const int W = grid.cols * P, H = grid.rows * P, C = raw.pixels.channels();
    RawH3DImage out = raw;
    out.pixels = Image(W, H, C);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const Vec2 s = grid.center((x + 0.5) / P - 0.5, (y + 0.5) / P - 0.5);
            for (int c = 0; c < C; ++c) out.pixels.at(x, y, c) = raw.pixels.sample_sensor(s.x, s.y, c);
        }
    GridLayout g = grid;
    g.pitch_px = P;
    g.origin_x_px = P / 2.0;
    g.origin_y_px = P / 2.0;
    out.grid = g;
    return out;
}

/// Pseudoscopic -> orthoscopic: every microimage rotated 180 degrees about its centre,
/// (u, v) -> (P-1-u, P-1-v). The grid's orthoscopic flag is toggled, so the map is an
/// involution on both pixels and metadata.
inline RawH3DImage orthoscopic_correct(const RawH3DImage& raw, const GridLayout& grid) {
    RawH3DImage src = raw;
    GridLayout g = grid;
    if (!g.axis_aligned()) {
        src.grid = g;
        src = rectify_slant(src);
        g = *src.grid;
    }
    if (!tile_aligned(g)) {
        src = resample_to_integer_pitch(src, g);
        g = *src.grid;
    }
    const int P = static_cast<int>(g.pitch_px);
    const int x0 = static_cast<int>(std::lround(g.origin_x_px - P / 2.0));
    const int y0 = static_cast<int>(std::lround(g.origin_y_px - P / 2.0));
    RawH3DImage out = src;
    const int C = src.pixels.channels();
    for (int j = 0; j < g.rows; ++j)
        for (int i = 0; i < g.cols; ++i) {
            const int bx = x0 + i * P, by = y0 + j * P;
            for (int v = 0; v < P; ++v)
                for (int u = 0; u < P; ++u)
                    for (int c = 0; c < C; ++c)
                        out.pixels.at(bx + u, by + v, c) = src.pixels.at(bx + P - 1 - u, by + P - 1 - v, c);
        }
    g.orthoscopic = !g.orthoscopic;
    out.grid = g;
    return out;
}

}  // namespace h3d
