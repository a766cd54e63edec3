#pragma once

// Synthetic holoscopic capture: every lenslet is a pinhole looking at the intermediate image
// formed by the objective/relay, and its view lands in that lenslet's microimage footprint.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/image.hpp"
#include "h3d/object.hpp"
#include "h3d/optics.hpp"
#include "h3d/parallel.hpp"
#include "h3d/scene.hpp"

namespace h3d {

struct CaptureParams {
    double iso = 400.0;
    double exposure_s = 1.0 / 30.0;
    double distance_cm = 70.0;
    double illuminance_lux = 150.0;
    std::uint64_t noise_seed = 0;
    bool noise_enabled = false;
    /// Noise standard deviation at ISO 400 for unit signal.
    double noise_sigma0 = 0.01;
    bool vignetting = true;
    /// Regular sub-samples per pixel axis.
    int supersampling = 4;

    void validate() const {
        if (!(iso > 0.0)) throw std::invalid_argument("CaptureParams: iso must be > 0");
        if (!(exposure_s > 0.0)) throw std::invalid_argument("CaptureParams: exposure_s must be > 0");
        if (!(distance_cm > 0.0)) throw std::invalid_argument("CaptureParams: distance_cm must be > 0");
        if (!(illuminance_lux >= 0.0)) throw std::invalid_argument("CaptureParams: illuminance_lux must be >= 0");
        if (!(noise_sigma0 >= 0.0)) throw std::invalid_argument("CaptureParams: noise_sigma0 must be >= 0");
        if (supersampling < 1 || supersampling > 16)
            throw std::invalid_argument("CaptureParams: supersampling must be in [1, 16]");
    }
    bool operator==(const CaptureParams&) const = default;
};

/// Raw sensor raster plus whatever capture metadata is known. Images loaded without a
/// sidecar carry no grid; decoders then fall back to estimate_grid.
struct RawH3DImage {
    Image pixels;
    std::optional<GridLayout> grid;
    std::optional<CameraRig> rig;
    std::optional<CaptureParams> params;
    std::string scene_label;
    std::uint64_t seed = 0;
};

/// Exposure calibration constant: the reference configuration (150 lux, 1/30 s, ISO 400,
/// f/2.8) maps albedo 0.5 to pixel value 0.5, i.e. K * 150 * (1/30) * 400 / 2.8^2 = 1.
inline constexpr double kExposureCalibration = (2.8 * 2.8) / (150.0 * (1.0 / 30.0) * 400.0);

/// Linear gain applied to surface albedo.
inline double exposure_value(double illuminance_lux, double iso, double exposure_s, double fnumber) {
    if (!(illuminance_lux > 0.0) || !(iso > 0.0) || !(exposure_s > 0.0) || !(fnumber > 0.0))
        throw std::invalid_argument("exposure_value: all inputs must be > 0");
    return kExposureCalibration * illuminance_lux * exposure_s * iso / (fnumber * fnumber);
}

/// Microimage falloff at a local offset (pixels, lattice frame, from the microimage centre).
///
/// The chief-ray tangent grows linearly with the offset and reaches tan(corner_deg) at the
/// microimage corner. A circular stop follows cos^4 of the full angle; the square stop
/// matched to the square lenslet falls off per axis, cos^2(theta_x) * cos^2(theta_y).
inline double vignette_factor(double pitch_px, Vec2 local_px, ApertureShape aperture, double corner_deg) {
    const double half_diag = pitch_px / std::numbers::sqrt2;
    const double k = std::tan(deg_to_rad(corner_deg)) / half_diag;
    const double tx = local_px.x * k, ty = local_px.y * k;
    if (aperture == ApertureShape::circular) {
        const double c2 = 1.0 / (1.0 + tx * tx + ty * ty);
        return c2 * c2;
    }
    return 1.0 / ((1.0 + tx * tx) * (1.0 + ty * ty));
}

/// Lattice-checked form: the lenslet index must lie inside the grid.
inline double vignette_factor(const GridLayout& grid, int i, int j, Vec2 local_px, ApertureShape aperture,
                              double corner_deg) {
    if (i < 0 || j < 0 || i >= grid.cols || j >= grid.rows)
        throw std::out_of_range("vignette_factor: lenslet index outside grid");
    return vignette_factor(grid.pitch_px, local_px, aperture, corner_deg);
}

namespace detail {

/// Casts lines of sight from the lens into the scene.
class SceneTracer {
public:
    SceneTracer(const Scene& scene, double distance_cm) : scene_(scene), distance_cm_(distance_cm) {
        placed_.reserve(scene.primitives.size());
        for (const Primitive& p : scene.primitives) placed_.emplace_back(p);
    }

    /// Line through two camera-frame object points (mm); returns the visible surface.
    std::optional<SurfaceHit> trace(const std::array<double, 3>& a, const std::array<double, 3>& b,
                                    bool assets_only = false) const {
        Vec3 dir{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
        if (dir[2] < 0.0) dir = dir * -1.0;
        if (dir[2] == 0.0) return std::nullopt;
        // start where the line crosses the lens plane (z = 0) and walk outwards
        const double t0 = -a[2] / dir[2];
        const Vec3 start_mm{a[0] + t0 * dir[0], a[1] + t0 * dir[1], 0.0};
        const Vec3 origin{start_mm[0] / 10.0, start_mm[1] / 10.0, -distance_cm_};
        const Vec3 d = dir * 0.1;
        std::optional<SurfaceHit> best;
        for (const PlacedPrimitive& p : placed_) {
            if (assets_only && !p.primitive().asset) continue;
            auto h = p.intersect(origin, d, 0.0);
            if (h && (!best || h->t < best->t)) best = h;
        }
        return best;
    }

private:
    const Scene& scene_;
    double distance_cm_;
    std::vector<PlacedPrimitive> placed_;
};

/// Object-space line of sight for sensor point `s` behind lenslet centre `c` (sensor px).
inline std::pair<std::array<double, 3>, std::array<double, 3>> line_of_sight(const ImagingGeometry& geo,
                                                                             const CameraRig& rig, Vec2 c,
                                                                             Vec2 s) {
    const double pix_mm = rig.sensor.pixel_pitch_um * 1e-3;
    const Vec2 sc{rig.sensor.width_px / 2.0, rig.sensor.height_px / 2.0};
    const Vec2 cm = (c - sc) * pix_mm;
    const Vec2 sm = (s - sc) * pix_mm;
    const double a = geo.focus_offset_mm();
    const Vec2 far_lateral = cm + (cm - sm) * (a / geo.gap_mm());
    return {geo.to_object(cm, geo.mla_distance_mm()), geo.to_object(far_lateral, geo.mla_distance_mm() - a)};
}

}  // namespace detail

/// Renders the raw holoscopic image of `scene` through `rig`. Deterministic for a given
/// (scene, rig, params); noise, when enabled, is drawn sequentially from noise_seed.
inline RawH3DImage render_raw(const Scene& scene, const CameraRig& rig, const CaptureParams& params) {
    rig.validate();
    params.validate();
    const GridLayout grid = build_grid(rig);
    const ImagingGeometry geo(rig, params.distance_cm * 10.0);
    validate_scene(scene, params.distance_cm, rig.effective_focal_mm() / 10.0);

    const double gain = params.illuminance_lux > 0.0
                            ? exposure_value(params.illuminance_lux, params.iso, params.exposure_s, rig.relay_fnumber)
                            : 0.0;
    const int channels = channel_count(rig.sensor.channels);
    const int W = rig.sensor.width_px, H = rig.sensor.height_px;
    const int ss = params.supersampling;
    const detail::SceneTracer tracer(scene, params.distance_cm);
    const float bg = static_cast<float>(scene.background_albedo);

    Image img(W, H, channels);
    parallel_for(H, [&](int y) {
        for (int x = 0; x < W; ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    const Vec2 s{x + (sx + 0.5) / ss, y + (sy + 0.5) / ss};
                    const Vec2 lc = grid.lattice_coords(s);
                    const int i = static_cast<int>(std::lround(lc.x));
                    const int j = static_cast<int>(std::lround(lc.y));
                    if (i < 0 || j < 0 || i >= grid.cols || j >= grid.rows) continue;
                    const auto [o1, o2] = detail::line_of_sight(geo, rig, grid.center(i, j), s);
                    const auto hit = tracer.trace(o1, o2);
                    Rgb alb = hit ? evaluate_albedo(*hit) : Rgb{bg, bg, bg};
                    double v = gain;
                    if (params.vignetting) {
                        const Vec2 local{(lc.x - i) * grid.pitch_px, (lc.y - j) * grid.pitch_px};
                        v *= vignette_factor(grid.pitch_px, local, rig.aperture, rig.vignette_corner_deg);
                    }
                    if (channels == 1)
                        acc[0] += v * (0.2126 * alb[0] + 0.7152 * alb[1] + 0.0722 * alb[2]);
                    else
                        for (int c = 0; c < 3; ++c) acc[c] += v * alb[c];
                }
            for (int c = 0; c < channels; ++c) img.at(x, y, c) = static_cast<float>(acc[c] / (ss * ss));
        }
    });

    if (params.noise_enabled && params.noise_sigma0 > 0.0) {
        std::mt19937_64 rng(params.noise_seed);
        std::normal_distribution<double> n01(0.0, 1.0);
        const double scale = params.noise_sigma0 * (params.iso / 400.0);
        for (float& v : img.data()) v = static_cast<float>(v + scale * std::sqrt(std::max(0.0f, v)) * n01(rng));
    }
    for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);

    RawH3DImage raw;
    raw.pixels = std::move(img);
    raw.grid = grid;
    raw.rig = rig;
    raw.params = params;
    raw.scene_label = scene.label;
    raw.seed = params.noise_seed;
    return raw;
}

/// Which lenslets' central lines of sight hit an asset primitive, on a canvas spanning
/// three frames per axis (one frame of virtual lenslets on every side).
inline ObjectMask project_object_mask(const Scene& scene, const CameraRig& rig, const CaptureParams& params) {
    rig.validate();
    const GridLayout grid = build_grid(rig);
    const ImagingGeometry geo(rig, params.distance_cm * 10.0);
    const detail::SceneTracer tracer(scene, params.distance_cm);
    ObjectMask m;
    m.origin_i = -grid.cols;
    m.origin_j = -grid.rows;
    m.width = 3 * grid.cols;
    m.height = 3 * grid.rows;
    m.frame_cols = grid.cols;
    m.frame_rows = grid.rows;
    m.cells.assign(static_cast<std::size_t>(m.width) * m.height, 0);
    for (int j = 0; j < m.height; ++j)
        for (int i = 0; i < m.width; ++i) {
            const Vec2 c = grid.center(i + m.origin_i, j + m.origin_j);
            const auto [o1, o2] = detail::line_of_sight(geo, rig, c, c);
            m.set(i, j, tracer.trace(o1, o2, true).has_value());
        }
    return m;
}

/// Microimage pixel runs for exact tile processing: true when every microimage covers a
/// whole p x p block of pixels.
inline bool tile_aligned(const GridLayout& g) {
    if (!g.axis_aligned() || !g.integer_pitch()) return false;
    const double x0 = g.origin_x_px - g.pitch_px / 2.0, y0 = g.origin_y_px - g.pitch_px / 2.0;
    return x0 == std::round(x0) && y0 == std::round(y0);
}

/// Per-microimage Gaussian blur (reflect padding at microimage borders), mimicking a
/// miscalibrated MLA gap. sigma 0 returns the input unchanged.
inline RawH3DImage defocus_blur(const RawH3DImage& raw, double blur_sigma_px) {
    if (!(blur_sigma_px >= 0.0)) throw std::invalid_argument("defocus_blur: sigma must be >= 0");
    if (!raw.grid) throw std::invalid_argument("defocus_blur: grid metadata required");
    if (blur_sigma_px == 0.0) return raw;
    const GridLayout& g = *raw.grid;
    const Image& src = raw.pixels;
    const std::vector<double> k = gaussian_kernel(blur_sigma_px);
    const int r = static_cast<int>(k.size() / 2);
    RawH3DImage out = raw;
    Image& dst = out.pixels;
    const int C = src.channels();

    if (tile_aligned(g)) {
        const int p = static_cast<int>(g.pitch_px);
        const int x0 = static_cast<int>(std::lround(g.origin_x_px - p / 2.0));
        const int y0 = static_cast<int>(std::lround(g.origin_y_px - p / 2.0));
        std::vector<double> tmp(static_cast<std::size_t>(p) * p);
        for (int j = 0; j < g.rows; ++j)
            for (int i = 0; i < g.cols; ++i)
                for (int c = 0; c < C; ++c) {
                    const int bx = x0 + i * p, by = y0 + j * p;
                    for (int v = 0; v < p; ++v)
                        for (int u = 0; u < p; ++u) {
                            double s = 0.0;
                            for (int t = -r; t <= r; ++t) s += k[t + r] * src.at(bx + reflect_index(u + t, p), by + v, c);
                            tmp[v * p + u] = s;
                        }
                    for (int v = 0; v < p; ++v)
                        for (int u = 0; u < p; ++u) {
                            double s = 0.0;
                            for (int t = -r; t <= r; ++t) s += k[t + r] * tmp[reflect_index(v + t, p) * p + u];
                            dst.at(bx + u, by + v, c) = static_cast<float>(s);
                        }
                }
        return out;
    }

    // General lattice: normalised convolution restricted to pixels of the same microimage.
    const int W = src.width(), H = src.height();
    std::vector<int> owner(static_cast<std::size_t>(W) * H, -1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const Vec2 lc = g.lattice_coords({x + 0.5, y + 0.5});
            const int i = static_cast<int>(std::lround(lc.x)), j = static_cast<int>(std::lround(lc.y));
            if (i >= 0 && j >= 0 && i < g.cols && j < g.rows) owner[static_cast<std::size_t>(y) * W + x] = j * g.cols + i;
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int id = owner[static_cast<std::size_t>(y) * W + x];
            if (id < 0) continue;
            for (int c = 0; c < C; ++c) {
                double s = 0.0, w = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= W || yy >= H) continue;
                        if (owner[static_cast<std::size_t>(yy) * W + xx] != id) continue;
                        const double kw = k[dx + r] * k[dy + r];
                        s += kw * src.at(xx, yy, c);
                        w += kw;
                    }
                dst.at(x, y, c) = static_cast<float>(s / w);
            }
        }
    return out;
}

}  // namespace h3d
