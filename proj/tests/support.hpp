#pragma once

// Shared scenes and independent measurement oracles for the test suites.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "h3d/capture.hpp"
#include "h3d/io.hpp"
#include "h3d/optics.hpp"
#include "h3d/scene.hpp"

namespace h3d::test {

inline fs::path data_dir() { return fs::path(H3D_DATA_DIR); }

/// Small bright sphere on black, dz_cm behind the focused plane.
inline Scene point_scene(double dz_cm, double radius_cm = 0.2, double x_cm = 0.0) {
    Scene s;
    s.label = "point";
    s.background_albedo = 0.0;
    Primitive sp;
    sp.kind = PrimitiveKind::sphere;
    sp.dims_cm = {radius_cm, 0.0, 0.0};
    sp.pose.position_cm = {x_cm, 0.0, dz_cm};
    sp.albedo = 1.0;
    s.primitives.push_back(sp);
    return s;
}

/// Disparity predicted for a point dz_cm behind the focused plane.
inline double predicted_disparity(const CameraRig& rig, double distance_cm, double dz_cm) {
    const ImagingGeometry geo(rig, distance_cm * 10.0);
    return expected_disparity(rig.mla, rig.sensor, geo.intermediate_distance_um((distance_cm + dz_cm) * 10.0));
}

/// Intensity centroid (x, local microimage px) of every microimage on lenslet row j whose
/// spot is fully inside the footprint; NaN elsewhere. Needs a tile-aligned grid.
inline std::vector<double> row_centroids(const RawH3DImage& raw, int j, double min_mass = 0.01) {
    const GridLayout& g = *raw.grid;
    const int p = static_cast<int>(g.pitch_px);
    const int x0 = static_cast<int>(std::lround(g.origin_x_px - p / 2.0));
    const int y0 = static_cast<int>(std::lround(g.origin_y_px - p / 2.0));
    std::vector<double> cx(static_cast<std::size_t>(g.cols), NAN);
    for (int i = 0; i < g.cols; ++i) {
        double m = 0.0, mx = 0.0;
        bool border = false;
        for (int v = 0; v < p; ++v)
            for (int u = 0; u < p; ++u) {
                const double val = raw.pixels.at(x0 + i * p + u, y0 + j * p + v);
                m += val;
                mx += val * u;
                if ((u == 0 || v == 0 || u == p - 1 || v == p - 1) && val > 0.0) border = true;
            }
        if (m > min_mass && !border) cx[static_cast<std::size_t>(i)] = mx / m;
    }
    return cx;
}

struct ShiftStats {
    int pairs = 0;
    double max_error = 0.0;
    double mean_shift = 0.0;
};

/// Adjacent-microimage centroid shifts on the rows around the centre compared with `expected`.
inline ShiftStats centroid_shifts(const RawH3DImage& raw, double expected) {
    ShiftStats st;
    double sum = 0.0;
    const int jc = raw.grid->rows / 2;
    for (int j = jc - 1; j <= jc + 1; ++j) {
        const std::vector<double> cx = row_centroids(raw, j);
        for (std::size_t i = 0; i + 1 < cx.size(); ++i) {
            if (std::isnan(cx[i]) || std::isnan(cx[i + 1])) continue;
            const double s = cx[i + 1] - cx[i];
            st.max_error = std::max(st.max_error, std::abs(s - expected));
            sum += s;
            ++st.pairs;
        }
    }
    if (st.pairs) st.mean_shift = sum / st.pairs;
    return st;
}

/// Lenslet-space spot centroid (x) of a viewpoint image.
inline double vpi_centroid_x(const Image& img) {
    double m = 0.0, mx = 0.0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            m += img.at(x, y);
            mx += img.at(x, y) * x;
        }
    return m > 0.0 ? mx / m : NAN;
}

/// Random-noise texture plane filling the view at dz_cm behind the focused plane.
inline Scene textured_plane(double dz_cm, std::uint64_t seed, double size_cm = 40.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto tex = std::make_shared<Image>(256, 256, 1);
    for (float& v : tex->data()) v = static_cast<float>(0.15 + 0.7 * u(rng));
    Scene s;
    s.background_albedo = 0.3;
    Primitive pl;
    pl.kind = PrimitiveKind::plane;
    pl.dims_cm = {size_cm, size_cm, 0.0};
    pl.pose.position_cm = {0.0, 0.0, dz_cm};
    pl.albedo = RasterTexture{tex, ""};
    s.primitives.push_back(pl);
    return s;
}

/// Rig with a square lattice of the given pitch (px) and slant filling a square sensor.
inline CameraRig lattice_rig(double pitch_px, double slant_deg, int sensor_px) {
    CameraRig rig;
    rig.sensor.width_px = rig.sensor.height_px = sensor_px;
    rig.mla.lenslet_pitch_um = pitch_px * rig.sensor.pixel_pitch_um;
    rig.mla.slant_deg = slant_deg;
    const double a = deg_to_rad(slant_deg);
    const int n = static_cast<int>(sensor_px / (pitch_px * (std::cos(a) + std::abs(std::sin(a))))) - 1;
    rig.mla.cols = rig.mla.rows = n;
    return rig;
}

/// One statuette variant of the paired sharp/blurred corpus (distinct from the calibration
/// corpus in data/detail_corpus.json).
struct StatuetteCase {
    Scene scene;
    CaptureParams params;
};

inline StatuetteCase paired_case(int k, int supersampling = 2) {
    StatuetteCase c;
    c.scene = statuette_scene();
    Primitive& b = c.scene.primitives[0];
    b.pose.rotation_deg = {-40.0 + k * 4.5, (k % 3 - 1) * 8.0, (k % 5 - 2) * 3.0};
    b.albedo = Checkerboard{0.45 + 0.03 * (k % 7), 0.2 + 0.02 * (k % 4), 0.8 + 0.02 * (k % 3)};
    c.params.distance_cm = 66.0 + (k % 4) * 2.0;
    c.params.supersampling = supersampling;
    return c;
}

}  // namespace h3d::test
