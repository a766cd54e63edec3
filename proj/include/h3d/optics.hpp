#pragma once

// Optical system description and the geometric laws shared by the simulator and decoder.
//
// Sign conventions (used everywhere in the library):
//  - sensor x grows to the right, y grows downwards; object-space X/Y follow the same axes;
//  - lenslet index i grows with x, j grows with y;
//  - disparity D > 0 means a feature sits further in +x inside the microimage to the right
//    (i+1) than inside microimage i; the same holds for +y and j+1;
//  - view index (u, v) is the local pixel offset inside a microimage, so a feature with
//    microimage disparity D moves by +1/D lenslets between VPI(u, v) and VPI(u+1, v).

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "h3d/error.hpp"

namespace h3d {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::hypot(x, y); }
    bool operator==(const Vec2&) const = default;
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline Vec2 rotate(Vec2 v, double angle_rad) {
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

enum class LensletShape { square };
enum class ChannelLayout { gray, rgb };
enum class ApertureShape { circular, square };

inline int channel_count(ChannelLayout c) { return c == ChannelLayout::rgb ? 3 : 1; }

/// Largest slant accepted anywhere in the library.
inline constexpr double kMaxSlantDeg = 15.0;

struct MlaSpec {
    double lenslet_pitch_um = 250.0;
    LensletShape lenslet_shape = LensletShape::square;
    double slant_deg = 0.0;
    int cols = 100;
    int rows = 100;
    double gap_um = 1000.0;  // MLA plane to sensor

    void validate() const {
        if (!(lenslet_pitch_um > 0.0)) throw std::invalid_argument("MlaSpec: lenslet_pitch_um must be > 0");
        if (!(gap_um > 0.0)) throw std::invalid_argument("MlaSpec: gap_um must be > 0");
        if (cols < 2 || rows < 2) throw std::invalid_argument("MlaSpec: need at least 2x2 lenslets");
        if (!(std::abs(slant_deg) <= kMaxSlantDeg))
            throw std::invalid_argument("MlaSpec: |slant_deg| must be <= 15");
    }
    bool operator==(const MlaSpec&) const = default;
};

struct SensorSpec {
    int width_px = 1000;
    int height_px = 1000;
    double pixel_pitch_um = 25.0;
    ChannelLayout channels = ChannelLayout::gray;

    double width_mm() const { return width_px * pixel_pitch_um * 1e-3; }
    double height_mm() const { return height_px * pixel_pitch_um * 1e-3; }

    void validate() const {
        if (width_px <= 0 || height_px <= 0) throw std::invalid_argument("SensorSpec: dimensions must be > 0");
        if (!(pixel_pitch_um > 0.0)) throw std::invalid_argument("SensorSpec: pixel_pitch_um must be > 0");
    }
    bool operator==(const SensorSpec&) const = default;
};

/// Effective-focal-length multiplier for the objective + relay chain. Fitted so that an
/// 11 x 5 x 3 cm asset first fits the default sensor with 5 % margins at 70 cm; see
/// planner.hpp (calibrate_relay_scale) for the fit.
inline constexpr double kDefaultRelayScale = 2.197718479242423;

struct CameraRig {
    double prime_focal_mm = 50.0;
    double prime_fnumber = 1.4;
    double relay_fnumber = 2.8;
    double relay_scale = kDefaultRelayScale;
    /// Distance from the MLA plane to the intermediate image of the focused plane.
    double focus_offset_um = 10000.0;
    ApertureShape aperture = ApertureShape::square;
    /// Chief-ray angle at a microimage corner used by the vignetting model.
    double vignette_corner_deg = 20.0;
    MlaSpec mla;
    SensorSpec sensor;

    double effective_focal_mm() const { return relay_scale * prime_focal_mm; }
    double microimage_pitch_px() const { return mla.lenslet_pitch_um / sensor.pixel_pitch_um; }

    void validate() const {
        mla.validate();
        sensor.validate();
        if (!(prime_focal_mm > 0.0)) throw std::invalid_argument("CameraRig: prime_focal_mm must be > 0");
        if (!(prime_fnumber > 0.0) || !(relay_fnumber > 0.0))
            throw std::invalid_argument("CameraRig: f-numbers must be > 0");
        if (!(relay_scale > 0.0)) throw std::invalid_argument("CameraRig: relay_scale must be > 0");
        if (!(focus_offset_um != 0.0) || !std::isfinite(focus_offset_um))
            throw std::invalid_argument("CameraRig: focus_offset_um must be finite and non-zero");
        if (!(vignette_corner_deg >= 0.0 && vignette_corner_deg < 60.0))
            throw std::invalid_argument("CameraRig: vignette_corner_deg must be in [0, 60)");
        if (microimage_pitch_px() < 3.0)
            throw std::invalid_argument("CameraRig: microimage pitch must be >= 3 px");
        if (mla.cols * mla.lenslet_pitch_um > sensor.width_px * sensor.pixel_pitch_um + 1e-9 ||
            mla.rows * mla.lenslet_pitch_um > sensor.height_px * sensor.pixel_pitch_um + 1e-9)
            throw std::invalid_argument("CameraRig: MLA footprint exceeds sensor area");
    }
    bool operator==(const CameraRig&) const = default;
};

/// Microimage lattice on the sensor, in sensor coordinates (pixel k spans [k, k+1)).
/// center(i, j) = origin + R(slant) * (i * pitch, j * pitch).
struct GridLayout {
    double pitch_px = 10.0;
    double slant_deg = 0.0;
    double origin_x_px = 5.0;
    double origin_y_px = 5.0;
    int cols = 0;
    int rows = 0;
    bool orthoscopic = false;

    Vec2 center(double i, double j) const {
        return Vec2{origin_x_px, origin_y_px} + rotate({i * pitch_px, j * pitch_px}, deg_to_rad(slant_deg));
    }
    /// Fractional lattice coordinates of a sensor point (inverse of center()).
    Vec2 lattice_coords(Vec2 p) const {
        const Vec2 q = rotate(p - Vec2{origin_x_px, origin_y_px}, -deg_to_rad(slant_deg));
        return {q.x / pitch_px, q.y / pitch_px};
    }
    bool axis_aligned() const { return slant_deg == 0.0; }
    bool integer_pitch() const { return pitch_px == std::round(pitch_px); }
    /// Number of whole view indices per axis.
    int views_per_axis() const { return static_cast<int>(std::floor(pitch_px + 1e-9)); }

    std::array<Vec2, 4> footprint(int i, int j) const {
        const Vec2 c = center(i, j);
        const double h = pitch_px / 2.0, a = deg_to_rad(slant_deg);
        return {c + rotate({-h, -h}, a), c + rotate({h, -h}, a), c + rotate({h, h}, a), c + rotate({-h, h}, a)};
    }

    bool footprint_inside(int i, int j, int width, int height, double tol = 1e-6) const {
        for (const Vec2& p : footprint(i, j))
            if (p.x < -tol || p.y < -tol || p.x > width + tol || p.y > height + tol) return false;
        return true;
    }

    /// Throws LayoutError naming offending microimages when any footprint leaves the raster.
    void validate(int width, int height) const {
        if (!(pitch_px > 0.0)) throw std::invalid_argument("GridLayout: pitch_px must be > 0");
        if (cols < 1 || rows < 1) throw std::invalid_argument("GridLayout: empty lattice");
        std::vector<std::pair<int, int>> bad;
        for (int j = 0; j < rows; ++j)
            for (int i = 0; i < cols; ++i)
                if (!footprint_inside(i, j, width, height)) bad.emplace_back(i, j);
        if (!bad.empty()) {
            std::ostringstream os;
            os << "microimage lattice exceeds " << width << "x" << height << " raster at " << bad.size()
               << " lenslet(s), e.g.";
            for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 4); ++k)
                os << " (" << bad[k].first << "," << bad[k].second << ")";
            throw LayoutError(os.str());
        }
    }
    bool operator==(const GridLayout&) const = default;
};

/// Thin-lens image distance z_i = f z_o / (z_o - f). Throws std::domain_error when the
/// object sits at or inside the focal distance.
inline double thin_lens_image_distance(double focal_mm, double object_dist_mm) {
    if (!(focal_mm > 0.0)) throw std::domain_error("thin lens: focal length must be > 0");
    if (!(object_dist_mm > focal_mm)) throw std::domain_error("thin lens: object at or inside focal distance");
    return focal_mm * object_dist_mm / (object_dist_mm - focal_mm);
}

inline double magnification(double focal_mm, double object_dist_mm) {
    return thin_lens_image_distance(focal_mm, object_dist_mm) / object_dist_mm;
}

/// Lattice of microimage centres for a rig, centred on the sensor.
inline GridLayout build_grid(const MlaSpec& mla, const SensorSpec& sensor) {
    mla.validate();
    sensor.validate();
    const double p = mla.lenslet_pitch_um / sensor.pixel_pitch_um;
    if (p < 3.0) throw std::invalid_argument("build_grid: microimage pitch must be >= 3 px");
    GridLayout g;
    g.pitch_px = p;
    g.slant_deg = mla.slant_deg;
    g.cols = mla.cols;
    g.rows = mla.rows;
    const Vec2 sc{sensor.width_px / 2.0, sensor.height_px / 2.0};
    const Vec2 o = sc + rotate({-(mla.cols - 1) / 2.0 * p, -(mla.rows - 1) / 2.0 * p}, deg_to_rad(mla.slant_deg));
    g.origin_x_px = o.x;
    g.origin_y_px = o.y;
    g.validate(sensor.width_px, sensor.height_px);
    return g;
}

inline GridLayout build_grid(const CameraRig& rig) { return build_grid(rig.mla, rig.sensor); }

/// Shift, in pixels, of a feature between horizontally adjacent microimages when its
/// relayed image lies `intermediate_dist_um` in front of the MLA plane (pinhole lenslets).
inline double expected_disparity(const MlaSpec& mla, const SensorSpec& sensor, double intermediate_dist_um) {
    if (intermediate_dist_um == 0.0 || !std::isfinite(intermediate_dist_um))
        throw std::domain_error("expected_disparity: intermediate distance must be finite and non-zero");
    return (mla.lenslet_pitch_um * mla.gap_um / intermediate_dist_um) / sensor.pixel_pitch_um;
}

/// Lenslet shift between adjacent viewpoint images for a microimage disparity D.
inline double per_view_parallax(double disparity_px) {
    if (disparity_px == 0.0) throw std::domain_error("per_view_parallax: zero disparity has no finite parallax");
    return 1.0 / disparity_px;
}

/// Image-side geometry of a rig focused at a given camera-to-asset distance.
///
/// The objective and relay are one effective thin lens of focal relay_scale * prime_focal
/// at the camera origin. The MLA sits focus_offset_um behind the intermediate image of the
/// focused plane; "w" is a distance behind the lens, "z" a distance in front of it (mm).
class ImagingGeometry {
public:
    ImagingGeometry(const CameraRig& rig, double focus_distance_mm)
        : focal_mm_(rig.effective_focal_mm()),
          focus_offset_mm_(rig.focus_offset_um * 1e-3),
          gap_mm_(rig.mla.gap_um * 1e-3) {
        focus_image_mm_ = thin_lens_image_distance(focal_mm_, focus_distance_mm);
        mla_mm_ = focus_image_mm_ + focus_offset_mm_;
    }

    double focal_mm() const { return focal_mm_; }
    double mla_distance_mm() const { return mla_mm_; }
    double gap_mm() const { return gap_mm_; }
    double focus_offset_mm() const { return focus_offset_mm_; }

    double image_distance_mm(double object_mm) const { return thin_lens_image_distance(focal_mm_, object_mm); }

    /// Distance from the MLA plane to the intermediate image of an object point (um).
    double intermediate_distance_um(double object_mm) const {
        return (mla_mm_ - image_distance_mm(object_mm)) * 1e3;
    }

    /// Object distance whose intermediate image lies `a_um` in front of the MLA.
    double object_distance_for_intermediate_mm(double a_um) const {
        const double w = mla_mm_ - a_um * 1e-3;
        if (!(w > focal_mm_)) throw std::domain_error("intermediate distance has no real object conjugate");
        return focal_mm_ * w / (w - focal_mm_);
    }

    /// Lateral magnification magnitude at an object distance.
    double lateral_magnification(double object_mm) const { return magnification(focal_mm_, object_mm); }

    /// Object-space point conjugate to an image-space point (lateral mm, distance w behind lens).
    std::array<double, 3> to_object(Vec2 lateral_mm, double w_mm) const {
        const double z = focal_mm_ * w_mm / (w_mm - focal_mm_);
        const double s = -z / w_mm;
        return {lateral_mm.x * s, lateral_mm.y * s, z};
    }

private:
    double focal_mm_;
    double focus_offset_mm_;
    double gap_mm_;
    double focus_image_mm_ = 0.0;
    double mla_mm_ = 0.0;
};

}  // namespace h3d
