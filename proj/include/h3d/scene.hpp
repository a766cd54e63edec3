#pragma once

// Simple analytic scenes for the capture simulator.
//
// Scene coordinates are centimetres in the asset frame: the origin is the asset anchor,
// +z points away from the camera. The camera sits at (0, 0, -distance_cm).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "h3d/image.hpp"
#include "h3d/optics.hpp"

namespace h3d {

using Vec3 = std::array<double, 3>;
using Rgb = std::array<float, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct Checkerboard {
    double cell_cm = 1.0;
    double albedo_a = 0.2;
    double albedo_b = 0.8;
};

/// Raster texture addressed by surface (u, v) in [0,1]^2, bilinear, edge-clamped.
struct RasterTexture {
    std::shared_ptr<const Image> image;
    std::string path;  // provenance only
};

using AlbedoSource = std::variant<double, Checkerboard, RasterTexture>;

enum class PrimitiveKind { plane, sphere, box };

/// Rotation is applied as R = Ry(yaw) * Rx(pitch) * Rz(roll), angles in degrees.
struct Pose {
    Vec3 position_cm{0.0, 0.0, 0.0};
    Vec3 rotation_deg{0.0, 0.0, 0.0};  // yaw, pitch, roll
};

struct Primitive {
    PrimitiveKind kind = PrimitiveKind::box;
    Pose pose;
    /// plane: width, height (third ignored); sphere: radius (others ignored); box: width, height, depth.
    Vec3 dims_cm{1.0, 1.0, 1.0};
    AlbedoSource albedo = 0.5;
    Rgb tint{1.0f, 1.0f, 1.0f};
    /// Counts towards the assessed object (coverage / fill).
    bool asset = true;
    std::string name;
};

struct Scene {
    std::vector<Primitive> primitives;
    double background_albedo = 0.0;
    std::string label = "scene";
};

namespace detail {

struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 apply(const Vec3& v) const {
        return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    }
    Vec3 apply_transposed(const Vec3& v) const {
        return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2], m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
                m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
                r.m[i * 3 + j] = s;
            }
        return r;
    }
};

inline Mat3 pose_rotation(const Vec3& deg) {
    const double y = deg_to_rad(deg[0]), p = deg_to_rad(deg[1]), r = deg_to_rad(deg[2]);
    Mat3 ry{{std::cos(y), 0, std::sin(y), 0, 1, 0, -std::sin(y), 0, std::cos(y)}};
    Mat3 rx{{1, 0, 0, 0, std::cos(p), -std::sin(p), 0, std::sin(p), std::cos(p)}};
    Mat3 rz{{std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r), 0, 0, 0, 1}};
    return ry * rx * rz;
}

}  // namespace detail

/// Result of a ray/primitive intersection.
struct SurfaceHit {
    double t = std::numeric_limits<double>::infinity();
    Vec3 local{};        // hit point in primitive frame (cm)
    double u = 0.0, v = 0.0;
    const Primitive* primitive = nullptr;
};

/// Primitive with its pose pre-baked for repeated intersection.
class PlacedPrimitive {
public:
    explicit PlacedPrimitive(const Primitive& p) : prim_(&p), rot_(detail::pose_rotation(p.pose.rotation_deg)) {}

    const Primitive& primitive() const { return *prim_; }

    /// Nearest hit with t > t_min along origin + t * dir (scene frame, cm).
    std::optional<SurfaceHit> intersect(const Vec3& origin, const Vec3& dir, double t_min) const {
        const Vec3 o = rot_.apply_transposed(origin - prim_->pose.position_cm);
        const Vec3 d = rot_.apply_transposed(dir);
        switch (prim_->kind) {
            case PrimitiveKind::plane: return hit_plane(o, d, t_min);
            case PrimitiveKind::sphere: return hit_sphere(o, d, t_min);
            case PrimitiveKind::box: return hit_box(o, d, t_min);
        }
        return std::nullopt;
    }

    /// World-frame bounding radius around the pose position.
    double bounding_radius() const {
        const Vec3& s = prim_->dims_cm;
        switch (prim_->kind) {
            case PrimitiveKind::plane: return 0.5 * std::hypot(s[0], s[1]);
            case PrimitiveKind::sphere: return s[0];
            case PrimitiveKind::box: return 0.5 * std::sqrt(dot(s, s));
        }
        return 0.0;
    }

private:
    SurfaceHit make(double t, const Vec3& o, const Vec3& d, double u, double v) const {
        SurfaceHit h;
        h.t = t;
        h.local = o + d * t;
        h.u = u;
        h.v = v;
        h.primitive = prim_;
        return h;
    }

    std::optional<SurfaceHit> hit_plane(const Vec3& o, const Vec3& d, double t_min) const {
        if (d[2] == 0.0) return std::nullopt;
        const double t = -o[2] / d[2];
        if (!(t > t_min)) return std::nullopt;
        const Vec3 p = o + d * t;
        const double w = prim_->dims_cm[0], h = prim_->dims_cm[1];
        if (std::abs(p[0]) > w / 2 || std::abs(p[1]) > h / 2) return std::nullopt;
        return make(t, o, d, p[0] / w + 0.5, p[1] / h + 0.5);
    }

    std::optional<SurfaceHit> hit_sphere(const Vec3& o, const Vec3& d, double t_min) const {
        const double r = prim_->dims_cm[0];
        const double a = dot(d, d), b = dot(o, d), c = dot(o, o) - r * r;
        const double disc = b * b - a * c;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        double t = (-b - sq) / a;
        if (!(t > t_min)) t = (-b + sq) / a;
        if (!(t > t_min)) return std::nullopt;
        const Vec3 p = o + d * t;
        const double u = std::atan2(p[0], -p[2]) / (2.0 * std::numbers::pi) + 0.5;
        const double v = std::acos(std::clamp(p[1] / r, -1.0, 1.0)) / std::numbers::pi;
        return make(t, o, d, u, v);
    }

    std::optional<SurfaceHit> hit_box(const Vec3& o, const Vec3& d, double t_min) const {
        const Vec3 half = prim_->dims_cm * 0.5;
        double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
        int axis0 = 0, axis1 = 0;
        for (int k = 0; k < 3; ++k) {
            if (d[k] == 0.0) {
                if (std::abs(o[k]) > half[k]) return std::nullopt;
                continue;
            }
            double ta = (-half[k] - o[k]) / d[k], tb = (half[k] - o[k]) / d[k];
            if (ta > tb) std::swap(ta, tb);
            if (ta > t0) { t0 = ta; axis0 = k; }
            if (tb < t1) { t1 = tb; axis1 = k; }
        }
        if (t0 > t1) return std::nullopt;
        double t = t0;
        int axis = axis0;
        if (!(t > t_min)) { t = t1; axis = axis1; }
        if (!(t > t_min)) return std::nullopt;
        const Vec3 p = o + d * t;
        // face-local (u, v) from the two axes spanning the hit face
        const int a1 = axis == 0 ? 2 : 0;
        const int a2 = axis == 1 ? 2 : 1;
        return make(t, o, d, p[a1] / prim_->dims_cm[a1] + 0.5, p[a2] / prim_->dims_cm[a2] + 0.5);
    }

    const Primitive* prim_;
    detail::Mat3 rot_;
};

inline Rgb evaluate_albedo(const SurfaceHit& hit) {
    const Primitive& p = *hit.primitive;
    Rgb base{};
    if (const double* c = std::get_if<double>(&p.albedo)) {
        base = {float(*c), float(*c), float(*c)};
    } else if (const Checkerboard* cb = std::get_if<Checkerboard>(&p.albedo)) {
        const long parity = static_cast<long>(std::floor(hit.local[0] / cb->cell_cm)) +
                            static_cast<long>(std::floor(hit.local[1] / cb->cell_cm)) +
                            static_cast<long>(std::floor(hit.local[2] / cb->cell_cm));
        const float a = float((parity & 1) ? cb->albedo_b : cb->albedo_a);
        base = {a, a, a};
    } else {
        const Image& tex = *std::get<RasterTexture>(p.albedo).image;
        const double x = std::clamp(hit.u * tex.width() - 0.5, 0.0, double(tex.width() - 1));
        const double y = std::clamp(hit.v * tex.height() - 0.5, 0.0, double(tex.height() - 1));
        for (int c = 0; c < 3; ++c) base[c] = tex.sample(x, y, std::min(c, tex.channels() - 1));
    }
    return {base[0] * p.tint[0], base[1] * p.tint[1], base[2] * p.tint[2]};
}

/// Checks primitive dimensions, albedo ranges and that everything lies in front of the
/// camera beyond `min_distance_cm` (the effective focal distance for real imaging).
inline void validate_scene(const Scene& scene, double distance_cm, double min_distance_cm = 0.0) {
    auto in01 = [](double a) { return a >= 0.0 && a <= 1.0; };
    if (!in01(scene.background_albedo)) throw std::invalid_argument("scene: background albedo outside [0,1]");
    for (const Primitive& p : scene.primitives) {
        const std::string tag = p.name.empty() ? std::string("primitive") : "primitive '" + p.name + "'";
        const Vec3& s = p.dims_cm;
        const bool zero_area = p.kind == PrimitiveKind::sphere ? !(s[0] > 0.0)
                               : p.kind == PrimitiveKind::plane ? !(s[0] > 0.0 && s[1] > 0.0)
                                                                : !(s[0] > 0.0 && s[1] > 0.0 && s[2] > 0.0);
        if (zero_area) throw std::invalid_argument("scene: " + tag + " has zero area");
        for (float t : p.tint)
            if (!in01(t)) throw std::invalid_argument("scene: " + tag + " tint outside [0,1]");
        if (const double* c = std::get_if<double>(&p.albedo); c && !in01(*c))
            throw std::invalid_argument("scene: " + tag + " albedo outside [0,1]");
        if (const Checkerboard* cb = std::get_if<Checkerboard>(&p.albedo)) {
            if (!in01(cb->albedo_a) || !in01(cb->albedo_b))
                throw std::invalid_argument("scene: " + tag + " albedo outside [0,1]");
            if (!(cb->cell_cm > 0.0)) throw std::invalid_argument("scene: " + tag + " checker cell must be > 0");
        }
        if (const RasterTexture* rt = std::get_if<RasterTexture>(&p.albedo); rt && (!rt->image || rt->image->empty()))
            throw std::invalid_argument("scene: " + tag + " texture is empty");
        const double nearest = distance_cm + p.pose.position_cm[2] - PlacedPrimitive(p).bounding_radius();
        if (!(nearest > 0.0)) throw std::invalid_argument("scene: " + tag + " is behind the camera");
        if (!(nearest > min_distance_cm))
            throw std::invalid_argument("scene: " + tag + " lies inside the effective focal distance");
    }
}

/// Rotates every primitive about the optical axis (scene z) by `deg`.
inline Scene roll_scene(Scene scene, double deg) {
    const detail::Mat3 rz = detail::pose_rotation({0.0, 0.0, deg});
    for (Primitive& p : scene.primitives) {
        p.pose.position_cm = rz.apply(p.pose.position_cm);
        // compose orientation: new R = Rz * R, re-expressed as yaw/pitch/roll
        const detail::Mat3 r = rz * detail::pose_rotation(p.pose.rotation_deg);
        const double pitch = std::asin(std::clamp(-r.m[5], -1.0, 1.0));
        const double yaw = std::atan2(r.m[2], r.m[8]);
        const double roll = std::atan2(r.m[3], r.m[4]);
        p.pose.rotation_deg = {rad_to_deg(yaw), rad_to_deg(pitch), rad_to_deg(roll)};
    }
    return scene;
}

/// Textured 11 x 5 x 3 cm box standing in for the red statuette used in the capture trials.
inline Scene statuette_scene() {
    Scene s;
    s.label = "statuette";
    s.background_albedo = 0.15;
    Primitive box;
    box.kind = PrimitiveKind::box;
    box.name = "statuette";
    box.dims_cm = {5.0, 11.0, 3.0};
    box.pose.rotation_deg = {30.0, 0.0, 0.0};
    box.albedo = Checkerboard{0.6, 0.25, 0.85};
    box.tint = {1.0f, 0.6f, 0.5f};
    s.primitives.push_back(box);
    return s;
}

}  // namespace h3d
