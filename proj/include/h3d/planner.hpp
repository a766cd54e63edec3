#pragma once

// Capture planning: camera distance from asset size, illuminance from the studio
// calibration table, and the fixed camera intrinsics.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "h3d/capture.hpp"
#include "h3d/error.hpp"
#include "h3d/optics.hpp"

namespace h3d {

struct AssetDims {
    double width_cm = 0.0;
    double height_cm = 0.0;
    double depth_cm = 0.0;

    void validate() const {
        if (!(width_cm > 0.0 && height_cm > 0.0 && depth_cm > 0.0) || !std::isfinite(width_cm) ||
            !std::isfinite(height_cm) || !std::isfinite(depth_cm))
            throw std::invalid_argument("asset dimensions must be finite and > 0");
    }
    /// Largest face diagonal.
    double max_face_diagonal_cm() const {
        const double a = std::hypot(width_cm, height_cm), b = std::hypot(width_cm, depth_cm),
                     c = std::hypot(height_cm, depth_cm);
        return std::max({a, b, c});
    }
    /// Two largest dimensions, largest first.
    std::pair<double, double> largest_face_cm() const {
        double d[3] = {width_cm, height_cm, depth_cm};
        std::sort(d, d + 3);
        return {d[2], d[1]};
    }
};

/// Distance (cm) to illuminance (lux) rows, strictly increasing in distance.
struct CalibrationTable {
    std::vector<std::pair<double, double>> rows;

    /// Studio table of the reference acquisitions.
    static CalibrationTable studio_default() { return {{{30, 117}, {40, 126}, {50, 131}, {60, 133}, {70, 150}}}; }

    void validate() const {
        if (rows.empty()) throw InputError("calibration table is empty");
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (!std::isfinite(rows[k].first) || !(rows[k].second >= 0.0) || !std::isfinite(rows[k].second))
                throw InputError("calibration table: invalid row " + std::to_string(k));
            if (k > 0 && !(rows[k].first > rows[k - 1].first))
                throw InputError("calibration table: distances must be strictly increasing");
        }
    }
};

struct IlluminanceLookup {
    double lux = 0.0;
    /// True when the distance lies outside the table range.
    bool extrapolated = false;
};

/// Exact on rows, linear between rows, linear continuation of the end segment outside
/// (flagged, clamped at 0).
inline IlluminanceLookup illuminance_for_distance(const CalibrationTable& table, double distance_cm) {
    table.validate();
    if (!std::isfinite(distance_cm)) throw std::invalid_argument("illuminance: distance must be finite");
    const auto& r = table.rows;
    IlluminanceLookup out;
    out.extrapolated = distance_cm < r.front().first || distance_cm > r.back().first;
    if (r.size() == 1) {
        out.lux = r.front().second;
        return out;
    }
    for (const auto& [d, lux] : r)
        if (d == distance_cm) {
            out.lux = lux;
            return out;
        }
    std::size_t k = 1;
    while (k + 1 < r.size() && distance_cm > r[k].first) ++k;
    const auto [d0, l0] = r[k - 1];
    const auto [d1, l1] = r[k];
    out.lux = std::max(0.0, l0 + (l1 - l0) * (distance_cm - d0) / (d1 - d0));
    return out;
}

struct PlannerOptions {
    double margin_fraction = 0.05;
    double max_distance_cm = 300.0;

    void validate() const {
        if (!(margin_fraction >= 0.0 && margin_fraction < 0.5))
            throw std::invalid_argument("margin_fraction must be in [0, 0.5)");
        if (!(max_distance_cm > 0.0)) throw std::invalid_argument("max_distance_cm must be > 0");
    }
};

namespace detail {

/// Shorter side of the MLA frame, mm.
inline double frame_side_mm(const CameraRig& rig) {
    return std::min(rig.mla.cols, rig.mla.rows) * rig.mla.lenslet_pitch_um * 1e-3;
}

}  // namespace detail

/// Smallest camera-to-asset distance (cm) at which the largest face diagonal, imaged with
/// magnification F / (z - F), fits the shorter frame side minus a margin on both ends.
inline double min_fit_distance(const AssetDims& asset, const CameraRig& rig, double margin_fraction,
                               double max_distance_cm = PlannerOptions{}.max_distance_cm) {
    asset.validate();
    rig.validate();
    PlannerOptions{margin_fraction, max_distance_cm}.validate();
    const double usable_mm = (1.0 - 2.0 * margin_fraction) * detail::frame_side_mm(rig);
    const double f = rig.effective_focal_mm();
    const double z_mm = f * (1.0 + asset.max_face_diagonal_cm() * 10.0 / usable_mm);
    if (z_mm > max_distance_cm * 10.0)
        throw InputError("asset does not fit the frame at any distance up to " + std::to_string(max_distance_cm) + " cm");
    return z_mm / 10.0;
}

/// Relay scale that makes `asset` first fit at `distance_cm` with the given margin; this is
/// how kDefaultRelayScale was obtained (11 x 5 x 3 cm, 70 cm, 5 %).
inline double calibrate_relay_scale(const AssetDims& asset, CameraRig rig, double distance_cm, double margin_fraction) {
    asset.validate();
    PlannerOptions{margin_fraction}.validate();
    if (!(distance_cm > 0.0)) throw std::invalid_argument("calibrate_relay_scale: distance must be > 0");
    const double usable_mm = (1.0 - 2.0 * margin_fraction) * detail::frame_side_mm(rig);
    const double diag_mm = asset.max_face_diagonal_cm() * 10.0;
    return distance_cm * 10.0 * usable_mm / (diag_mm + usable_mm) / rig.prime_focal_mm;
}

struct CapturePlan {
    double distance_cm = 0.0;
    double min_fit_distance_cm = 0.0;
    double illuminance_lux = 0.0;
    bool illuminance_extrapolated = false;
    CaptureParams params;
    double prime_focal_mm = 0.0;
    double prime_fnumber = 0.0;
    double relay_fnumber = 0.0;
    /// Largest face area over frame area at the planned distance.
    double predicted_fill_ratio = 0.0;
};

/// Distance rounded up to whole centimetres, table illuminance, fixed camera intrinsics
/// (ISO 400, 1/30 s; prime and relay f-numbers from the rig).
inline CapturePlan plan(const AssetDims& asset, const CameraRig& rig, const CalibrationTable& table,
                        const PlannerOptions& opt = {}) {
    opt.validate();
    CapturePlan p;
    p.min_fit_distance_cm = min_fit_distance(asset, rig, opt.margin_fraction, opt.max_distance_cm);
    p.distance_cm = std::ceil(p.min_fit_distance_cm - 1e-6);
    const IlluminanceLookup lux = illuminance_for_distance(table, p.distance_cm);
    p.illuminance_lux = lux.lux;
    p.illuminance_extrapolated = lux.extrapolated;
    p.params = CaptureParams{};
    p.params.distance_cm = p.distance_cm;
    p.params.illuminance_lux = lux.lux;
    p.prime_focal_mm = rig.prime_focal_mm;
    p.prime_fnumber = rig.prime_fnumber;
    p.relay_fnumber = rig.relay_fnumber;
    const double f = rig.effective_focal_mm();
    const double m = f / (p.distance_cm * 10.0 - f);
    const auto [a, b] = asset.largest_face_cm();
    const double frame_w = rig.mla.cols * rig.mla.lenslet_pitch_um * 1e-3, frame_h = rig.mla.rows * rig.mla.lenslet_pitch_um * 1e-3;
    p.predicted_fill_ratio = std::min(1.0, (m * a * 10.0) * (m * b * 10.0) / (frame_w * frame_h));
    return p;
}

}  // namespace h3d
