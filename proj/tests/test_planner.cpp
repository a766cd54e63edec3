#include <gtest/gtest.h>

#include <cmath>

#include "h3d/planner.hpp"

using namespace h3d;

namespace {

const AssetDims kStatuette{11.0, 5.0, 3.0};

// Independent fit: bisect for the distance where the thin-lens image of the largest face
// diagonal equals the usable frame side.
double bisect_fit_distance(const AssetDims& a, const CameraRig& rig, double margin) {
    const double diag = std::max({std::hypot(a.width_cm, a.height_cm), std::hypot(a.width_cm, a.depth_cm),
                                  std::hypot(a.height_cm, a.depth_cm)}) * 10.0;
    const double usable = (1.0 - 2.0 * margin) * std::min(rig.mla.cols, rig.mla.rows) * rig.mla.lenslet_pitch_um / 1000.0;
    const double f = rig.prime_focal_mm * rig.relay_scale;
    double lo = f * 1.0001, hi = 1e6;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (diag * magnification(f, mid) > usable ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) / 10.0;
}

}  // namespace

TEST(Illuminance, ExactOnEveryTableRow) {
    const CalibrationTable t = CalibrationTable::studio_default();
    const std::pair<double, double> rows[] = {{30, 117}, {40, 126}, {50, 131}, {60, 133}, {70, 150}};
    for (const auto& [d, lux] : rows) {
        const IlluminanceLookup r = illuminance_for_distance(t, d);
        EXPECT_EQ(r.lux, lux);
        EXPECT_FALSE(r.extrapolated);
    }
}

TEST(Illuminance, LinearBetweenRows) {
    const CalibrationTable t = CalibrationTable::studio_default();
    EXPECT_NEAR(illuminance_for_distance(t, 45.0).lux, 128.5, 1e-9);
    EXPECT_NEAR(illuminance_for_distance(t, 65.0).lux, 141.5, 1e-9);
    double prev = 0.0;
    for (double d = 30.0; d <= 70.0; d += 0.5) {
        const double lux = illuminance_for_distance(t, d).lux;
        EXPECT_GE(lux, prev);
        prev = lux;
    }
}

TEST(Illuminance, OutsideRangeIsFlagged) {
    const CalibrationTable t = CalibrationTable::studio_default();
    const IlluminanceLookup near = illuminance_for_distance(t, 20.0), far = illuminance_for_distance(t, 80.0);
    EXPECT_TRUE(near.extrapolated);
    EXPECT_TRUE(far.extrapolated);
    EXPECT_NEAR(near.lux, 108.0, 1e-9);
    EXPECT_NEAR(far.lux, 167.0, 1e-9);
    EXPECT_EQ(illuminance_for_distance(t, -1000.0).lux, 0.0);
}

TEST(Illuminance, InvalidTables) {
    EXPECT_THROW(illuminance_for_distance(CalibrationTable{}, 50.0), InputError);
    const CalibrationTable unsorted{{{40, 126}, {30, 117}}};
    EXPECT_THROW(illuminance_for_distance(unsorted, 35.0), InputError);
    const CalibrationTable single{{{50, 131}}};
    EXPECT_EQ(illuminance_for_distance(single, 50.0).lux, 131.0);
    EXPECT_TRUE(illuminance_for_distance(single, 60.0).extrapolated);
}

TEST(MinFitDistance, StatuetteFitsAtSeventy) {
    const double d = min_fit_distance(kStatuette, CameraRig{}, 0.05);
    EXPECT_NEAR(d, 70.0, 5.0);
    EXPECT_NEAR(d, bisect_fit_distance(kStatuette, CameraRig{}, 0.05), 1e-6);
}

TEST(MinFitDistance, MatchesIndependentFit) {
    for (const AssetDims& a : {AssetDims{2, 2, 2}, AssetDims{20, 4, 9}, AssetDims{1, 15, 1}})
        for (double m : {0.0, 0.1, 0.3})
            EXPECT_NEAR(min_fit_distance(a, CameraRig{}, m), bisect_fit_distance(a, CameraRig{}, m), 1e-6);
}

TEST(MinFitDistance, MonotoneInSizeAndMargin) {
    const CameraRig rig;
    EXPECT_LT(min_fit_distance({5.5, 2.5, 1.5}, rig, 0.05), min_fit_distance(kStatuette, rig, 0.05));
    EXPECT_LT(min_fit_distance(kStatuette, rig, 0.0), min_fit_distance(kStatuette, rig, 0.1));
    for (int axis = 0; axis < 3; ++axis) {
        double prev = 0.0;
        for (double s = 1.0; s <= 3.0; s += 0.25) {
            AssetDims a = kStatuette;
            (axis == 0 ? a.width_cm : axis == 1 ? a.height_cm : a.depth_cm) *= s;
            const double d = min_fit_distance(a, rig, 0.05);
            EXPECT_GE(d, prev);
            prev = d;
        }
    }
}

TEST(MinFitDistance, Errors) {
    EXPECT_THROW(min_fit_distance({0, 5, 3}, CameraRig{}, 0.05), std::invalid_argument);
    EXPECT_THROW(min_fit_distance(kStatuette, CameraRig{}, 0.5), std::invalid_argument);
    EXPECT_THROW(min_fit_distance({400, 400, 400}, CameraRig{}, 0.05), InputError);
    EXPECT_THROW(min_fit_distance(kStatuette, CameraRig{}, 0.05, 50.0), InputError);
}

TEST(RelayScale, CalibrationReproducesDefault) {
    EXPECT_NEAR(calibrate_relay_scale(kStatuette, CameraRig{}, 70.0, 0.05), kDefaultRelayScale, 1e-12);
    CameraRig rig;
    rig.relay_scale = calibrate_relay_scale({20, 10, 5}, rig, 90.0, 0.1);
    EXPECT_NEAR(min_fit_distance({20, 10, 5}, rig, 0.1), 90.0, 1e-9);
}

TEST(Plan, StatuetteWithDefaults) {
    const CapturePlan p = plan(kStatuette, CameraRig{}, CalibrationTable::studio_default());
    EXPECT_EQ(p.distance_cm, 70.0);
    EXPECT_EQ(p.illuminance_lux, 150.0);
    EXPECT_FALSE(p.illuminance_extrapolated);
    EXPECT_EQ(p.params.iso, 400.0);
    EXPECT_EQ(p.params.exposure_s, 1.0 / 30.0);
    EXPECT_EQ(p.params.distance_cm, 70.0);
    EXPECT_EQ(p.params.illuminance_lux, 150.0);
    EXPECT_EQ(p.prime_fnumber, 1.4);
    EXPECT_EQ(p.relay_fnumber, 2.8);
    EXPECT_EQ(p.prime_focal_mm, 50.0);
    EXPECT_GE(p.distance_cm, p.min_fit_distance_cm);
}

TEST(Plan, PredictedFillFromLargestFace) {
    const CameraRig rig;
    const CapturePlan p = plan(kStatuette, rig, CalibrationTable::studio_default());
    const double f = rig.prime_focal_mm * rig.relay_scale;
    const double m = f / (p.distance_cm * 10.0 - f);  // image size over object size
    EXPECT_NEAR(p.predicted_fill_ratio, (110.0 * m) * (50.0 * m) / (25.0 * 25.0), 1e-12);
    EXPECT_GE(p.predicted_fill_ratio, 0.3);
}

TEST(Plan, TinyAssetIsCloserAndInterpolated) {
    const CapturePlan p = plan({2, 2, 2}, CameraRig{}, CalibrationTable::studio_default());
    EXPECT_LT(p.distance_cm, 70.0);
    const IlluminanceLookup ref = illuminance_for_distance(CalibrationTable::studio_default(), p.distance_cm);
    EXPECT_EQ(p.illuminance_lux, ref.lux);
    EXPECT_EQ(p.illuminance_extrapolated, ref.extrapolated);
    EXPECT_TRUE(p.illuminance_extrapolated);  // closer than the first table row
}

TEST(Plan, Deterministic) {
    const CapturePlan a = plan({7, 3, 2}, CameraRig{}, CalibrationTable::studio_default());
    const CapturePlan b = plan({7, 3, 2}, CameraRig{}, CalibrationTable::studio_default());
    EXPECT_EQ(a.distance_cm, b.distance_cm);
    EXPECT_EQ(a.illuminance_lux, b.illuminance_lux);
    EXPECT_EQ(a.predicted_fill_ratio, b.predicted_fill_ratio);
}
