#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "h3d/decoder.hpp"
#include "support.hpp"

using namespace h3d;
using namespace h3d::test;

namespace {

GridLayout small_grid(int n, double pitch = 10.0) {
    GridLayout g;
    g.pitch_px = pitch;
    g.origin_x_px = g.origin_y_px = pitch / 2.0;
    g.cols = g.rows = n;
    return g;
}

MultiviewSet random_views(int P, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    MultiviewSet set;
    set.k_u = set.k_v = P;
    set.stride = 1;
    for (int v = 0; v < P; ++v)
        for (int uu = 0; uu < P; ++uu) {
            ViewpointImage view;
            view.u = uu;
            view.v = v;
            view.pixels = Image(n, n, 1);
            for (float& x : view.pixels.data()) x = u(rng);
            set.views.push_back(std::move(view));
        }
    return set;
}

RawH3DImage point_raw(double dz, int ss = 2) {
    CaptureParams p;
    p.supersampling = ss;
    p.vignetting = false;
    return render_raw(point_scene(dz), CameraRig{}, p);
}

double mean_abs_diff_interior(const Image& a, const Image& b, int lo, int hi, int pitch) {
    double s = 0.0;
    long n = 0;
    for (int y = lo; y < hi; ++y)
        for (int x = lo; x < hi; ++x) {
            const int u = x % pitch, v = y % pitch;
            if (u == 0 || v == 0 || u == pitch - 1 || v == pitch - 1) continue;
            s += std::abs(double(a.at(x, y)) - b.at(x, y));
            ++n;
        }
    return s / n;
}

}  // namespace

TEST(Extract, AssemblyRoundTripIsBitExact) {
    const GridLayout g = small_grid(12);
    const MultiviewSet set = random_views(10, 12, 1);
    const RawH3DImage raw = assemble_raw(set, g, 120, 120);
    const MultiviewSet back = multiview_set(raw, g, 10, 10, 1);
    ASSERT_EQ(back.views.size(), set.views.size());
    for (std::size_t k = 0; k < set.views.size(); ++k) {
        EXPECT_EQ(back.views[k].u, set.views[k].u);
        EXPECT_EQ(back.views[k].v, set.views[k].v);
        EXPECT_TRUE(back.views[k].pixels == set.views[k].pixels);
    }
}

TEST(Extract, ConstantTilesRoundTrip) {
    // microimage (i, j) filled with a constant: every view returns the tile values
    const GridLayout g = small_grid(5);
    RawH3DImage raw;
    raw.pixels = Image(50, 50, 1);
    for (int y = 0; y < 50; ++y)
        for (int x = 0; x < 50; ++x) raw.pixels.at(x, y) = static_cast<float>((y / 10) * 5 + x / 10) / 25.0f;
    for (int v = 0; v < 10; v += 3)
        for (int u = 0; u < 10; u += 4) {
            const ViewpointImage vp = extract_viewpoint(raw, g, u, v);
            for (int j = 0; j < 5; ++j)
                for (int i = 0; i < 5; ++i) EXPECT_EQ(vp.pixels.at(i, j), static_cast<float>(j * 5 + i) / 25.0f);
        }
}

TEST(Extract, OutOfRangeViewRejected) {
    const GridLayout g = small_grid(4);
    RawH3DImage raw;
    raw.pixels = Image(40, 40, 1);
    EXPECT_THROW(extract_viewpoint(raw, g, 10, 0), std::out_of_range);
    EXPECT_THROW(extract_viewpoint(raw, g, 0, -1), std::out_of_range);
}

TEST(Extract, SlantedGridRequiresRectification) {
    GridLayout g = small_grid(4);
    g.slant_deg = 3.0;
    RawH3DImage raw;
    raw.pixels = Image(60, 60, 1);
    EXPECT_THROW(extract_viewpoint(raw, g, 0, 0), std::invalid_argument);
}

TEST(Extract, UniformSceneViewsIdentical) {
    Scene s;
    s.background_albedo = 0.45;
    CaptureParams p;
    p.supersampling = 1;
    p.vignetting = false;
    CameraRig rig;
    rig.sensor.width_px = rig.sensor.height_px = 300;
    rig.mla.cols = rig.mla.rows = 30;
    const RawH3DImage raw = render_raw(s, rig, p);
    const MultiviewSet set = multiview_set(raw, *raw.grid, 10, 10, 1);
    for (const ViewpointImage& v : set.views) EXPECT_TRUE(v.pixels == set.views.front().pixels);
}

TEST(Extract, FractionalPitchUsesBilinear) {
    Scene s;
    s.background_albedo = 0.45;
    CaptureParams p;
    p.supersampling = 1;
    p.vignetting = false;
    CameraRig rig;
    rig.mla.lenslet_pitch_um = 262.5;  // 10.5 px
    rig.mla.cols = rig.mla.rows = 90;
    const RawH3DImage raw = render_raw(s, rig, p);
    ASSERT_FALSE(raw.grid->integer_pitch());
    const ViewpointImage a = extract_viewpoint(raw, *raw.grid, 0, 0), b = extract_viewpoint(raw, *raw.grid, 9, 9);
    // outermost lenslets sample the unlit sensor border, so compare the interior
    for (int j = 1; j < 89; ++j)
        for (int i = 1; i < 89; ++i) ASSERT_NEAR(a.pixels.at(i, j), b.pixels.at(i, j), 1e-5) << i << "," << j;
}

TEST(Extract, PointSourceViewParallax) {
    for (double dz : {-10.0, 0.0, 10.0}) {
        const RawH3DImage raw = point_raw(dz);
        const double parallax = per_view_parallax(predicted_disparity(CameraRig{}, 70.0, dz));
        const double x3 = vpi_centroid_x(extract_viewpoint(raw, *raw.grid, 3, 5).pixels);
        const double x6 = vpi_centroid_x(extract_viewpoint(raw, *raw.grid, 6, 5).pixels);
        EXPECT_NEAR((x6 - x3) / 3.0, parallax, 0.25) << "dz " << dz;
    }
}

TEST(Multiview, SingleViewIsCentral) {
    const RawH3DImage raw = point_raw(0.0, 1);
    const MultiviewSet set = multiview_set(raw, *raw.grid, 1, 1, 1);
    ASSERT_EQ(set.views.size(), 1u);
    const int c = central_view_index(10);
    EXPECT_EQ(set.views[0].u, c);
    EXPECT_TRUE(set.views[0].pixels == extract_viewpoint(raw, *raw.grid, c, c).pixels);
}

TEST(Multiview, SymmetricAndCollinear) {
    const RawH3DImage raw = point_raw(-4.0);
    const MultiviewSet set = multiview_set(raw, *raw.grid, 3, 1, 3);
    ASSERT_EQ(set.views.size(), 3u);
    EXPECT_EQ(set.at(1, 0).u - set.at(0, 0).u, 3);
    EXPECT_LE(std::abs(set.at(0, 0).u + set.at(2, 0).u - 9), 1);  // centred to within one sample
    const double x0 = vpi_centroid_x(set.at(0, 0).pixels), x1 = vpi_centroid_x(set.at(1, 0).pixels),
                 x2 = vpi_centroid_x(set.at(2, 0).pixels);
    EXPECT_NEAR(x1 - x0, x2 - x1, 0.25);
    EXPECT_NEAR((x2 - x0) / 6.0, per_view_parallax(predicted_disparity(CameraRig{}, 70.0, -4.0)), 0.25);
}

TEST(Multiview, TooWideRejected) {
    const RawH3DImage raw = point_raw(0.0, 1);
    EXPECT_THROW(multiview_set(raw, *raw.grid, 4, 4, 4), std::out_of_range);
    EXPECT_THROW(multiview_set(raw, *raw.grid, 0, 1, 1), std::invalid_argument);
}

TEST(Stereo, ZeroBaselineIsIdentical) {
    const RawH3DImage raw = point_raw(0.0, 1);
    const StereoPair p = stereo_pair(raw, *raw.grid, 0);
    EXPECT_TRUE(p.left.pixels == p.right.pixels);
}

TEST(Stereo, BaselineDisplacement) {
    const RawH3DImage raw = point_raw(-4.0);
    const StereoPair p = stereo_pair(raw, *raw.grid, 2);
    EXPECT_EQ(p.right.u - p.left.u, 2);
    EXPECT_EQ(p.left.v, p.right.v);
    const double shift = vpi_centroid_x(p.right.pixels) - vpi_centroid_x(p.left.pixels);
    EXPECT_NEAR(shift, 2.0 * per_view_parallax(predicted_disparity(CameraRig{}, 70.0, -4.0)), 0.25);
}

TEST(Stereo, NegativeBaselineMirrors) {
    const RawH3DImage raw = point_raw(0.0, 1);
    const StereoPair a = stereo_pair(raw, *raw.grid, 4), b = stereo_pair(raw, *raw.grid, -4);
    EXPECT_TRUE(a.left.pixels == b.right.pixels);
    EXPECT_TRUE(a.right.pixels == b.left.pixels);
    EXPECT_THROW(stereo_pair(raw, *raw.grid, 10), std::out_of_range);
}

TEST(Refocus, ZeroDisparityIsViewMean) {
    CaptureParams p;
    p.supersampling = 1;
    const RawH3DImage raw = render_raw(statuette_scene(), CameraRig{}, p);
    const RefocusResult r = refocus(raw, *raw.grid, 0.0, 5);
    const MultiviewSet set = multiview_set(raw, *raw.grid, 5, 5, 1);
    for (int j = 0; j < 100; j += 7)
        for (int i = 0; i < 100; i += 7) {
            double s = 0.0;
            for (const ViewpointImage& v : set.views) s += v.pixels.at(i, j);
            EXPECT_NEAR(r.image.at(i, j), s / 25.0, 1e-6);
        }
    for (int c : r.contributing_count) EXPECT_EQ(c, 25);
}

TEST(Refocus, BoundaryRenormalised) {
    Scene s;
    s.background_albedo = 0.5;
    CaptureParams p;
    p.supersampling = 1;
    p.vignetting = false;
    CameraRig rig;
    rig.sensor.width_px = rig.sensor.height_px = 200;
    rig.mla.cols = rig.mla.rows = 20;
    const RawH3DImage raw = render_raw(s, rig, p);
    const RefocusResult r = refocus(raw, *raw.grid, 1.5, 5);
    EXPECT_LT(r.contributing_count.front(), 25);
    EXPECT_EQ(r.contributing_count[10 * 20 + 10], 25);
    for (float v : r.image.data()) EXPECT_NEAR(v, 0.5f, 1e-5);
}

TEST(Refocus, SweepPeaksAtPredictedPlane) {
    const CameraRig rig;
    CaptureParams p;
    p.supersampling = 2;
    for (double dz : {-10.0, 10.0}) {
        const RawH3DImage raw = render_raw(textured_plane(dz, 5), rig, p);
        const double target = per_view_parallax(predicted_disparity(rig, 70.0, dz));
        const RefocusSweep sw = refocus_sweep(raw, *raw.grid, -0.5, 2.5, 0.25, 9);
        EXPECT_LE(std::abs(sw.best.disparity - target), 0.25) << "dz " << dz;
    }
}

TEST(Refocus, TwoPlanesGiveTwoLocalMaxima) {
    const CameraRig rig;
    CaptureParams p;
    p.supersampling = 2;
    Scene s = textured_plane(-10.0, 5);
    s.primitives[0].dims_cm = {20.0, 40.0, 0.0};
    s.primitives[0].pose.position_cm = {-10.0, 0.0, -10.0};
    Primitive far = textured_plane(10.0, 6).primitives[0];
    far.dims_cm = {20.0, 40.0, 0.0};
    far.pose.position_cm = {10.0, 0.0, 10.0};
    s.primitives.push_back(far);
    const RawH3DImage raw = render_raw(s, rig, p);
    const RefocusSweep sw = refocus_sweep(raw, *raw.grid, -0.5, 2.5, 0.25, 9);
    std::vector<double> peaks;
    for (std::size_t k = 1; k + 1 < sw.curve.size(); ++k)
        if (sw.curve[k].sharpness > sw.curve[k - 1].sharpness && sw.curve[k].sharpness > sw.curve[k + 1].sharpness)
            peaks.push_back(sw.curve[k].disparity);
    for (double dz : {-10.0, 10.0}) {
        const double target = per_view_parallax(predicted_disparity(rig, 70.0, dz));
        bool hit = false;
        for (double d : peaks) hit = hit || std::abs(d - target) <= 0.25;
        EXPECT_TRUE(hit) << "no local maximum near " << target;
    }
}

TEST(Refocus, SweepTieGoesToSmallestMagnitude) {
    Scene s;
    s.background_albedo = 0.5;
    CaptureParams p;
    p.supersampling = 1;
    p.vignetting = false;
    CameraRig rig;
    rig.sensor.width_px = rig.sensor.height_px = 200;
    rig.mla.cols = rig.mla.rows = 20;
    const RawH3DImage raw = render_raw(s, rig, p);
    const RefocusSweep sw = refocus_sweep(raw, *raw.grid, -1.0, 1.0, 0.5, 3);
    EXPECT_EQ(sw.best.disparity, 0.0);
    EXPECT_THROW(refocus_sweep(raw, *raw.grid, 1.0, 0.0, 0.5, 3), std::invalid_argument);
}

TEST(Orthoscopic, Involution) {
    CaptureParams p;
    p.supersampling = 1;
    const RawH3DImage raw = render_raw(statuette_scene(), CameraRig{}, p);
    const RawH3DImage once = orthoscopic_correct(raw, *raw.grid);
    EXPECT_TRUE(once.grid->orthoscopic);
    EXPECT_FALSE(once.pixels == raw.pixels);
    const RawH3DImage twice = orthoscopic_correct(once, *once.grid);
    EXPECT_TRUE(twice.pixels == raw.pixels);
    EXPECT_FALSE(twice.grid->orthoscopic);
}

TEST(Orthoscopic, SymmetricContentIsFixed) {
    const GridLayout g = small_grid(3);
    RawH3DImage raw;
    raw.pixels = Image(30, 30, 1);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 30; ++x) {
            const int u = x % 10, v = y % 10;
            raw.pixels.at(x, y) = static_cast<float>(std::abs(u - 4.5) + std::abs(v - 4.5)) / 10.0f;
        }
    EXPECT_TRUE(orthoscopic_correct(raw, g).pixels == raw.pixels);
}

TEST(Orthoscopic, ParallaxSignFlips) {
    const RawH3DImage raw = point_raw(-4.0);
    const RawH3DImage o = orthoscopic_correct(raw, *raw.grid);
    auto parallax = [](const RawH3DImage& r) {
        return vpi_centroid_x(extract_viewpoint(r, *r.grid, 6, 5).pixels) -
               vpi_centroid_x(extract_viewpoint(r, *r.grid, 3, 5).pixels);
    };
    const double before = parallax(raw), after = parallax(o);
    EXPECT_GT(before, 0.5);
    EXPECT_LT(after, -0.5);
    EXPECT_NEAR(before, -after, 0.25);
}

TEST(Rectify, ZeroSlantIsIdentity) {
    CaptureParams p;
    p.supersampling = 1;
    const RawH3DImage raw = render_raw(statuette_scene(), CameraRig{}, p);
    const RawH3DImage r = rectify_slant(raw);
    EXPECT_TRUE(r.pixels == raw.pixels);
    EXPECT_EQ(*r.grid, *raw.grid);
}

TEST(Rectify, MatchesAxisAlignedRenderOfRolledScene) {
    // a +5 deg slanted MLA sees the scene rolled by -5 deg once the raster is rotated back
    CaptureParams p;
    p.supersampling = 2;
    CameraRig r5, r0;
    r5.mla.slant_deg = 5.0;
    r5.mla.cols = r5.mla.rows = r0.mla.cols = r0.mla.rows = 90;
    Scene s = textured_plane(0.0, 5);
    s.primitives[0].albedo = Checkerboard{3.0, 0.2, 0.8};
    const RawH3DImage rect = rectify_slant(render_raw(s, r5, p));
    const RawH3DImage ref = render_raw(roll_scene(s, -5.0), r0, p);
    EXPECT_EQ(rect.grid->slant_deg, 0.0);
    EXPECT_NEAR(rect.grid->origin_x_px, ref.grid->origin_x_px, 1e-9);
    EXPECT_NEAR(rect.grid->origin_y_px, ref.grid->origin_y_px, 1e-9);
    EXPECT_LE(mean_abs_diff_interior(rect.pixels, ref.pixels, 150, 850, 10), 0.02);
}

TEST(Rectify, CentresOnAxisAlignedLattice) {
    // calibration target: uniform field with strong vignetting peaks at every microimage centre
    CameraRig rig;
    rig.mla.slant_deg = 5.0;
    rig.mla.cols = rig.mla.rows = 90;
    rig.aperture = ApertureShape::circular;
    rig.vignette_corner_deg = 40.0;
    Scene s;
    s.background_albedo = 0.8;
    CaptureParams p;
    p.supersampling = 2;
    const RawH3DImage rect = rectify_slant(render_raw(s, rig, p));
    const GridLayout& g = *rect.grid;
    double worst = 0.0;
    for (int j = 5; j < g.rows - 5; j += 6)
        for (int i = 5; i < g.cols - 5; i += 6) {
            const Vec2 c = g.center(i, j);
            const int x0 = static_cast<int>(std::floor(c.x - 5)), y0 = static_cast<int>(std::floor(c.y - 5));
            double lo = 1e9;
            for (int y = y0; y < y0 + 10; ++y)
                for (int x = x0; x < x0 + 10; ++x) lo = std::min(lo, double(rect.pixels.at(x, y)));
            double m = 0, mx = 0, my = 0;
            for (int y = y0; y < y0 + 10; ++y)
                for (int x = x0; x < x0 + 10; ++x) {
                    const double w = rect.pixels.at(x, y) - lo;
                    m += w;
                    mx += w * (x + 0.5);
                    my += w * (y + 0.5);
                }
            worst = std::max(worst, std::hypot(mx / m - c.x, my / m - c.y));
        }
    EXPECT_LE(worst, 0.2);
}

TEST(Resample, FractionalPitchToInteger) {
    Scene s;
    s.background_albedo = 0.45;
    CaptureParams p;
    p.supersampling = 1;
    p.vignetting = false;
    CameraRig rig;
    rig.mla.lenslet_pitch_um = 262.5;
    rig.mla.cols = rig.mla.rows = 90;
    const RawH3DImage raw = render_raw(s, rig, p);
    const RawH3DImage r = resample_to_integer_pitch(raw, *raw.grid);
    EXPECT_EQ(r.grid->pitch_px, 11.0);
    EXPECT_EQ(r.pixels.width(), 990);
    EXPECT_TRUE(tile_aligned(*r.grid));
    const RawH3DImage o = orthoscopic_correct(raw, *raw.grid);
    EXPECT_EQ(o.grid->pitch_px, 11.0);
}
