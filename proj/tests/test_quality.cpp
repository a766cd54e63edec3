#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "h3d/io.hpp"
#include "h3d/quality.hpp"
#include "support.hpp"

using namespace h3d;
using namespace h3d::test;

namespace {

struct Capture {
    RawH3DImage raw;
    ObjectMask mask;
};

Capture statuette_at(double distance_cm, int ss = 2) {
    const Scene s = statuette_scene();
    const CameraRig rig;
    CaptureParams p;
    p.distance_cm = distance_cm;
    p.supersampling = ss;
    return {render_raw(s, rig, p), project_object_mask(s, rig, p)};
}

const Capture& sharp70() {
    static const Capture c = statuette_at(70.0);
    return c;
}

RawH3DImage tiled(int n, int p, const std::vector<float>& tile) {
    RawH3DImage raw;
    raw.pixels = Image(n * p, n * p, 1);
    GridLayout g;
    g.pitch_px = p;
    g.origin_x_px = g.origin_y_px = p / 2.0;
    g.cols = g.rows = n;
    raw.grid = g;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            for (int v = 0; v < p; ++v)
                for (int u = 0; u < p; ++u) raw.pixels.at(i * p + u, j * p + v) = tile[static_cast<std::size_t>(v * p + u)];
    return raw;
}

}  // namespace

TEST(Coverage, BoxFullyInterior) {
    const CoverageResult c = coverage(ObjectBox{100, 200, 300, 500}, 1000, 1000);
    EXPECT_DOUBLE_EQ(c.coverage_ratio, 1.0);
    EXPECT_DOUBLE_EQ(c.fill_ratio, 0.06);
}

TEST(Coverage, BoxHalfOutside) {
    EXPECT_DOUBLE_EQ(coverage(ObjectBox{-100, 200, 100, 400}, 1000, 1000).coverage_ratio, 0.5);
    EXPECT_DOUBLE_EQ(coverage(ObjectBox{900, 900, 1100, 1000}, 1000, 1000).coverage_ratio, 0.5);
}

TEST(Coverage, SlidingOutNeverIncreases) {
    double prev = 2.0;
    for (double x = 500; x <= 1300; x += 50) {
        const double c = coverage(ObjectBox{x, 400, x + 200, 600}, 1000, 1000).coverage_ratio;
        EXPECT_LE(c, prev);
        prev = c;
    }
    EXPECT_EQ(prev, 0.0);
}

TEST(Coverage, MaskCountsCellsInsideFrame) {
    ObjectMask m;
    m.origin_i = -2;
    m.origin_j = 0;
    m.width = 4;
    m.height = 2;
    m.frame_cols = m.frame_rows = 10;
    m.cells.assign(8, 1);
    const CoverageResult c = coverage(m, 0, 0);
    EXPECT_DOUBLE_EQ(c.coverage_ratio, 0.5);
    EXPECT_DOUBLE_EQ(c.fill_ratio, 4.0 / 100.0);
}

TEST(Coverage, EmptyObjectRejected) {
    ObjectMask m;
    m.width = m.height = 3;
    m.frame_cols = m.frame_rows = 10;
    m.cells.assign(9, 0);
    EXPECT_THROW(coverage(m, 0, 0), InputError);
    EXPECT_THROW(coverage(ObjectBox{10, 10, 10, 20}, 100, 100), InputError);
}

TEST(Coverage, StatuetteTooCloseAndAtPlannedDistance) {
    EXPECT_DOUBLE_EQ(coverage(sharp70().mask, 1000, 1000).coverage_ratio, 1.0);
    const Capture near = statuette_at(30.0, 1);
    EXPECT_LT(coverage(near.mask, 1000, 1000).coverage_ratio, 1.0);
    const QualityReport r = assess(near.raw, near.raw.grid, near.mask);
    EXPECT_FALSE(r.coverage_pass);
    EXPECT_FALSE(r.overall_pass);
}

TEST(Detail, ConstantImageScoresZero) {
    RawH3DImage raw;
    raw.pixels = Image(100, 100, 1);
    for (float& v : raw.pixels.data()) v = 0.4f;
    GridLayout g;
    g.cols = g.rows = 10;
    EXPECT_EQ(detail_score(raw, g), 0.0);
}

TEST(Detail, GridRequired) { EXPECT_THROW(detail_score(sharp70().raw, std::nullopt), InputError); }

TEST(Detail, BlurDropsScoreTenfold) {
    const RawH3DImage& raw = sharp70().raw;
    const double sharp = detail_score(raw, raw.grid), blurred = detail_score(defocus_blur(raw, 2.0), raw.grid);
    EXPECT_GT(sharp, 0.0);
    EXPECT_GE(sharp, 10.0 * blurred);
}

TEST(Detail, MonotoneInBlur) {
    const RawH3DImage& raw = sharp70().raw;
    double prev = detail_score(raw, raw.grid);
    for (double s : {0.5, 1.0, 1.5, 2.0, 3.0}) {
        const double d = detail_score(defocus_blur(raw, s), raw.grid);
        EXPECT_LE(d, prev) << "sigma " << s;
        prev = d;
    }
}

TEST(Detail, InvariantUnderBrightnessScaling) {
    const RawH3DImage& raw = sharp70().raw;
    RawH3DImage dim = raw;
    for (float& v : dim.pixels.data()) v *= 0.5f;
    const double a = detail_score(raw, raw.grid), b = detail_score(dim, raw.grid);
    EXPECT_NEAR(b / a, 1.0, 1e-4);
}

TEST(Detail, CorpusMedianMatchesCalibration) {
    const double m = corpus_median_detail(data_dir() / "detail_corpus.json");
    EXPECT_NEAR(m / kCorpusMedianDetail, 1.0, 1e-3);
    EXPECT_DOUBLE_EQ(QualityThresholds{}.detail_min, 0.1 * kCorpusMedianDetail);
}

TEST(Replication, DuplicatedMicroimagesFlagNoParallax) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0.2f, 0.8f);
    std::vector<float> tile(100);
    for (float& v : tile) v = u(rng);
    const RawH3DImage raw = tiled(10, 10, tile);
    const ReplicationResult r = replication(raw, raw.grid);
    EXPECT_TRUE(r.no_parallax);
    EXPECT_FALSE(r.degenerate);
    EXPECT_NEAR(r.score, 1.0, 1e-9);
    EXPECT_EQ(r.mean_shift_px, 0.0);
    const QualityReport q = assess(raw, raw.grid, ObjectBox{0, 0, 50, 50});
    EXPECT_FALSE(q.replication_pass);
    ASSERT_FALSE(q.failures.empty());
    EXPECT_NE(q.failures.back().find("no parallax"), std::string::npos);
}

TEST(Replication, ConstantMicroimagesAreDegenerate) {
    const RawH3DImage raw = tiled(6, 10, std::vector<float>(100, 0.5f));
    const ReplicationResult r = replication(raw, raw.grid);
    EXPECT_TRUE(r.degenerate);
    const QualityReport q = assess(raw, raw.grid, ObjectBox{0, 0, 30, 30});
    EXPECT_FALSE(q.replication_pass);
    EXPECT_NE(q.failures.back().find("degenerate"), std::string::npos);
}

TEST(Replication, NeedsTwoByTwo) {
    RawH3DImage raw = tiled(2, 10, std::vector<float>(100, 0.5f));
    raw.grid->cols = 1;
    EXPECT_THROW(replication(raw, raw.grid), InputError);
    EXPECT_THROW(replication(raw, std::nullopt), InputError);
}

TEST(Replication, PointSourceShiftMatchesDisparity) {
    CaptureParams p;
    p.supersampling = 2;
    const CameraRig rig;
    const RawH3DImage raw = render_raw(point_scene(0.0, 1.0), rig, p);
    const double d = predicted_disparity(rig, 70.0, 0.0);
    const ReplicationResult r = replication(raw, raw.grid);
    ASSERT_GT(r.pairs, 0);
    EXPECT_GE(r.score, 0.9);
    EXPECT_LE(std::abs(r.median_shift_px - d), 0.25);
}

TEST(Replication, HeavyNoiseFails) {
    const Scene s = statuette_scene();
    CaptureParams p;
    p.supersampling = 2;
    p.noise_enabled = true;
    p.noise_seed = 9;
    p.noise_sigma0 = 0.2;
    const RawH3DImage raw = render_raw(s, CameraRig{}, p);
    const QualityReport q = assess(raw, raw.grid, project_object_mask(s, CameraRig{}, p));
    EXPECT_LT(q.replication_score, 0.9);
    EXPECT_FALSE(q.replication_pass);
}

TEST(Replication, ScoresWithinRange) {
    const RawH3DImage& raw = sharp70().raw;
    const ReplicationResult r = replication(raw, raw.grid);
    EXPECT_GE(r.score, -1.0);
    EXPECT_LE(r.score, 1.0);
    EXPECT_GE(r.mean_shift_px, 0.0);
}

TEST(Assess, SharpAtSeventyPasses) {
    const QualityReport q = assess(sharp70().raw, sharp70().raw.grid, sharp70().mask);
    EXPECT_TRUE(q.coverage_pass);
    EXPECT_TRUE(q.detail_pass);
    EXPECT_TRUE(q.replication_pass);
    EXPECT_TRUE(q.overall_pass);
    EXPECT_TRUE(q.failures.empty());
    EXPECT_GT(q.mean_neighbor_shift_px, 0.0);
    EXPECT_LE(q.mean_neighbor_shift_px, 2.5);
}

TEST(Assess, BlurredFailsOnDetailOnly) {
    const QualityReport q = assess(defocus_blur(sharp70().raw, 2.0), sharp70().raw.grid, sharp70().mask);
    EXPECT_TRUE(q.coverage_pass);
    EXPECT_FALSE(q.detail_pass);
    EXPECT_FALSE(q.overall_pass);
    ASSERT_FALSE(q.failures.empty());
    EXPECT_EQ(q.failures.front().rfind("detail:", 0), 0u);
}

TEST(Assess, FarAssetFailsOnFill) {
    const Capture far = statuette_at(95.0);
    const QualityReport q = assess(far.raw, far.raw.grid, far.mask);
    EXPECT_DOUBLE_EQ(q.coverage_ratio, 1.0);
    EXPECT_LT(q.fill_ratio, q.thresholds.fill_min);
    EXPECT_FALSE(q.coverage_pass);
    EXPECT_FALSE(q.overall_pass);
}

TEST(Assess, Deterministic) {
    const QualityReport a = assess(sharp70().raw, sharp70().raw.grid, sharp70().mask);
    const QualityReport b = assess(sharp70().raw, sharp70().raw.grid, sharp70().mask);
    EXPECT_EQ(a.detail_score, b.detail_score);
    EXPECT_EQ(a.replication_score, b.replication_score);
    EXPECT_EQ(a.mean_neighbor_shift_px, b.mean_neighbor_shift_px);
}

TEST(Assess, OverallIsConjunction) {
    QualityThresholds th;
    th.ncc_min = 1.0;  // unreachable on a rendered statuette
    const QualityReport q = assess(sharp70().raw, sharp70().raw.grid, sharp70().mask, th);
    EXPECT_TRUE(q.coverage_pass);
    EXPECT_TRUE(q.detail_pass);
    EXPECT_FALSE(q.replication_pass);
    EXPECT_FALSE(q.overall_pass);
}

TEST(Assess, InvalidThresholdsRejected) {
    QualityThresholds th;
    th.fill_min = 0.9;
    th.fill_max = 0.5;
    EXPECT_THROW(assess(sharp70().raw, sharp70().raw.grid, sharp70().mask, th), std::invalid_argument);
    th = {};
    th.ncc_min = 1.5;
    EXPECT_THROW(th.validate(), std::invalid_argument);
}
