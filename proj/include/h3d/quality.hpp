#pragma once

// Raw-image acceptance scoring: object in frame, distinguishable detail, and microimages
// that replicate the same content with a small parallax shift.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "h3d/capture.hpp"
#include "h3d/error.hpp"
#include "h3d/image.hpp"
#include "h3d/object.hpp"
#include "h3d/optics.hpp"
#include "h3d/parallel.hpp"

namespace h3d {

/// Median detail score of the bundled sharp calibration corpus (see data/detail_corpus.json);
/// the default detail threshold is 10% of it.
inline constexpr double kCorpusMedianDetail = 1.530297;
inline constexpr double kDefaultDetailThreshold = 0.1 * kCorpusMedianDetail;

struct QualityThresholds {
    double coverage_min = 1.0;
    double fill_min = 0.3;
    double fill_max = 0.95;
    double detail_min = kDefaultDetailThreshold;
    double ncc_min = 0.9;
    /// Mean neighbour shift must lie in (0, max_shift_fraction * pitch].
    double max_shift_fraction = 0.25;
    /// Flat-fielded tile standard deviation, relative to the raster mean, above which a
    /// microimage counts as carrying content.
    double informative_contrast = 0.02;

    void validate() const {
        if (!(coverage_min >= 0.0 && coverage_min <= 1.0)) throw std::invalid_argument("thresholds: coverage_min must be in [0, 1]");
        if (!(fill_min >= 0.0 && fill_min <= fill_max && fill_max <= 1.0))
            throw std::invalid_argument("thresholds: need 0 <= fill_min <= fill_max <= 1");
        if (!(detail_min >= 0.0)) throw std::invalid_argument("thresholds: detail_min must be >= 0");
        if (!(ncc_min >= -1.0 && ncc_min <= 1.0)) throw std::invalid_argument("thresholds: ncc_min must be in [-1, 1]");
        if (!(max_shift_fraction > 0.0 && max_shift_fraction <= 0.5))
            throw std::invalid_argument("thresholds: max_shift_fraction must be in (0, 0.5]");
        if (!(informative_contrast >= 0.0)) throw std::invalid_argument("thresholds: informative_contrast must be >= 0");
    }
};

struct CoverageResult {
    double coverage_ratio = 0.0;
    double fill_ratio = 0.0;
};

struct ReplicationResult {
    double score = 0.0;            // median peak NCC
    double mean_shift_px = 0.0;    // mean |argmax shift|
    double median_shift_px = 0.0;  // median signed argmax shift
    int pairs = 0;
    bool no_parallax = false;
    bool degenerate = false;
};

struct QualityReport {
    double coverage_ratio = 0.0;
    double fill_ratio = 0.0;
    double detail_score = 0.0;
    double replication_score = 0.0;
    double mean_neighbor_shift_px = 0.0;
    double median_neighbor_shift_px = 0.0;
    int replication_pairs = 0;
    int informative_microimages = 0;
    bool coverage_pass = false;
    bool detail_pass = false;
    bool replication_pass = false;
    bool overall_pass = false;
    /// Human-readable reason per failed criterion, prefixed by its name.
    std::vector<std::string> failures;
    QualityThresholds thresholds;
};

/// Microimages resampled to p x p tiles (p = floor(pitch)) in the lattice frame, luma only.
/// Sample (u, v) of tile (i, j) is taken at center(i, j) + R(slant)(u - (p-1)/2, v - (p-1)/2),
/// which lands on pixel centres for axis-aligned grids with integer pitch.
struct TileSet {
    int p = 0;
    int cols = 0;
    int rows = 0;
    std::vector<float> values;  // tile-major, then row-major within a tile

    const float* tile(int i, int j) const { return values.data() + (static_cast<std::size_t>(j) * cols + i) * p * p; }
    float* tile(int i, int j) { return values.data() + (static_cast<std::size_t>(j) * cols + i) * p * p; }
};

inline TileSet extract_tiles(const Image& raster, const GridLayout& grid) {
    const Image g = to_gray(raster);
    TileSet ts;
    ts.p = static_cast<int>(std::floor(grid.pitch_px + 1e-9));
    ts.cols = grid.cols;
    ts.rows = grid.rows;
    if (ts.p < 1) throw LayoutError("extract_tiles: pitch below one pixel");
    ts.values.assign(static_cast<std::size_t>(ts.cols) * ts.rows * ts.p * ts.p, 0.0f);
    const double th = deg_to_rad(grid.slant_deg);
    const double half = (ts.p - 1) / 2.0;
    parallel_for(ts.rows, [&](int j) {
        for (int i = 0; i < ts.cols; ++i) {
            const Vec2 c = grid.center(i, j);
            float* t = ts.tile(i, j);
            for (int v = 0; v < ts.p; ++v)
                for (int u = 0; u < ts.p; ++u) {
                    const Vec2 s = c + rotate(Vec2{u - half, v - half}, th);
                    t[v * ts.p + u] = g.sample_sensor(s.x, s.y);
                }
        }
    });
    return ts;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    if (v.size() % 2 == 1) return v[m];
    const double hi = v[m];
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
}

/// Divides every tile by the per-position median tile (normalised to mean 1), removing
/// lenslet shading. Left untouched when the median tile is degenerate.
inline void flat_field(TileSet& ts) {
    const int n = ts.cols * ts.rows, pp = ts.p * ts.p;
    if (n == 0) return;
    std::vector<double> field(static_cast<std::size_t>(pp));
    std::vector<double> column(static_cast<std::size_t>(n));
    for (int k = 0; k < pp; ++k) {
        for (int t = 0; t < n; ++t) column[static_cast<std::size_t>(t)] = ts.values[static_cast<std::size_t>(t) * pp + k];
        field[static_cast<std::size_t>(k)] = median_of(column);
    }
    const double mean = std::accumulate(field.begin(), field.end(), 0.0) / pp;
    if (!(mean > 1e-6)) return;
    for (double& f : field) {
        f /= mean;
        if (!(f > 1e-3)) return;
    }
    for (int t = 0; t < n; ++t)
        for (int k = 0; k < pp; ++k) ts.values[static_cast<std::size_t>(t) * pp + k] /= static_cast<float>(field[static_cast<std::size_t>(k)]);
}

inline double raster_mean(const TileSet& ts) {
    if (ts.values.empty()) return 0.0;
    return std::accumulate(ts.values.begin(), ts.values.end(), 0.0) / static_cast<double>(ts.values.size());
}

inline double tile_std(const float* t, int pp) {
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < pp; ++k) {
        s += t[k];
        s2 += double(t[k]) * t[k];
    }
    const double m = s / pp;
    return std::sqrt(std::max(0.0, s2 / pp - m * m));
}

/// Flat-fielded tiles plus the informative flags shared by detail and replication.
struct PreparedTiles {
    TileSet tiles;
    double mean = 0.0;
    std::vector<char> informative;
    int informative_count = 0;
};

inline void mark_informative(PreparedTiles& pt, double informative_contrast) {
    pt.mean = raster_mean(pt.tiles);
    const int n = pt.tiles.cols * pt.tiles.rows, pp = pt.tiles.p * pt.tiles.p;
    pt.informative.assign(static_cast<std::size_t>(n), 0);
    pt.informative_count = 0;
    if (pt.mean > 0.0)
        for (int t = 0; t < n; ++t)
            if (tile_std(pt.tiles.values.data() + static_cast<std::size_t>(t) * pp, pp) > informative_contrast * pt.mean) {
                pt.informative[static_cast<std::size_t>(t)] = 1;
                ++pt.informative_count;
            }
}

inline PreparedTiles prepare_tiles(const Image& raster, const GridLayout& grid, double informative_contrast) {
    PreparedTiles pt;
    pt.tiles = extract_tiles(raster, grid);
    TileSet unflat = pt.tiles;
    flat_field(pt.tiles);
    mark_informative(pt, informative_contrast);
    if (pt.informative_count == 0) {
        // Every microimage identical (no parallax anywhere) looks like pure shading to the
        // flat field, which would then erase all content. Score the raw tiles instead.
        PreparedTiles raw{std::move(unflat), 0.0, {}, 0};
        mark_informative(raw, informative_contrast);
        if (raw.informative_count > 0) return raw;
    }
    return pt;
}

/// Variance of the 4-neighbour Laplacian over the tile interior.
inline double tile_laplacian_variance(const float* t, int p, double scale) {
    if (p < 3) return 0.0;
    double s = 0.0, s2 = 0.0;
    int n = 0;
    for (int v = 1; v < p - 1; ++v)
        for (int u = 1; u < p - 1; ++u) {
            const double l = (double(t[v * p + u - 1]) + t[v * p + u + 1] + t[(v - 1) * p + u] + t[(v + 1) * p + u] -
                              4.0 * t[v * p + u]) * scale;
            s += l;
            s2 += l * l;
            ++n;
        }
    const double m = s / n;
    return std::max(0.0, s2 / n - m * m);
}

inline double detail_from(const PreparedTiles& pt) {
    if (pt.informative_count == 0 || !(pt.mean > 0.0)) return 0.0;
    const int n = pt.tiles.cols * pt.tiles.rows, p = pt.tiles.p;
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(pt.informative_count));
    for (int t = 0; t < n; ++t)
        if (pt.informative[static_cast<std::size_t>(t)])
            scores.push_back(tile_laplacian_variance(pt.tiles.values.data() + static_cast<std::size_t>(t) * p * p, p, 1.0 / pt.mean));
    return median_of(std::move(scores));
}

/// Peak NCC of tile b against tile a over integer shifts along one lattice axis:
/// b(u + s) is compared with a(u), i.e. a positive shift means content moved forward.
inline std::pair<double, int> peak_ncc(const float* a, const float* b, int p, bool along_x) {
    const int smax = p / 2, min_overlap = (p + 1) / 2;
    double best = -2.0;
    int best_s = 0;
    for (int s = -smax; s <= smax; ++s) {
        const int lo = std::max(0, -s), hi = std::min(p, p - s);
        if (hi - lo < min_overlap) continue;
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        int n = 0;
        for (int v = 0; v < p; ++v)
            for (int u = lo; u < hi; ++u) {
                const double x = along_x ? a[v * p + u] : a[u * p + v];
                const double y = along_x ? b[v * p + u + s] : b[(u + s) * p + v];
                sa += x; sb += y; saa += x * x; sbb += y * y; sab += x * y;
                ++n;
            }
        const double va = saa - sa * sa / n, vb = sbb - sb * sb / n;
        if (!(va > 1e-12 && vb > 1e-12)) continue;
        const double r = std::clamp((sab - sa * sb / n) / std::sqrt(va * vb), -1.0, 1.0);
        // ties go to the smallest |shift|
        if (r > best + 1e-12 || (std::abs(r - best) <= 1e-12 && std::abs(s) < std::abs(best_s))) {
            best = r;
            best_s = s;
        }
    }
    return {best, best_s};
}

inline ReplicationResult replication_from(const PreparedTiles& pt) {
    const TileSet& ts = pt.tiles;
    ReplicationResult rr;
    struct Pair { int a, b; bool along_x; };
    std::vector<Pair> pairs;
    for (int j = 0; j < ts.rows; ++j)
        for (int i = 0; i < ts.cols; ++i) {
            const int t = j * ts.cols + i;
            if (!pt.informative[static_cast<std::size_t>(t)]) continue;
            if (i + 1 < ts.cols && pt.informative[static_cast<std::size_t>(t + 1)]) pairs.push_back({t, t + 1, true});
            if (j + 1 < ts.rows && pt.informative[static_cast<std::size_t>(t + ts.cols)]) pairs.push_back({t, t + ts.cols, false});
        }
    std::vector<double> ncc(pairs.size(), -2.0);
    std::vector<int> shift(pairs.size(), 0);
    const int pp = ts.p * ts.p;
    parallel_for(static_cast<int>(pairs.size()), [&](int k) {
        const Pair& q = pairs[static_cast<std::size_t>(k)];
        const auto [r, s] = peak_ncc(ts.values.data() + static_cast<std::size_t>(q.a) * pp,
                                     ts.values.data() + static_cast<std::size_t>(q.b) * pp, ts.p, q.along_x);
        ncc[static_cast<std::size_t>(k)] = r;
        shift[static_cast<std::size_t>(k)] = s;
    });
    std::vector<double> scores, shifts;
    double abs_sum = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (ncc[k] < -1.5) continue;  // no valid overlap variance
        scores.push_back(ncc[k]);
        shifts.push_back(shift[k]);
        abs_sum += std::abs(shift[k]);
    }
    rr.pairs = static_cast<int>(scores.size());
    if (scores.empty()) {
        rr.degenerate = true;
        return rr;
    }
    rr.score = median_of(scores);
    rr.median_shift_px = median_of(shifts);
    rr.mean_shift_px = abs_sum / static_cast<double>(scores.size());
    rr.no_parallax = abs_sum == 0.0;
    return rr;
}

}  // namespace detail

/// Fraction of the object inside the frame and object area over frame area.
/// A mask is measured in lenslet cells against the mask's frame; a box in sensor pixels
/// against the raster.
inline CoverageResult coverage(const ObjectInfo& object, int frame_width_px, int frame_height_px) {
    CoverageResult r;
    if (const auto* m = std::get_if<ObjectMask>(&object)) {
        if (m->frame_cols <= 0 || m->frame_rows <= 0) throw InputError("coverage: mask has no frame");
        long total = 0, inside = 0;
        for (int j = 0; j < m->height; ++j)
            for (int i = 0; i < m->width; ++i) {
                if (!m->at(i, j)) continue;
                ++total;
                const int li = i + m->origin_i, lj = j + m->origin_j;
                if (li >= 0 && lj >= 0 && li < m->frame_cols && lj < m->frame_rows) ++inside;
            }
        if (total == 0) throw InputError("coverage: empty object mask");
        r.coverage_ratio = double(inside) / double(total);
        r.fill_ratio = double(inside) / (double(m->frame_cols) * m->frame_rows);
        return r;
    }
    const auto& b = std::get<ObjectBox>(object);
    const double area = (b.x1 - b.x0) * (b.y1 - b.y0);
    if (!(b.x1 > b.x0 && b.y1 > b.y0)) throw InputError("coverage: empty object box");
    if (frame_width_px <= 0 || frame_height_px <= 0) throw InputError("coverage: empty frame");
    const double ix = std::max(0.0, std::min(b.x1, double(frame_width_px)) - std::max(b.x0, 0.0));
    const double iy = std::max(0.0, std::min(b.y1, double(frame_height_px)) - std::max(b.y0, 0.0));
    r.coverage_ratio = ix * iy / area;
    r.fill_ratio = ix * iy / (double(frame_width_px) * frame_height_px);
    return r;
}

inline double detail_score(const RawH3DImage& raw, const std::optional<GridLayout>& grid,
                     double informative_contrast = QualityThresholds{}.informative_contrast) {
    if (!grid) throw InputError("detail_score: grid metadata required");
    return detail::detail_from(detail::prepare_tiles(raw.pixels, *grid, informative_contrast));
}

inline ReplicationResult replication(const RawH3DImage& raw, const std::optional<GridLayout>& grid,
                                     double informative_contrast = QualityThresholds{}.informative_contrast) {
    if (!grid) throw InputError("replication: grid metadata required");
    if (grid->cols < 2 || grid->rows < 2) throw InputError("replication: need at least 2x2 microimages");
    return detail::replication_from(detail::prepare_tiles(raw.pixels, *grid, informative_contrast));
}

inline QualityReport assess(const RawH3DImage& raw, const std::optional<GridLayout>& grid, const ObjectInfo& object,
                            const QualityThresholds& th = {}) {
    th.validate();
    if (!grid) throw InputError("assess: grid metadata required");
    if (grid->cols < 2 || grid->rows < 2) throw InputError("assess: need at least 2x2 microimages");
    QualityReport rep;
    rep.thresholds = th;

    const CoverageResult cov = coverage(object, raw.pixels.width(), raw.pixels.height());
    rep.coverage_ratio = cov.coverage_ratio;
    rep.fill_ratio = cov.fill_ratio;
    const bool cov_ok = cov.coverage_ratio >= th.coverage_min - 1e-12;
    const bool fill_ok = cov.fill_ratio >= th.fill_min && cov.fill_ratio <= th.fill_max;
    rep.coverage_pass = cov_ok && fill_ok;
    if (!cov_ok) rep.failures.push_back("coverage: object not fully in frame (coverage " + std::to_string(cov.coverage_ratio) + ")");
    if (!fill_ok)
        rep.failures.push_back("coverage: fill ratio " + std::to_string(cov.fill_ratio) + " outside [" +
                               std::to_string(th.fill_min) + ", " + std::to_string(th.fill_max) + "]");

    const detail::PreparedTiles pt = detail::prepare_tiles(raw.pixels, *grid, th.informative_contrast);
    rep.informative_microimages = pt.informative_count;
    rep.detail_score = detail::detail_from(pt);
    rep.detail_pass = rep.detail_score >= th.detail_min;
    if (!rep.detail_pass)
        rep.failures.push_back("detail: score " + std::to_string(rep.detail_score) + " below " + std::to_string(th.detail_min));

    const ReplicationResult rr = detail::replication_from(pt);
    rep.replication_score = rr.score;
    rep.mean_neighbor_shift_px = rr.mean_shift_px;
    rep.median_neighbor_shift_px = rr.median_shift_px;
    rep.replication_pairs = rr.pairs;
    const double max_shift = th.max_shift_fraction * grid->pitch_px;
    if (rr.degenerate) {
        rep.failures.push_back("replication: degenerate (no microimage pair with content)");
    } else if (rr.no_parallax) {
        rep.failures.push_back("replication: no parallax (identical microimages)");
    } else if (rr.score < th.ncc_min) {
        rep.failures.push_back("replication: NCC " + std::to_string(rr.score) + " below " + std::to_string(th.ncc_min));
    } else if (!(rr.mean_shift_px <= max_shift)) {
        rep.failures.push_back("replication: mean shift " + std::to_string(rr.mean_shift_px) + " px above " +
                               std::to_string(max_shift));
    } else {
        rep.replication_pass = true;
    }
    rep.overall_pass = rep.coverage_pass && rep.detail_pass && rep.replication_pass;
    return rep;
}

}  // namespace h3d
