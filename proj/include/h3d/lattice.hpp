#pragma once

// Microimage lattice recovery from raster content alone.
//
// Neighbouring microimages are shifted copies of each other, so raw content repeats with
// the replication vector Q = (pitch + D) along each lattice axis, D being the local
// disparity, while microimage borders and lenslet shading repeat with the true pitch.
// Autocorrelation of the gradient magnitude gives the lattice axes and one of the two
// periods. Comparing samples one found period apart cancels whatever repeats with it
// and leaves the other period, read off a 1D periodogram along the axes. The period
// whose shift leaves the smaller residual is the content one.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <optional>
#include <vector>

#include "h3d/error.hpp"
#include "h3d/image.hpp"
#include "h3d/optics.hpp"

namespace h3d {

struct LatticeEstimateOptions {
    double min_pitch_px = 3.0;
    double max_pitch_px = 64.0;
    /// Normalised autocorrelation a lattice peak must reach to count as periodicity.
    double min_peak = 0.05;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

inline int next_fast_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int f : {2, 3, 5, 7})
            while (r % f == 0) r /= f;
        if (r == 1) return m;
    }
}

/// Normalised, overlap-unbiased autocorrelation of a zero-mean version of `f` for lags
/// |lx|, |ly| <= radius. Value at lag 0 is 1.
class Autocorrelation {
public:
    Autocorrelation(const Image& f, int radius) : radius_(radius), side_(2 * radius + 1) {
        const int W = f.width(), H = f.height();
        const double mean = f.mean();
        double var = 0.0;
        for (float v : f.data()) var += (v - mean) * (v - mean);
        values_.assign(static_cast<std::size_t>(side_) * side_, 0.0);
        if (!(var > 1e-12 * W * H)) return;
        valid_ = true;

        const int NW = next_fast_size(W + radius + 1), NH = next_fast_size(H + radius + 1);
        const int NWc = NW / 2 + 1;
        double* in = fftw_alloc_real(static_cast<std::size_t>(NW) * NH);
        fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(NWc) * NH);
        fftw_plan fwd, inv;
        {
            std::lock_guard lock(fftw_planner_mutex());
            fwd = fftw_plan_dft_r2c_2d(NH, NW, in, spec, FFTW_ESTIMATE);
            inv = fftw_plan_dft_c2r_2d(NH, NW, spec, in, FFTW_ESTIMATE);
        }
        std::fill(in, in + static_cast<std::size_t>(NW) * NH, 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) in[static_cast<std::size_t>(y) * NW + x] = f.at(x, y) - mean;
        fftw_execute(fwd);
        for (std::size_t k = 0; k < static_cast<std::size_t>(NWc) * NH; ++k) {
            spec[k][0] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
            spec[k][1] = 0.0;
        }
        fftw_execute(inv);
        const double a0 = in[0] / (double(W) * H);
        for (int ly = -radius; ly <= radius; ++ly)
            for (int lx = -radius; lx <= radius; ++lx) {
                const int wx = (lx + NW) % NW, wy = (ly + NH) % NH;
                const double overlap = double(W - std::abs(lx)) * (H - std::abs(ly));
                const double v = overlap > 0 ? in[static_cast<std::size_t>(wy) * NW + wx] / overlap : 0.0;
                values_[static_cast<std::size_t>(ly + radius) * side_ + (lx + radius)] = v / a0;
            }
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(fwd);
            fftw_destroy_plan(inv);
        }
        fftw_free(in);
        fftw_free(spec);
    }

    bool valid() const { return valid_; }
    int radius() const { return radius_; }
    bool in_range(int lx, int ly) const { return std::abs(lx) <= radius_ && std::abs(ly) <= radius_; }
    double at(int lx, int ly) const {
        return values_[static_cast<std::size_t>(ly + radius_) * side_ + (lx + radius_)];
    }

    bool is_local_max(int lx, int ly) const {
        if (!in_range(lx - 1, ly - 1) || !in_range(lx + 1, ly + 1)) return false;
        const double c = at(lx, ly);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if ((dx || dy) && at(lx + dx, ly + dy) > c) return false;
        return true;
    }

    /// Sub-lag peak position by separable parabolic interpolation.
    Vec2 refine(int lx, int ly) const {
        auto vertex = [](double l, double c, double r) {
            const double den = l - 2.0 * c + r;
            return den < 0.0 ? std::clamp(0.5 * (l - r) / den, -0.5, 0.5) : 0.0;
        };
        return {lx + vertex(at(lx - 1, ly), at(lx, ly), at(lx + 1, ly)),
                ly + vertex(at(lx, ly - 1), at(lx, ly), at(lx, ly + 1))};
    }

private:
    int radius_;
    int side_;
    bool valid_ = false;
    std::vector<double> values_;
};

/// f minus its box mean over a (2r+1)^2 window (edge-normalised), removing large-scale
/// shading so lattice peaks stand out from the autocorrelation baseline.
inline Image high_pass(const Image& f, int r) {
    const int W = f.width(), H = f.height();
    std::vector<double> integral(static_cast<std::size_t>(W + 1) * (H + 1), 0.0);
    for (int y = 0; y < H; ++y) {
        double row = 0.0;
        for (int x = 0; x < W; ++x) {
            row += f.at(x, y);
            integral[static_cast<std::size_t>(y + 1) * (W + 1) + x + 1] = integral[static_cast<std::size_t>(y) * (W + 1) + x + 1] + row;
        }
    }
    Image out(W, H, 1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int x0 = std::max(0, x - r), x1 = std::min(W, x + r + 1);
            const int y0 = std::max(0, y - r), y1 = std::min(H, y + r + 1);
            auto I = [&](int xx, int yy) { return integral[static_cast<std::size_t>(yy) * (W + 1) + xx]; };
            const double s = I(x1, y1) - I(x0, y1) - I(x1, y0) + I(x0, y0);
            out.at(x, y) = static_cast<float>(f.at(x, y) - s / (double(x1 - x0) * (y1 - y0)));
        }
    return out;
}

/// Strongest-lattice-peak search: the shortest lag near +x whose local maximum is at least
/// half the strongest one, then its 90-degree partner.
inline std::optional<std::pair<Vec2, Vec2>> coarse_lattice(const Autocorrelation& ac,
                                                           const LatticeEstimateOptions& opt) {
    const double cone = std::tan(deg_to_rad(kMaxSlantDeg + 5.0));
    const int rmax = std::min(ac.radius() - 2, static_cast<int>(std::ceil(opt.max_pitch_px * 1.5)));
    struct Cand { int lx, ly; double v, r; };
    std::vector<Cand> cands;
    double vmax = 0.0;
    for (int lx = static_cast<int>(std::floor(opt.min_pitch_px)); lx <= rmax; ++lx)
        for (int ly = -rmax; ly <= rmax; ++ly) {
            if (std::abs(ly) > lx * cone + 1.0) continue;
            if (!ac.is_local_max(lx, ly)) continue;
            const double v = ac.at(lx, ly);
            if (v < opt.min_peak) continue;
            const double r = std::hypot(lx, ly);
            if (r < opt.min_pitch_px || r > opt.max_pitch_px * 1.3) continue;
            cands.push_back({lx, ly, v, r});
            vmax = std::max(vmax, v);
        }
    if (cands.empty()) return std::nullopt;
    const Cand* best = nullptr;
    for (const Cand& c : cands)
        if (c.v >= 0.5 * vmax && (!best || c.r < best->r)) best = &c;
    const Vec2 b1 = ac.refine(best->lx, best->ly);
    // partner near b1 rotated by +90 degrees
    const Vec2 guess{-b1.y, b1.x};
    std::optional<Vec2> b2;
    double bv = -1.0;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            const int lx = static_cast<int>(std::lround(guess.x)) + dx, ly = static_cast<int>(std::lround(guess.y)) + dy;
            if (!ac.is_local_max(lx, ly)) continue;
            if (ac.at(lx, ly) > bv) {
                bv = ac.at(lx, ly);
                b2 = ac.refine(lx, ly);
            }
        }
    if (!b2 || bv < opt.min_peak) return std::nullopt;
    return std::make_pair(b1, *b2);
}

/// Least-squares lattice basis from autocorrelation peaks at growing multiples.
inline std::pair<Vec2, Vec2> fit_lattice(const Autocorrelation& ac, Vec2 b1, Vec2 b2, double min_peak) {
    const double reach = ac.radius() - 3.0;
    for (int n : {1, 2, 3, 5, 8, 12, 18, 27, 40, 60}) {
        double s11 = 0, s12 = 0, s22 = 0, sx1 = 0, sx2 = 0, sy1 = 0, sy2 = 0;
        int used = 0;
        for (int j = -n; j <= n; ++j)
            for (int i = -n; i <= n; ++i) {
                if (i == 0 && j == 0) continue;
                if (j < 0 || (j == 0 && i < 0)) continue;  // symmetric half-plane
                const Vec2 pred = b1 * i + b2 * j;
                if (std::abs(pred.x) > reach || std::abs(pred.y) > reach) continue;
                int bx = static_cast<int>(std::lround(pred.x)), by = static_cast<int>(std::lround(pred.y));
                double bv = -1e300;
                int mx = bx, my = by;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        if (ac.at(bx + dx, by + dy) > bv) {
                            bv = ac.at(bx + dx, by + dy);
                            mx = bx + dx;
                            my = by + dy;
                        }
                if (bv < min_peak || !ac.is_local_max(mx, my)) continue;
                const Vec2 p = ac.refine(mx, my);
                if ((p - pred).norm() > 1.0) continue;
                s11 += double(i) * i; s12 += double(i) * j; s22 += double(j) * j;
                sx1 += i * p.x; sx2 += j * p.x; sy1 += i * p.y; sy2 += j * p.y;
                ++used;
            }
        const double det = s11 * s22 - s12 * s12;
        if (used < 3 || std::abs(det) < 1e-9) {
            if (n == 1) continue;
            break;
        }
        b1 = {(s22 * sx1 - s12 * sx2) / det, (s22 * sy1 - s12 * sy2) / det};
        b2 = {(s11 * sx2 - s12 * sx1) / det, (s11 * sy2 - s12 * sy1) / det};
        if (n * std::max(b1.norm(), b2.norm()) > reach) break;
    }
    return {b1, b2};
}

/// |g(s + q1) - g(s)| + |g(s + q2) - g(s)|, zero where the shifted sample leaves the raster.
inline Image replication_residual(const Image& g, Vec2 q1, Vec2 q2, bool use_q1 = true, bool use_q2 = true) {
    Image e(g.width(), g.height(), 1);
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) {
            double s = 0.0;
            if (use_q1 && g.contains_index(x + q1.x, y + q1.y)) s += std::abs(g.sample(x + q1.x, y + q1.y) - g.at(x, y));
            if (use_q2 && g.contains_index(x + q2.x, y + q2.y)) s += std::abs(g.sample(x + q2.x, y + q2.y) - g.at(x, y));
            e.at(x, y) = static_cast<float>(s);
        }
    return e;
}

/// Coordinate of pixel centre (x, y) along a lattice axis rotated by `angle_rad` about `centre`.
inline double axis_coordinate(int x, int y, double angle_rad, Vec2 centre, bool along_x) {
    const Vec2 q = rotate(Vec2{x + 0.5, y + 0.5} - centre, -angle_rad);
    return along_x ? q.x : q.y;
}

/// Weighted projection of `w` onto one lattice axis, binned at `bin` px.
struct AxisProfile {
    double t0 = 0.0, bin = 0.05;
    std::vector<double> values;
    std::vector<double> counts;  // contributing (non-zero) samples per bin
};

inline AxisProfile project_axis(const Image& w, double angle_rad, Vec2 centre, bool along_x, double bin = 0.05) {
    AxisProfile pr;
    pr.bin = bin;
    const double half = 0.5 * std::hypot(w.width(), w.height()) + 1.0;
    pr.t0 = -half;
    pr.values.assign(static_cast<std::size_t>(std::ceil(2.0 * half / bin)) + 1, 0.0);
    pr.counts.assign(pr.values.size(), 0.0);
    for (int y = 0; y < w.height(); ++y)
        for (int x = 0; x < w.width(); ++x) {
            const double t = axis_coordinate(x, y, angle_rad, centre, along_x);
            const auto k = static_cast<std::size_t>((t - pr.t0) / bin);
            pr.values[k] += w.at(x, y);
            if (w.at(x, y) != 0.0f) pr.counts[k] += 1.0;
        }
    return pr;
}

/// Removes the profile's moving average over `window` px, keeping short periods only.
inline void detrend(AxisProfile& pr, double window) {
    const int n = static_cast<int>(pr.values.size());
    const int r = std::max(1, static_cast<int>(window / pr.bin / 2.0));
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + pr.values[static_cast<std::size_t>(i)];
    std::vector<double> out(pr.values.size());
    for (int i = 0; i < n; ++i) {
        const int a = std::max(0, i - r), b = std::min(n, i + r + 1);
        out[static_cast<std::size_t>(i)] = pr.values[static_cast<std::size_t>(i)] - (prefix[static_cast<std::size_t>(b)] - prefix[static_cast<std::size_t>(a)]) / (b - a);
    }
    pr.values = std::move(out);
}

/// Hann taper over the non-empty extent of the profile, suppressing spectral sidelobes.
inline void taper(AxisProfile& pr) {
    std::size_t a = 0, b = pr.counts.size();
    while (a < b && pr.counts[a] == 0.0) ++a;
    while (b > a && pr.counts[b - 1] == 0.0) --b;
    for (std::size_t i = 0; i < pr.values.size(); ++i) {
        if (i < a || i >= b) {
            pr.values[i] = 0.0;
            continue;
        }
        const double u = (i - a + 0.5) / double(b - a);
        pr.values[i] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * u);
    }
}

/// Normalised spectral power of a profile at spatial period `period`.
inline double profile_power(const AxisProfile& pr, double period) {
    std::complex<double> acc{0.0, 0.0};
    double total = 0.0;
    const double step = 2.0 * std::numbers::pi * pr.bin / period;
    const std::complex<double> rot = std::polar(1.0, step);
    std::complex<double> ph = std::polar(1.0, 2.0 * std::numbers::pi * (pr.t0 + 0.5 * pr.bin) / period);
    for (double v : pr.values) {
        acc += v * ph;
        total += std::abs(v);
        ph *= rot;
    }
    return total > 0.0 ? std::norm(acc) / (total * total) : 0.0;
}

/// Period in [lo, hi] maximising the summed power of the profiles, refined parabolically.
inline std::pair<double, double> best_period(const std::vector<AxisProfile>& profiles, double lo, double hi) {
    auto power = [&](double T) {
        double s = 0.0;
        for (const auto& pr : profiles) s += profile_power(pr, T);
        return s;
    };
    const double step = 0.02;
    const int n = static_cast<int>((hi - lo) / step) + 1;
    std::vector<double> pw(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pw[static_cast<std::size_t>(i)] = power(lo + i * step);
    const auto it = std::max_element(pw.begin(), pw.end());
    const int k = static_cast<int>(it - pw.begin());
    double T = lo + k * step;
    if (k > 0 && k + 1 < n) {
        const double l = pw[static_cast<std::size_t>(k - 1)], c = *it, r = pw[static_cast<std::size_t>(k + 1)];
        const double den = l - 2.0 * c + r;
        if (den < 0.0) T += step * std::clamp(0.5 * (l - r) / den, -0.5, 0.5);
    }
    return {T, power(T)};
}

/// Signed log ratio log g(s + q) - log g(s). Albedo cancels between replicas, leaving the
/// pitch-periodic shading and border jumps. Zero where either sample is dark or outside.
inline Image log_ratio(const Image& g, Vec2 q, float floor = 1e-3f) {
    Image e(g.width(), g.height(), 1);
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) {
            if (!g.contains_index(x + q.x, y + q.y)) continue;
            const float a = g.at(x, y), b = g.sample(x + q.x, y + q.y);
            if (a > floor && b > floor) e.at(x, y) = std::log(b / a);
        }
    return e;
}

/// Weighted circular mean of a rotated-frame coordinate modulo `period`.
inline double folded_phase(const Image& w, double period, double angle_rad, Vec2 centre, bool along_x) {
    std::complex<double> acc{0.0, 0.0};
    for (int y = 0; y < w.height(); ++y)
        for (int x = 0; x < w.width(); ++x) {
            const double v = w.at(x, y);
            if (v == 0.0) continue;
            const double t = axis_coordinate(x, y, angle_rad, centre, along_x);
            acc += v * std::polar(1.0, 2.0 * std::numbers::pi * t / period);
        }
    return std::arg(acc) / (2.0 * std::numbers::pi) * period;
}

}  // namespace detail

/// Recovers pitch, slant and origin of the microimage lattice from raster content.
/// Throws EstimationError("no lattice detected") when no periodic structure exists.
inline GridLayout estimate_grid(const Image& raster, const LatticeEstimateOptions& opt = {}) {
    const Image g = to_gray(raster);
    const int W = g.width(), H = g.height();
    if (W < 16 || H < 16) throw EstimationError("no lattice detected: raster too small");
    const int radius = std::min({W, H}) / 3;
    const int hp = std::max(8, std::min({W, H}) / 16);

    const detail::Autocorrelation ac_grad(detail::high_pass(gradient_magnitude(g), hp), radius);
    if (!ac_grad.valid()) throw EstimationError("no lattice detected: raster has no structure");
    auto coarse = detail::coarse_lattice(ac_grad, opt);
    if (!coarse) throw EstimationError("no lattice detected: no periodic peaks");
    const auto [a1, a2] = detail::fit_lattice(ac_grad, coarse->first, coarse->second, opt.min_peak);
    const double la = 0.5 * (a1.norm() + a2.norm());
    double angle = 0.5 * (std::atan2(a1.y, a1.x) + std::atan2(-a2.x, a2.y));
    if (std::abs(rad_to_deg(angle)) > kMaxSlantDeg) throw EstimationError("no lattice detected: slant out of range");
    const Vec2 sc{W / 2.0, H / 2.0};

    // The found lattice shares its axes with the other one; only the length differs.
    // Log ratios across the found vector cancel replicated content and keep the other
    // period, read off a 1D periodogram of their projections onto the lattice axes.
    const Image lrx = detail::log_ratio(g, a1), lry = detail::log_ratio(g, a2);
    const Image erx = detail::replication_residual(g, a1, a2, true, false);
    const Image ery = detail::replication_residual(g, a1, a2, false, true);
    const double lo = std::max(opt.min_pitch_px, la / 1.5), hi = std::min(opt.max_pitch_px, la * 1.5);
    double lb = la;
    if (lo < hi) {
        std::vector<detail::AxisProfile> prof{detail::project_axis(lrx, angle, sc, true),
                                              detail::project_axis(lry, angle, sc, false),
                                              detail::project_axis(erx, angle, sc, true),
                                              detail::project_axis(ery, angle, sc, false)};
        for (auto& pr : prof) {
            detail::detrend(pr, 4.0 * hi);
            detail::taper(pr);
        }
        lb = detail::best_period(prof, lo, hi).first;
    }

    double pitch = la;
    if (std::abs(la - lb) > 0.3) {
        const Vec2 u1 = a1 * (1.0 / a1.norm()), u2 = a2 * (1.0 / a2.norm());
        const Image eb = detail::replication_residual(g, u1 * lb, u2 * lb);
        const Image ea = detail::replication_residual(g, a1, a2);
        if (ea.mean() <= eb.mean()) pitch = lb;
    }
    if (!(pitch >= opt.min_pitch_px && pitch <= opt.max_pitch_px))
        throw EstimationError("no lattice detected: pitch out of range");

    // Phase. Replication residual leaves strips of width D just inside each border, so the
    // strip centre sits at c + P/2 - D/2. Without disparity the shading peak marks c.
    double cx = 0.0, cy = 0.0;
    const double disparity = la - pitch;
    if (std::abs(disparity) > 0.3) {
        cx = detail::folded_phase(erx, pitch, angle, sc, true) - pitch / 2.0 + disparity / 2.0;
        cy = detail::folded_phase(ery, pitch, angle, sc, false) - pitch / 2.0 + disparity / 2.0;
    } else {
        Image shade(W, H, 1);
        double sum = 0.0;
        int n = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (g.at(x, y) > 1e-3f) {
                    shade.at(x, y) = std::log(g.at(x, y));
                    sum += shade.at(x, y);
                    ++n;
                }
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (g.at(x, y) > 1e-3f) shade.at(x, y) = static_cast<float>(shade.at(x, y) - sum / n);
        cx = detail::folded_phase(shade, pitch, angle, sc, true);
        cy = detail::folded_phase(shade, pitch, angle, sc, false);
    }

    GridLayout grid;
    grid.pitch_px = pitch;
    grid.slant_deg = rad_to_deg(angle);
    auto centre_of = [&](int m, int n) { return sc + rotate({cx + m * pitch, cy + n * pitch}, angle); };
    auto outside = [&](int m, int n) {
        // largest excursion of the footprint beyond the raster, per axis
        const Vec2 c = centre_of(m, n);
        double ox = 0.0, oy = 0.0;
        for (const Vec2& d : {Vec2{-1, -1}, Vec2{1, -1}, Vec2{1, 1}, Vec2{-1, 1}}) {
            const Vec2 p = c + rotate(d * (pitch / 2.0), angle);
            ox = std::max({ox, -p.x, p.x - W});
            oy = std::max({oy, -p.y, p.y - H});
        }
        return std::make_pair(ox, oy);
    };
    // a lattice flush with the raster edge may overshoot it by a fraction of a pixel once
    // pitch carries estimation error; those lenslets are kept
    constexpr double slack = 0.5;
    const int M = static_cast<int>(std::ceil(std::hypot(W, H) / pitch)) + 1;
    int m0 = M, m1 = -M, n0 = M, n1 = -M;
    for (int n = -M; n <= M; ++n)
        for (int m = -M; m <= M; ++m) {
            const auto [ox, oy] = outside(m, n);
            if (ox <= slack && oy <= slack) {
                m0 = std::min(m0, m); m1 = std::max(m1, m);
                n0 = std::min(n0, n); n1 = std::max(n1, n);
            }
        }
    while (m0 <= m1 && n0 <= n1) {
        bool shrunk = false;
        for (const auto& [m, n] : {std::pair{m0, n0}, std::pair{m1, n0}, std::pair{m0, n1}, std::pair{m1, n1}}) {
            const auto [ox, oy] = outside(m, n);
            if (ox <= slack && oy <= slack) continue;
            if (ox >= oy) (m == m0 ? m0 : m1) += (m == m0 ? 1 : -1);
            else (n == n0 ? n0 : n1) += (n == n0 ? 1 : -1);
            shrunk = true;
            break;
        }
        if (!shrunk) break;
    }
    grid.cols = m1 - m0 + 1;
    grid.rows = n1 - n0 + 1;
    if (grid.cols < 2 || grid.rows < 2) throw EstimationError("no lattice detected: too few microimages");
    const Vec2 o = centre_of(m0, n0);
    grid.origin_x_px = o.x;
    grid.origin_y_px = o.y;
    return grid;
}

}  // namespace h3d
