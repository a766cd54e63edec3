// h3d: simulate, decode, assess and plan holoscopic captures.
//
// Exit codes: 0 success / quality pass, 1 quality fail, 2 usage or input error.
// Every command writes a run manifest whose argv re-runs it exactly (h3d replay).

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "h3d/capture.hpp"
#include "h3d/decoder.hpp"
#include "h3d/io.hpp"
#include "h3d/lattice.hpp"
#include "h3d/planner.hpp"
#include "h3d/quality.hpp"

using namespace h3d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitQualityFail = 1;
constexpr int kExitUsage = 2;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string abs_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

/// Accepts plain numbers and fractions such as "1/30".
double parse_number(const std::string& s, const std::string& what) {
    try {
        const auto slash = s.find('/');
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        }
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        std::size_t ua = 0, ub = 0;
        const double num_v = std::stod(a, &ua), den = std::stod(b, &ub);
        if (ua != a.size() || ub != b.size() || den == 0.0) throw std::invalid_argument(s);
        return num_v / den;
    } catch (const std::exception&) {
        throw InputError(what + ": cannot parse number '" + s + "'");
    }
}

fs::path manifest_path_for(const fs::path& out) {
    fs::path p = out;
    return p.replace_extension(".manifest.json");
}

/// Grid from the sidecar, else estimated; estimation failures are reported, never guessed.
GridLayout resolve_grid(const RawH3DImage& raw, bool& estimated) {
    estimated = !raw.grid.has_value();
    if (raw.grid) return *raw.grid;
    try {
        return estimate_grid(raw.pixels);
    } catch (const EstimationError& e) {
        throw InputError(std::string("no grid metadata and grid estimation failed: ") + e.what());
    }
}

// ---------------------------------------------------------------------------------------

struct SimulateArgs {
    std::string scene, rig, plan, out, manifest;
    std::optional<double> distance_cm, illuminance_lux, iso, noise_sigma0, slant_deg;
    std::optional<std::string> exposure_s;
    std::optional<int> supersampling;
    std::optional<std::uint64_t> noise_seed;
    bool noise = false, no_vignetting = false;
    double blur_sigma_px = 0.0;
    int bit_depth = 16;
};

int run_simulate(const SimulateArgs& a) {
    CameraRig rig = a.rig.empty() ? CameraRig{} : load_rig(a.rig);
    if (a.slant_deg && *a.slant_deg != rig.mla.slant_deg) {
        rig.mla.slant_deg = *a.slant_deg;
        // keep the slanted MLA inside the sensor
        const double c = std::abs(std::cos(deg_to_rad(*a.slant_deg))) + std::abs(std::sin(deg_to_rad(*a.slant_deg)));
        const double p = rig.microimage_pitch_px();
        rig.mla.cols = std::min(rig.mla.cols, static_cast<int>(std::floor(rig.sensor.width_px / (p * c))) - 1);
        rig.mla.rows = std::min(rig.mla.rows, static_cast<int>(std::floor(rig.sensor.height_px / (p * c))) - 1);
    }
    CaptureParams params;
    if (!a.plan.empty()) {
        const Json pj = read_json_file(a.plan);
        if (!pj.contains("params")) throw InputError("plan file '" + a.plan + "' has no params");
        params = params_from_json(pj.at("params"));
    }
    if (a.distance_cm) params.distance_cm = *a.distance_cm;
    if (a.illuminance_lux) params.illuminance_lux = *a.illuminance_lux;
    if (a.iso) params.iso = *a.iso;
    if (a.exposure_s) params.exposure_s = parse_number(*a.exposure_s, "--exposure-s");
    if (a.supersampling) params.supersampling = *a.supersampling;
    if (a.noise_seed) params.noise_seed = *a.noise_seed;
    if (a.noise) params.noise_enabled = true;
    if (a.noise_sigma0) params.noise_sigma0 = *a.noise_sigma0;
    if (a.no_vignetting) params.vignetting = false;
    detail::rethrow_invalid([&] {
        params.validate();
        rig.validate();
    });
    if (a.bit_depth != 8 && a.bit_depth != 16) throw InputError("--bit-depth must be 8 or 16");
    if (!(a.blur_sigma_px >= 0.0)) throw InputError("--blur-sigma-px must be >= 0");

    const Scene scene = load_scene(a.scene);
    RawH3DImage raw = detail::rethrow_invalid([&] { return render_raw(scene, rig, params); });
    const ObjectMask mask = project_object_mask(scene, rig, params);
    if (a.blur_sigma_px > 0.0) raw = defocus_blur(raw, a.blur_sigma_px);

    const fs::path out = a.out;
    save_raw(out, raw, a.bit_depth, mask);

    // Canonical argv: the rig is inlined as a resolved file next to the output so that the
    // manifest stays self-contained.
    const fs::path rig_out = fs::path(out).replace_extension(".rig.json");
    write_json_file(rig_out, to_json(rig));
    const fs::path mp = a.manifest.empty() ? manifest_path_for(out) : fs::path(a.manifest);
    RunManifest m;
    m.command = "simulate";
    m.seed = params.noise_seed;
    m.argv = {"simulate",         "--scene",        abs_path(a.scene),
              "--rig",            abs_path(rig_out.string()),
              "--distance-cm",    num(params.distance_cm),
              "--illuminance-lux", num(params.illuminance_lux),
              "--iso",            num(params.iso),
              "--exposure-s",     num(params.exposure_s),
              "--supersampling",  std::to_string(params.supersampling),
              "--noise-seed",     std::to_string(params.noise_seed),
              "--noise-sigma0",   num(params.noise_sigma0),
              "--blur-sigma-px",  num(a.blur_sigma_px),
              "--bit-depth",      std::to_string(a.bit_depth),
              "--out",            abs_path(out.string()),
              "--manifest",       abs_path(mp.string())};
    if (params.noise_enabled) m.argv.push_back("--noise");
    if (!params.vignetting) m.argv.push_back("--no-vignetting");
    m.parameters = {{"rig", to_json(rig)}, {"params", to_json(params)}, {"blur_sigma_px", a.blur_sigma_px},
                    {"bit_depth", a.bit_depth}};
    m.inputs = {{"scene", abs_path(a.scene)}};
    if (!a.plan.empty()) m.inputs["plan"] = abs_path(a.plan);
    m.outputs = {{"image", abs_path(out.string())},
                 {"sidecar", abs_path(sidecar_path(out).string())},
                 {"mask", abs_path(mask_path(out).string())},
                 {"rig", abs_path(rig_out.string())}};
    write_json_file(mp, to_json(m));
    std::cout << "wrote " << out.string() << " (" << raw.pixels.width() << "x" << raw.pixels.height() << ", "
              << raw.grid->cols << "x" << raw.grid->rows << " microimages, distance " << params.distance_cm << " cm)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------------------

struct DecodeArgs {
    std::string in, product, out_dir, manifest;
    int u = -1, v = -1, k_u = 3, k_v = 3, stride = 1, baseline = 2, aperture = 3, bit_depth = 16;
    double disparity = 0.0;
    bool sweep = false;
    double sweep_min = -2.0, sweep_max = 2.0, sweep_step = 0.25;
};

int run_decode(const DecodeArgs& a) {
    const LoadedRaw loaded = load_raw(a.in);
    bool estimated = false;
    const GridLayout grid0 = resolve_grid(loaded.raw, estimated);
    RawH3DImage raw = loaded.raw;
    raw.grid = grid0;
    fs::create_directories(a.out_dir);
    const fs::path dir = a.out_dir;
    Json outputs = Json::object();
    Json results = Json::object();

    if (a.product == "orthoscopic") {
        const RawH3DImage o = orthoscopic_correct(raw, grid0);
        const fs::path p = dir / "orthoscopic.png";
        save_raw(p, o, a.bit_depth);
        outputs["image"] = abs_path(p.string());
    } else {
        if (!grid0.axis_aligned()) raw = rectify_slant(raw);
        const GridLayout grid = *raw.grid;
        const int P = grid.views_per_axis();
        auto write_view = [&](const ViewpointImage& view, const std::string& name) {
            const fs::path p = dir / name;
            write_png(p, view.pixels, a.bit_depth);
            outputs[name] = abs_path(p.string());
        };
        if (a.product == "viewpoint") {
            const int u = a.u < 0 ? central_view_index(P) : a.u, v = a.v < 0 ? central_view_index(P) : a.v;
            write_view(extract_viewpoint(raw, grid, u, v), "viewpoint_u" + std::to_string(u) + "_v" + std::to_string(v) + ".png");
        } else if (a.product == "multiview") {
            const MultiviewSet set = multiview_set(raw, grid, a.k_u, a.k_v, a.stride);
            for (const ViewpointImage& view : set.views)
                write_view(view, "view_u" + std::to_string(view.u) + "_v" + std::to_string(view.v) + ".png");
        } else if (a.product == "stereo") {
            const StereoPair pair = stereo_pair(raw, grid, a.baseline);
            write_view(pair.left, "left.png");
            write_view(pair.right, "right.png");
            results["left_view"] = {pair.left.u, pair.left.v};
            results["right_view"] = {pair.right.u, pair.right.v};
        } else if (a.product == "refocus") {
            RefocusResult best;
            if (a.sweep) {
                const RefocusSweep sw = refocus_sweep(raw, grid, a.sweep_min, a.sweep_max, a.sweep_step, a.aperture);
                const fs::path csv = dir / "sweep.csv";
                std::ofstream os(csv);
                os << "disparity,sharpness\n";
                Json curve = Json::array();
                for (const SweepPoint& sp : sw.curve) {
                    os << num(sp.disparity) << "," << num(sp.sharpness) << "\n";
                    curve.push_back({{"disparity", sp.disparity}, {"sharpness", sp.sharpness}});
                }
                outputs["sweep.csv"] = abs_path(csv.string());
                results["sweep"] = curve;
                best = sw.best;
            } else {
                best = refocus(raw, grid, a.disparity, a.aperture);
            }
            const fs::path p = dir / (a.sweep ? "refocus_best.png" : "refocus.png");
            write_png(p, best.image, a.bit_depth);
            outputs[p.filename().string()] = abs_path(p.string());
            results["disparity"] = best.disparity;
            results["sharpness"] = best.sharpness;
        } else {
            throw InputError("unknown product '" + a.product + "'");
        }
    }

    const fs::path mp = a.manifest.empty() ? dir / "manifest.json" : fs::path(a.manifest);
    RunManifest m;
    m.command = "decode";
    m.argv = {"decode",       "--in",        abs_path(a.in),           "--product",   a.product,
              "--u",          std::to_string(a.u), "--v",              std::to_string(a.v),
              "--k-u",        std::to_string(a.k_u), "--k-v",          std::to_string(a.k_v),
              "--stride",     std::to_string(a.stride), "--baseline",  std::to_string(a.baseline),
              "--aperture",   std::to_string(a.aperture), "--disparity", num(a.disparity),
              "--sweep-min",  num(a.sweep_min), "--sweep-max",         num(a.sweep_max),
              "--sweep-step", num(a.sweep_step), "--bit-depth",        std::to_string(a.bit_depth),
              "--out-dir",    abs_path(a.out_dir), "--manifest",       abs_path(mp.string())};
    if (a.sweep) m.argv.push_back("--sweep");
    m.parameters = {{"product", a.product}, {"grid", to_json(grid0)}, {"grid_estimated", estimated}};
    m.inputs = {{"raw", abs_path(a.in)}};
    m.outputs = outputs;
    Json mj = to_json(m);
    mj["parameters"]["results"] = results;
    write_json_file(mp, mj);
    if (estimated) std::cout << "grid estimated: pitch " << grid0.pitch_px << " px, slant " << grid0.slant_deg << " deg\n";
    if (results.contains("disparity"))
        std::cout << "refocus disparity " << results["disparity"].get<double>() << ", sharpness "
                  << results["sharpness"].get<double>() << "\n";
    std::cout << "wrote " << outputs.size() << " file(s) to " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------------------

struct AssessArgs {
    std::string in, mask, thresholds, report, manifest;
    std::vector<double> box;
    int mask_origin_i = 0, mask_origin_j = 0;
};

int run_assess(const AssessArgs& a) {
    const LoadedRaw loaded = load_raw(a.in);
    bool estimated = false;
    const GridLayout grid = resolve_grid(loaded.raw, estimated);
    const QualityThresholds th = a.thresholds.empty() ? QualityThresholds{} : thresholds_from_json(read_json_file(a.thresholds));

    ObjectInfo object;
    std::string object_source;
    if (!a.box.empty()) {
        if (a.box.size() != 4) throw InputError("--box needs x0 y0 x1 y1");
        object = ObjectBox{a.box[0], a.box[1], a.box[2], a.box[3]};
        object_source = "box";
    } else if (!a.mask.empty()) {
        const Image mi = read_png(a.mask);
        ObjectMask m;
        m.origin_i = a.mask_origin_i;
        m.origin_j = a.mask_origin_j;
        m.width = mi.width();
        m.height = mi.height();
        m.frame_cols = grid.cols;
        m.frame_rows = grid.rows;
        m.cells.assign(static_cast<std::size_t>(m.width) * m.height, 0);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) m.set(x, y, mi.at(x, y, 0) >= 0.5f);
        object = m;
        object_source = "mask";
    } else if (loaded.mask) {
        object = *loaded.mask;
        object_source = "sidecar mask";
    } else {
        throw InputError("no object information: pass --mask or --box (or a raw with a sidecar mask)");
    }

    const QualityReport rep = assess(loaded.raw, grid, object, th);
    const fs::path report = a.report.empty() ? fs::path(a.in).replace_extension(".report.json") : fs::path(a.report);
    Json rj = to_json(rep);
    rj["input"] = abs_path(a.in);
    rj["object_source"] = object_source;
    rj["grid_estimated"] = estimated;
    write_json_file(report, rj);

    const fs::path mp = a.manifest.empty() ? manifest_path_for(report) : fs::path(a.manifest);
    RunManifest m;
    m.command = "assess";
    m.argv = {"assess", "--in", abs_path(a.in), "--report", abs_path(report.string()), "--manifest", abs_path(mp.string())};
    if (!a.thresholds.empty()) m.argv.insert(m.argv.end(), {"--thresholds", abs_path(a.thresholds)});
    if (!a.box.empty()) {
        m.argv.push_back("--box");
        for (double b : a.box) m.argv.push_back(num(b));
    }
    if (!a.mask.empty())
        m.argv.insert(m.argv.end(), {"--mask", abs_path(a.mask), "--mask-origin-i", std::to_string(a.mask_origin_i),
                                     "--mask-origin-j", std::to_string(a.mask_origin_j)});
    m.parameters = {{"thresholds", to_json(th)}, {"grid", to_json(grid)}, {"object_source", object_source}};
    m.inputs = {{"raw", abs_path(a.in)}};
    m.outputs = {{"report", abs_path(report.string())}};
    write_json_file(mp, to_json(m));
    std::cout << summarize(rep);
    return rep.overall_pass ? kExitOk : kExitQualityFail;
}

// ---------------------------------------------------------------------------------------

struct PlanArgs {
    std::vector<double> dims;
    std::optional<double> width_cm, height_cm, depth_cm;
    std::string table, rig, out = "plan.json", manifest;
    double margin_fraction = PlannerOptions{}.margin_fraction;
    double max_distance_cm = PlannerOptions{}.max_distance_cm;
};

int run_plan(const PlanArgs& a) {
    AssetDims dims;
    if (!a.dims.empty()) {
        if (a.dims.size() != 3) throw InputError("asset needs three dimensions: width height depth (cm)");
        if (a.width_cm || a.height_cm || a.depth_cm) throw InputError("give the asset either positionally or by flags");
        dims = {a.dims[0], a.dims[1], a.dims[2]};
    } else {
        if (!a.width_cm || !a.height_cm || !a.depth_cm)
            throw InputError("asset needs three dimensions: width height depth (cm)");
        dims = {*a.width_cm, *a.height_cm, *a.depth_cm};
    }
    detail::rethrow_invalid([&] { dims.validate(); });
    const CameraRig rig = a.rig.empty() ? CameraRig{} : load_rig(a.rig);
    const CalibrationTable table = a.table.empty() ? CalibrationTable::studio_default() : load_table(a.table);
    const PlannerOptions opt{a.margin_fraction, a.max_distance_cm};
    const CapturePlan p = detail::rethrow_invalid([&] { return plan(dims, rig, table, opt); });

    Json pj = to_json(p);
    pj["asset"] = to_json(dims);
    pj["table"] = a.table.empty() ? Json("default") : Json(abs_path(a.table));
    write_json_file(a.out, pj);

    const fs::path mp = a.manifest.empty() ? manifest_path_for(a.out) : fs::path(a.manifest);
    RunManifest m;
    m.command = "plan";
    m.argv = {"plan",           "--width-cm",        num(dims.width_cm), "--height-cm",      num(dims.height_cm),
              "--depth-cm",     num(dims.depth_cm),  "--margin-fraction", num(a.margin_fraction),
              "--max-distance-cm", num(a.max_distance_cm), "--out",       abs_path(a.out),
              "--manifest",     abs_path(mp.string())};
    if (!a.table.empty()) m.argv.insert(m.argv.end(), {"--table", abs_path(a.table)});
    if (!a.rig.empty()) m.argv.insert(m.argv.end(), {"--rig", abs_path(a.rig)});
    m.parameters = {{"asset", to_json(dims)}, {"table", to_json(table)}, {"rig", to_json(rig)},
                    {"margin_fraction", a.margin_fraction}, {"max_distance_cm", a.max_distance_cm}};
    m.outputs = {{"plan", abs_path(a.out)}};
    write_json_file(mp, to_json(m));

    std::cout << "distance " << p.distance_cm << " cm, illuminance " << p.illuminance_lux << " lux"
              << (p.illuminance_extrapolated ? " (extrapolated outside the calibration table)" : "") << ", ISO "
              << p.params.iso << ", exposure 1/" << num(1.0 / p.params.exposure_s) << " s, prime f/" << p.prime_fnumber
              << ", relay f/" << p.relay_fnumber << ", predicted fill " << p.predicted_fill_ratio << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, int depth = 0);

int run_replay(const std::string& manifest, int depth) {
    if (depth > 0) throw InputError("replay manifests cannot be nested");
    const RunManifest m = manifest_from_json(read_json_file(manifest));
    if (m.tool_version != kToolVersion)
        std::cerr << "warning: manifest written by version " << m.tool_version << ", running " << kToolVersion << "\n";
    if (m.argv.empty() || m.argv.front() == "replay") throw InputError("manifest has no replayable command");
    return run_cli(m.argv, depth + 1);
}

int run_cli(const std::vector<std::string>& args, int depth) {
    CLI::App app{"Holoscopic 3D capture simulation, decoding, quality assessment and planning", "h3d"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Render a raw holoscopic image of a scene");
    s->add_option("--scene", sim.scene, "Scene JSON file")->required();
    s->add_option("--rig", sim.rig, "Camera rig JSON (default rig when omitted)");
    s->add_option("--plan", sim.plan, "Plan JSON from 'h3d plan'; explicit flags override it");
    s->add_option("--distance-cm", sim.distance_cm, "Camera-to-asset distance");
    s->add_option("--illuminance-lux", sim.illuminance_lux, "Illuminance at the asset");
    s->add_option("--iso", sim.iso, "Sensor ISO");
    s->add_option("--exposure-s", sim.exposure_s, "Exposure time, e.g. 0.0333 or 1/30");
    s->add_option("--supersampling", sim.supersampling, "Sub-samples per pixel axis");
    s->add_option("--noise-seed", sim.noise_seed, "Noise RNG seed");
    s->add_flag("--noise", sim.noise, "Enable sensor noise");
    s->add_option("--noise-sigma0", sim.noise_sigma0, "Noise sigma at ISO 400 and unit signal");
    s->add_flag("--no-vignetting", sim.no_vignetting, "Disable microimage vignetting");
    s->add_option("--slant-deg", sim.slant_deg, "Override the MLA slant (lenslet count shrinks to fit)");
    s->add_option("--blur-sigma-px", sim.blur_sigma_px, "Per-microimage defocus blur (miscalibrated gap)");
    s->add_option("--bit-depth", sim.bit_depth, "PNG bit depth (8 or 16)");
    s->add_option("--out", sim.out, "Output PNG (sidecar written next to it)")->required();
    s->add_option("--manifest", sim.manifest, "Run manifest path (default <out>.manifest.json)");

    DecodeArgs dec;
    auto* d = app.add_subcommand("decode", "Decode a raw image into viewpoint, multiview, stereo, refocus or orthoscopic products");
    d->add_option("--in", dec.in, "Raw PNG (sidecar optional)")->required();
    d->add_option("--product", dec.product, "viewpoint|multiview|stereo|refocus|orthoscopic")
        ->required()
        ->check(CLI::IsMember({"viewpoint", "multiview", "stereo", "refocus", "orthoscopic"}));
    d->add_option("--u", dec.u, "View index u (default central)");
    d->add_option("--v", dec.v, "View index v (default central)");
    d->add_option("--k-u", dec.k_u, "Multiview: views along u");
    d->add_option("--k-v", dec.k_v, "Multiview: views along v");
    d->add_option("--stride", dec.stride, "Multiview: view index step");
    d->add_option("--baseline", dec.baseline, "Stereo: view index separation (negative mirrors)");
    d->add_option("--disparity", dec.disparity, "Refocus: shift per unit view offset (lenslets)");
    d->add_option("--aperture", dec.aperture, "Refocus: k x k central views");
    d->add_flag("--sweep", dec.sweep, "Refocus: sweep disparity and keep the sharpest plane");
    d->add_option("--sweep-min", dec.sweep_min, "Sweep start");
    d->add_option("--sweep-max", dec.sweep_max, "Sweep end");
    d->add_option("--sweep-step", dec.sweep_step, "Sweep step");
    d->add_option("--bit-depth", dec.bit_depth, "PNG bit depth (8 or 16)");
    d->add_option("--out-dir", dec.out_dir, "Output directory")->required();
    d->add_option("--manifest", dec.manifest, "Run manifest path (default <out-dir>/manifest.json)");

    AssessArgs ass;
    auto* q = app.add_subcommand("assess", "Score a raw image against the three acceptance criteria");
    q->add_option("--in", ass.in, "Raw PNG (sidecar optional)")->required();
    q->add_option("--mask", ass.mask, "Object mask PNG at lenslet resolution");
    q->add_option("--mask-origin-i", ass.mask_origin_i, "Lenslet column of mask pixel (0,0)");
    q->add_option("--mask-origin-j", ass.mask_origin_j, "Lenslet row of mask pixel (0,0)");
    q->add_option("--box", ass.box, "Object bounding box in sensor px: x0 y0 x1 y1")->expected(4);
    q->add_option("--thresholds", ass.thresholds, "Threshold JSON (defaults when omitted)");
    q->add_option("--report", ass.report, "Report JSON (default <in>.report.json)");
    q->add_option("--manifest", ass.manifest, "Run manifest path (default <report>.manifest.json)");

    PlanArgs pl;
    auto* p = app.add_subcommand("plan", "Plan camera distance, illuminance and camera settings for an asset");
    p->add_option("dims", pl.dims, "Asset width height depth in cm")->expected(0, 3);
    p->add_option("--width-cm", pl.width_cm, "Asset width");
    p->add_option("--height-cm", pl.height_cm, "Asset height");
    p->add_option("--depth-cm", pl.depth_cm, "Asset depth");
    p->add_option("--table", pl.table, "Distance/illuminance table JSON (studio table when omitted)");
    p->add_option("--rig", pl.rig, "Camera rig JSON");
    p->add_option("--margin-fraction", pl.margin_fraction, "Frame margin on each side");
    p->add_option("--max-distance-cm", pl.max_distance_cm, "Largest admissible distance");
    p->add_option("--out", pl.out, "Plan JSON");
    p->add_option("--manifest", pl.manifest, "Run manifest path (default <out>.manifest.json)");

    std::string manifest;
    auto* r = app.add_subcommand("replay", "Re-run a command from its manifest");
    r->add_option("manifest", manifest, "Run manifest JSON")->required();

    std::vector<const char*> argv{"h3d"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (s->parsed()) return run_simulate(sim);
        if (d->parsed()) return run_decode(dec);
        if (q->parsed()) return run_assess(ass);
        if (p->parsed()) return run_plan(pl);
        if (r->parsed()) return run_replay(manifest, depth);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args);
}
