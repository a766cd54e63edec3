#pragma once

// File formats: PNG rasters (libpng), JSON configs, sidecars, reports and manifests.
//
// Raster values are stored as-is (linear, no gamma) quantised to 8 or 16 bits.
// JSON readers reject unknown keys so that a misspelt field never silently falls back to
// its default.

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "h3d/capture.hpp"
#include "h3d/error.hpp"
#include "h3d/image.hpp"
#include "h3d/object.hpp"
#include "h3d/optics.hpp"
#include "h3d/planner.hpp"
#include "h3d/quality.hpp"
#include "h3d/scene.hpp"

namespace h3d {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------------------
// PNG

namespace detail {

struct PngReadState {
    std::jmp_buf jump;
    char message[256] = {0};
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
    auto* st = static_cast<PngReadState*>(png_get_error_ptr(png));
    std::snprintf(st->message, sizeof st->message, "%s", msg);
    std::longjmp(st->jump, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

// Plain C-style reader: nothing with a destructor lives in this frame across setjmp.
inline bool png_read_raw(std::FILE* fp, PngReadState& st, std::vector<unsigned char>& buf, png_uint_32& w,
                         png_uint_32& h, int& channels, int& depth) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, png_error_fn, png_warning_fn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(st.jump)) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    channels = png_get_channels(png, info);
    depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (w == 0 || h == 0 || w > 65535 || h > 65535) png_error(png, "unsupported image size");
    buf.resize(rowbytes * h);
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, buf.data() + rowbytes * y, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

inline bool png_write_raw(std::FILE* fp, PngReadState& st, const std::vector<unsigned char>& buf, int w, int h,
                          int channels, int depth) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, png_error_fn, png_warning_fn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(st.jump)) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (depth == 16) png_set_swap(png);
    const std::size_t rowbytes = static_cast<std::size_t>(w) * channels * (depth / 8);
    for (int y = 0; y < h; ++y) png_write_row(png, buf.data() + rowbytes * y);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace detail

/// Reads an 8/16-bit gray or colour PNG into [0,1] floats (alpha dropped, palette expanded).
inline Image read_png(const fs::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw InputError("cannot open image '" + path.string() + "'");
    detail::PngReadState st;
    std::vector<unsigned char> buf;
    png_uint_32 w = 0, h = 0;
    int channels = 0, depth = 0;
    if (!detail::png_read_raw(fp.get(), st, buf, w, h, channels, depth))
        throw InputError("cannot decode PNG '" + path.string() + "': " + (st.message[0] ? st.message : "libpng failure"));
    Image img(static_cast<int>(w), static_cast<int>(h), channels == 3 ? 3 : 1);
    const std::size_t n = static_cast<std::size_t>(w) * h * img.channels();
    auto out = img.data();
    if (depth == 16) {
        for (std::size_t k = 0; k < n; ++k) {
            const unsigned v = buf[2 * k] | (unsigned(buf[2 * k + 1]) << 8);
            out[k] = static_cast<float>(v / 65535.0);
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<float>(buf[k] / 255.0);
    }
    return img;
}

/// Writes a gray or RGB raster, clamping to [0,1]; bit_depth 8 or 16.
inline void write_png(const fs::path& path, const Image& img, int bit_depth = 16) {
    if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("write_png: bit depth must be 8 or 16");
    if (img.empty()) throw std::invalid_argument("write_png: empty image");
    if (img.channels() != 1 && img.channels() != 3) throw std::invalid_argument("write_png: need 1 or 3 channels");
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    const auto in = img.data();
    std::vector<unsigned char> buf(in.size() * (bit_depth / 8));
    for (std::size_t k = 0; k < in.size(); ++k) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(double(in[k]), 0.0, 1.0) * maxv));
        if (bit_depth == 16) {
            buf[2 * k] = static_cast<unsigned char>(q & 0xff);
            buf[2 * k + 1] = static_cast<unsigned char>(q >> 8);
        } else {
            buf[k] = static_cast<unsigned char>(q);
        }
    }
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw InputError("cannot write image '" + path.string() + "'");
    detail::PngReadState st;
    if (!detail::png_write_raw(fp.get(), st, buf, img.width(), img.height(), img.channels(), bit_depth))
        throw InputError("cannot encode PNG '" + path.string() + "': " + (st.message[0] ? st.message : "libpng failure"));
}

// ---------------------------------------------------------------------------------------
// JSON helpers

inline Json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

inline void write_json_file(const fs::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

namespace detail {

inline void require_object(const Json& j, const std::string& what) {
    if (!j.is_object()) throw InputError(what + ": expected a JSON object");
}

inline void check_keys(const Json& j, const std::string& what, std::initializer_list<const char*> allowed) {
    require_object(j, what);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw InputError(what + ": unknown key '" + k + "'");
}

template <typename T>
void get_opt(const Json& j, const char* key, T& dst, const std::string& what) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(what + ": field '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_req(const Json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) throw InputError(what + ": missing field '" + key + "'");
    T v{};
    get_opt(j, key, v, what);
    return v;
}

inline Vec3 get_vec3(const Json& j, const char* key, Vec3 dflt, const std::string& what) {
    if (!j.contains(key)) return dflt;
    const Json& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw InputError(what + ": field '" + key + "' must be a 3-element array");
    Vec3 v{};
    for (int k = 0; k < 3; ++k) {
        if (!a[k].is_number()) throw InputError(what + ": field '" + key + "' must hold numbers");
        v[k] = a[k].get<double>();
    }
    return v;
}

/// Shortest decimal that reads back to the same float (keeps 0.6f as 0.6 in JSON).
inline double tidy(float v) {
    char buf[32];
    for (int digits = 1; digits <= 9; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, double(v));
        const double d = std::strtod(buf, nullptr);
        if (static_cast<float>(d) == v) return d;
    }
    return v;
}

template <typename Fn>
auto rethrow_invalid(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Rig, grid, capture parameters

inline Json to_json(const MlaSpec& m) {
    return {{"lenslet_pitch_um", m.lenslet_pitch_um}, {"lenslet_shape", "square"}, {"slant_deg", m.slant_deg},
            {"cols", m.cols},                         {"rows", m.rows},            {"gap_um", m.gap_um}};
}

inline MlaSpec mla_from_json(const Json& j) {
    const std::string w = "mla";
    detail::check_keys(j, w, {"lenslet_pitch_um", "lenslet_shape", "slant_deg", "cols", "rows", "gap_um"});
    MlaSpec m;
    detail::get_opt(j, "lenslet_pitch_um", m.lenslet_pitch_um, w);
    std::string shape = "square";
    detail::get_opt(j, "lenslet_shape", shape, w);
    if (shape != "square") throw InputError("mla: lenslet_shape must be \"square\"");
    detail::get_opt(j, "slant_deg", m.slant_deg, w);
    detail::get_opt(j, "cols", m.cols, w);
    detail::get_opt(j, "rows", m.rows, w);
    detail::get_opt(j, "gap_um", m.gap_um, w);
    return m;
}

inline Json to_json(const SensorSpec& s) {
    return {{"width_px", s.width_px},
            {"height_px", s.height_px},
            {"pixel_pitch_um", s.pixel_pitch_um},
            {"channels", s.channels == ChannelLayout::rgb ? "rgb" : "gray"}};
}

inline SensorSpec sensor_from_json(const Json& j) {
    const std::string w = "sensor";
    detail::check_keys(j, w, {"width_px", "height_px", "pixel_pitch_um", "channels"});
    SensorSpec s;
    detail::get_opt(j, "width_px", s.width_px, w);
    detail::get_opt(j, "height_px", s.height_px, w);
    detail::get_opt(j, "pixel_pitch_um", s.pixel_pitch_um, w);
    std::string ch = "gray";
    detail::get_opt(j, "channels", ch, w);
    if (ch == "gray") s.channels = ChannelLayout::gray;
    else if (ch == "rgb") s.channels = ChannelLayout::rgb;
    else throw InputError("sensor: channels must be \"gray\" or \"rgb\"");
    return s;
}

inline Json to_json(const CameraRig& r) {
    return {{"prime_focal_mm", r.prime_focal_mm},
            {"prime_fnumber", r.prime_fnumber},
            {"relay_fnumber", r.relay_fnumber},
            {"relay_scale", r.relay_scale},
            {"focus_offset_um", r.focus_offset_um},
            {"aperture", r.aperture == ApertureShape::square ? "square" : "circular"},
            {"vignette_corner_deg", r.vignette_corner_deg},
            {"mla", to_json(r.mla)},
            {"sensor", to_json(r.sensor)}};
}

inline CameraRig rig_from_json(const Json& j) {
    const std::string w = "rig";
    detail::check_keys(j, w,
                       {"prime_focal_mm", "prime_fnumber", "relay_fnumber", "relay_scale", "focus_offset_um", "aperture",
                        "vignette_corner_deg", "mla", "sensor"});
    CameraRig r;
    detail::get_opt(j, "prime_focal_mm", r.prime_focal_mm, w);
    detail::get_opt(j, "prime_fnumber", r.prime_fnumber, w);
    detail::get_opt(j, "relay_fnumber", r.relay_fnumber, w);
    detail::get_opt(j, "relay_scale", r.relay_scale, w);
    detail::get_opt(j, "focus_offset_um", r.focus_offset_um, w);
    std::string ap = "square";
    detail::get_opt(j, "aperture", ap, w);
    if (ap == "square") r.aperture = ApertureShape::square;
    else if (ap == "circular") r.aperture = ApertureShape::circular;
    else throw InputError("rig: aperture must be \"square\" or \"circular\"");
    detail::get_opt(j, "vignette_corner_deg", r.vignette_corner_deg, w);
    if (j.contains("mla")) r.mla = mla_from_json(j.at("mla"));
    if (j.contains("sensor")) r.sensor = sensor_from_json(j.at("sensor"));
    detail::rethrow_invalid([&] { r.validate(); });
    return r;
}

inline Json to_json(const GridLayout& g) {
    return {{"pitch_px", g.pitch_px}, {"slant_deg", g.slant_deg}, {"origin_x_px", g.origin_x_px},
            {"origin_y_px", g.origin_y_px}, {"cols", g.cols}, {"rows", g.rows}, {"orthoscopic", g.orthoscopic}};
}

inline GridLayout grid_from_json(const Json& j) {
    const std::string w = "grid";
    detail::check_keys(j, w, {"pitch_px", "slant_deg", "origin_x_px", "origin_y_px", "cols", "rows", "orthoscopic"});
    GridLayout g;
    g.pitch_px = detail::get_req<double>(j, "pitch_px", w);
    detail::get_opt(j, "slant_deg", g.slant_deg, w);
    g.origin_x_px = detail::get_req<double>(j, "origin_x_px", w);
    g.origin_y_px = detail::get_req<double>(j, "origin_y_px", w);
    g.cols = detail::get_req<int>(j, "cols", w);
    g.rows = detail::get_req<int>(j, "rows", w);
    detail::get_opt(j, "orthoscopic", g.orthoscopic, w);
    return g;
}

inline Json to_json(const CaptureParams& p) {
    return {{"iso", p.iso},
            {"exposure_s", p.exposure_s},
            {"distance_cm", p.distance_cm},
            {"illuminance_lux", p.illuminance_lux},
            {"noise_seed", p.noise_seed},
            {"noise_enabled", p.noise_enabled},
            {"noise_sigma0", p.noise_sigma0},
            {"vignetting", p.vignetting},
            {"supersampling", p.supersampling}};
}

inline CaptureParams params_from_json(const Json& j) {
    const std::string w = "params";
    detail::check_keys(j, w,
                       {"iso", "exposure_s", "distance_cm", "illuminance_lux", "noise_seed", "noise_enabled",
                        "noise_sigma0", "vignetting", "supersampling"});
    CaptureParams p;
    detail::get_opt(j, "iso", p.iso, w);
    detail::get_opt(j, "exposure_s", p.exposure_s, w);
    detail::get_opt(j, "distance_cm", p.distance_cm, w);
    detail::get_opt(j, "illuminance_lux", p.illuminance_lux, w);
    detail::get_opt(j, "noise_seed", p.noise_seed, w);
    detail::get_opt(j, "noise_enabled", p.noise_enabled, w);
    detail::get_opt(j, "noise_sigma0", p.noise_sigma0, w);
    detail::get_opt(j, "vignetting", p.vignetting, w);
    detail::get_opt(j, "supersampling", p.supersampling, w);
    detail::rethrow_invalid([&] { p.validate(); });
    return p;
}

inline CameraRig load_rig(const fs::path& path) { return rig_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------------------
// Scenes

inline Json to_json(const Scene& s) {
    Json prims = Json::array();
    for (const Primitive& p : s.primitives) {
        Json a;
        if (const double* c = std::get_if<double>(&p.albedo)) a = *c;
        else if (const Checkerboard* cb = std::get_if<Checkerboard>(&p.albedo))
            a = {{"checker", {{"cell_cm", cb->cell_cm}, {"a", cb->albedo_a}, {"b", cb->albedo_b}}}};
        else a = {{"texture", std::get<RasterTexture>(p.albedo).path}};
        const char* kind = p.kind == PrimitiveKind::plane ? "plane" : p.kind == PrimitiveKind::sphere ? "sphere" : "box";
        prims.push_back({{"kind", kind},
                         {"name", p.name},
                         {"position_cm", p.pose.position_cm},
                         {"rotation_deg", p.pose.rotation_deg},
                         {"dims_cm", p.dims_cm},
                         {"albedo", a},
                         {"tint", {detail::tidy(p.tint[0]), detail::tidy(p.tint[1]), detail::tidy(p.tint[2])}},
                         {"asset", p.asset}});
    }
    return {{"label", s.label}, {"background_albedo", s.background_albedo}, {"primitives", prims}};
}

/// Texture paths are resolved against `base_dir` (the scene file's directory).
inline Scene scene_from_json(const Json& j, const fs::path& base_dir = {}) {
    detail::check_keys(j, "scene", {"label", "background_albedo", "primitives"});
    Scene s;
    detail::get_opt(j, "label", s.label, "scene");
    detail::get_opt(j, "background_albedo", s.background_albedo, "scene");
    if (!j.contains("primitives") || !j.at("primitives").is_array())
        throw InputError("scene: 'primitives' must be an array");
    int idx = 0;
    for (const Json& pj : j.at("primitives")) {
        const std::string w = "scene primitive " + std::to_string(idx++);
        detail::check_keys(pj, w, {"kind", "name", "position_cm", "rotation_deg", "dims_cm", "albedo", "tint", "asset"});
        Primitive p;
        const auto kind = detail::get_req<std::string>(pj, "kind", w);
        if (kind == "plane") p.kind = PrimitiveKind::plane;
        else if (kind == "sphere") p.kind = PrimitiveKind::sphere;
        else if (kind == "box") p.kind = PrimitiveKind::box;
        else throw InputError(w + ": kind must be plane, sphere or box");
        detail::get_opt(pj, "name", p.name, w);
        p.pose.position_cm = detail::get_vec3(pj, "position_cm", p.pose.position_cm, w);
        p.pose.rotation_deg = detail::get_vec3(pj, "rotation_deg", p.pose.rotation_deg, w);
        p.dims_cm = detail::get_vec3(pj, "dims_cm", p.dims_cm, w);
        const Vec3 tint = detail::get_vec3(pj, "tint", {1.0, 1.0, 1.0}, w);
        p.tint = {static_cast<float>(tint[0]), static_cast<float>(tint[1]), static_cast<float>(tint[2])};
        detail::get_opt(pj, "asset", p.asset, w);
        if (pj.contains("albedo")) {
            const Json& a = pj.at("albedo");
            if (a.is_number()) {
                p.albedo = a.get<double>();
            } else if (a.is_object() && a.contains("checker")) {
                detail::check_keys(a, w + " albedo", {"checker"});
                const Json& c = a.at("checker");
                detail::check_keys(c, w + " checker", {"cell_cm", "a", "b"});
                Checkerboard cb;
                detail::get_opt(c, "cell_cm", cb.cell_cm, w);
                detail::get_opt(c, "a", cb.albedo_a, w);
                detail::get_opt(c, "b", cb.albedo_b, w);
                p.albedo = cb;
            } else if (a.is_object() && a.contains("texture")) {
                detail::check_keys(a, w + " albedo", {"texture"});
                RasterTexture t;
                t.path = detail::get_req<std::string>(a, "texture", w);
                const fs::path full = fs::path(t.path).is_absolute() ? fs::path(t.path) : base_dir / t.path;
                t.image = std::make_shared<const Image>(to_gray(read_png(full)));
                p.albedo = t;
            } else {
                throw InputError(w + ": albedo must be a number, {\"checker\": {...}} or {\"texture\": path}");
            }
        }
        s.primitives.push_back(std::move(p));
    }
    return s;
}

inline Scene load_scene(const fs::path& path) {
    if (!fs::exists(path)) throw InputError("scene file not found: '" + path.string() + "'");
    return scene_from_json(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------------------
// Planner tables and assets

inline Json to_json(const CalibrationTable& t) {
    Json rows = Json::array();
    for (const auto& [d, l] : t.rows) rows.push_back({{"distance_cm", d}, {"illuminance_lux", l}});
    return {{"rows", rows}};
}

inline CalibrationTable table_from_json(const Json& j) {
    detail::check_keys(j, "table", {"rows"});
    if (!j.contains("rows") || !j.at("rows").is_array()) throw InputError("table: 'rows' must be an array");
    CalibrationTable t;
    for (const Json& r : j.at("rows")) {
        detail::check_keys(r, "table row", {"distance_cm", "illuminance_lux"});
        t.rows.emplace_back(detail::get_req<double>(r, "distance_cm", "table row"),
                            detail::get_req<double>(r, "illuminance_lux", "table row"));
    }
    t.validate();
    return t;
}

inline CalibrationTable load_table(const fs::path& path) { return table_from_json(read_json_file(path)); }

/// One sharp render of the detail calibration corpus: the corpus scene with the first
/// primitive re-posed and re-textured.
struct CorpusCase {
    Scene scene;
    CameraRig rig;
    CaptureParams params;
};

inline std::vector<CorpusCase> load_detail_corpus(const fs::path& path) {
    const Json j = read_json_file(path);
    detail::check_keys(j, "corpus", {"description", "scene", "rig", "cases"});
    const fs::path base = path.parent_path();
    const Scene scene = load_scene(base / detail::get_req<std::string>(j, "scene", "corpus"));
    const CameraRig rig = load_rig(base / detail::get_req<std::string>(j, "rig", "corpus"));
    if (scene.primitives.empty()) throw InputError("corpus: scene has no primitive to vary");
    if (!j.contains("cases") || !j.at("cases").is_array()) throw InputError("corpus: 'cases' must be an array");
    std::vector<CorpusCase> out;
    for (const Json& c : j.at("cases")) {
        detail::check_keys(c, "corpus case", {"rotation_deg", "checker", "distance_cm"});
        CorpusCase cc{scene, rig, {}};
        Primitive& p = cc.scene.primitives.front();
        p.pose.rotation_deg = detail::get_vec3(c, "rotation_deg", p.pose.rotation_deg, "corpus case");
        if (c.contains("checker")) {
            const Json& k = c.at("checker");
            detail::check_keys(k, "corpus checker", {"cell_cm", "a", "b"});
            p.albedo = Checkerboard{detail::get_req<double>(k, "cell_cm", "corpus checker"),
                                    detail::get_req<double>(k, "a", "corpus checker"),
                                    detail::get_req<double>(k, "b", "corpus checker")};
        }
        cc.params.distance_cm = detail::get_req<double>(c, "distance_cm", "corpus case");
        out.push_back(std::move(cc));
    }
    if (out.empty()) throw InputError("corpus: no cases");
    return out;
}

/// Median detail score over the corpus renders (default capture parameters).
inline double corpus_median_detail(const fs::path& path) {
    std::vector<double> scores;
    for (const CorpusCase& c : load_detail_corpus(path)) {
        const RawH3DImage raw = render_raw(c.scene, c.rig, c.params);
        scores.push_back(detail_score(raw, raw.grid));
    }
    return detail::median_of(scores);
}

inline Json to_json(const AssetDims& a) {
    return {{"width_cm", a.width_cm}, {"height_cm", a.height_cm}, {"depth_cm", a.depth_cm}};
}

inline Json to_json(const CapturePlan& p) {
    return {{"distance_cm", p.distance_cm},
            {"min_fit_distance_cm", p.min_fit_distance_cm},
            {"illuminance_lux", p.illuminance_lux},
            {"illuminance_extrapolated", p.illuminance_extrapolated},
            {"prime_focal_mm", p.prime_focal_mm},
            {"prime_fnumber", p.prime_fnumber},
            {"relay_fnumber", p.relay_fnumber},
            {"predicted_fill_ratio", p.predicted_fill_ratio},
            {"params", to_json(p.params)}};
}

// ---------------------------------------------------------------------------------------
// Quality

inline Json to_json(const QualityThresholds& t) {
    return {{"coverage_min", t.coverage_min},   {"fill_min", t.fill_min},
            {"fill_max", t.fill_max},           {"detail_min", t.detail_min},
            {"ncc_min", t.ncc_min},             {"max_shift_fraction", t.max_shift_fraction},
            {"informative_contrast", t.informative_contrast}};
}

inline QualityThresholds thresholds_from_json(const Json& j) {
    const std::string w = "thresholds";
    detail::check_keys(j, w,
                       {"coverage_min", "fill_min", "fill_max", "detail_min", "ncc_min", "max_shift_fraction",
                        "informative_contrast"});
    QualityThresholds t;
    detail::get_opt(j, "coverage_min", t.coverage_min, w);
    detail::get_opt(j, "fill_min", t.fill_min, w);
    detail::get_opt(j, "fill_max", t.fill_max, w);
    detail::get_opt(j, "detail_min", t.detail_min, w);
    detail::get_opt(j, "ncc_min", t.ncc_min, w);
    detail::get_opt(j, "max_shift_fraction", t.max_shift_fraction, w);
    detail::get_opt(j, "informative_contrast", t.informative_contrast, w);
    detail::rethrow_invalid([&] { t.validate(); });
    return t;
}

inline Json to_json(const QualityReport& r) {
    return {{"overall_pass", r.overall_pass},
            {"criteria",
             {{"coverage", {{"pass", r.coverage_pass}, {"coverage_ratio", r.coverage_ratio}, {"fill_ratio", r.fill_ratio}}},
              {"detail",
               {{"pass", r.detail_pass}, {"detail_score", r.detail_score}, {"informative_microimages", r.informative_microimages}}},
              {"replication",
               {{"pass", r.replication_pass},
                {"replication_score", r.replication_score},
                {"mean_neighbor_shift_px", r.mean_neighbor_shift_px},
                {"median_neighbor_shift_px", r.median_neighbor_shift_px},
                {"pairs", r.replication_pairs}}}}},
            {"failures", r.failures},
            {"thresholds", to_json(r.thresholds)}};
}

inline std::string summarize(const QualityReport& r) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "coverage     " << (r.coverage_pass ? "PASS" : "FAIL") << "  coverage=" << r.coverage_ratio
       << " fill=" << r.fill_ratio << "\n";
    os << "detail       " << (r.detail_pass ? "PASS" : "FAIL") << "  score=" << r.detail_score
       << " (min " << r.thresholds.detail_min << ")\n";
    os << "replication  " << (r.replication_pass ? "PASS" : "FAIL") << "  ncc=" << r.replication_score
       << " mean_shift=" << r.mean_neighbor_shift_px << "px\n";
    for (const std::string& f : r.failures) os << "  - " << f << "\n";
    os << "overall      " << (r.overall_pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------------------
// Raw images with sidecars

/// Sidecar path for a raw PNG: "<stem>.json" next to it.
inline fs::path sidecar_path(const fs::path& png) {
    fs::path p = png;
    return p.replace_extension(".json");
}

inline fs::path mask_path(const fs::path& png) {
    fs::path p = png;
    return p.replace_extension(".mask.png");
}

/// Writes the raster plus sidecar (rig, grid, params, label, seed) and, when given, the
/// object mask as a lenslet-resolution PNG referenced from the sidecar.
inline void save_raw(const fs::path& png, const RawH3DImage& raw, int bit_depth = 16,
                     const std::optional<ObjectMask>& mask = std::nullopt) {
    write_png(png, raw.pixels, bit_depth);
    Json side;
    side["format"] = "h3d-raw";
    side["version"] = 1;
    side["image"] = png.filename().string();
    side["bit_depth"] = bit_depth;
    side["scene_label"] = raw.scene_label;
    side["seed"] = raw.seed;
    if (raw.rig) side["rig"] = to_json(*raw.rig);
    if (raw.grid) side["grid"] = to_json(*raw.grid);
    if (raw.params) side["params"] = to_json(*raw.params);
    if (mask) {
        Image m(mask->width, mask->height, 1);
        for (int j = 0; j < mask->height; ++j)
            for (int i = 0; i < mask->width; ++i) m.at(i, j) = mask->at(i, j) ? 1.0f : 0.0f;
        const fs::path mp = mask_path(png);
        write_png(mp, m, 8);
        side["object_mask"] = {{"image", mp.filename().string()},
                               {"origin_i", mask->origin_i},
                               {"origin_j", mask->origin_j},
                               {"frame_cols", mask->frame_cols},
                               {"frame_rows", mask->frame_rows}};
    }
    write_json_file(sidecar_path(png), side);
}

struct LoadedRaw {
    RawH3DImage raw;
    std::optional<ObjectMask> mask;
    bool has_sidecar = false;
};

inline ObjectMask mask_from_json(const Json& j, const fs::path& base_dir) {
    const std::string w = "object_mask";
    detail::check_keys(j, w, {"image", "origin_i", "origin_j", "frame_cols", "frame_rows"});
    const Image m = read_png(base_dir / detail::get_req<std::string>(j, "image", w));
    ObjectMask mask;
    mask.origin_i = detail::get_req<int>(j, "origin_i", w);
    mask.origin_j = detail::get_req<int>(j, "origin_j", w);
    mask.frame_cols = detail::get_req<int>(j, "frame_cols", w);
    mask.frame_rows = detail::get_req<int>(j, "frame_rows", w);
    mask.width = m.width();
    mask.height = m.height();
    mask.cells.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) mask.set(x, y, m.at(x, y, 0) >= 0.5f);
    return mask;
}

/// Loads a raw PNG; the sidecar is optional (absent -> no grid, callers estimate it).
inline LoadedRaw load_raw(const fs::path& png) {
    if (!fs::exists(png)) throw InputError("image not found: '" + png.string() + "'");
    LoadedRaw out;
    out.raw.pixels = read_png(png);
    const fs::path side = sidecar_path(png);
    if (!fs::exists(side)) return out;
    const Json j = read_json_file(side);
    detail::check_keys(j, "sidecar",
                       {"format", "version", "image", "bit_depth", "scene_label", "seed", "rig", "grid", "params",
                        "object_mask"});
    if (j.value("format", std::string{}) != "h3d-raw") throw InputError("sidecar '" + side.string() + "' has wrong format tag");
    out.has_sidecar = true;
    detail::get_opt(j, "scene_label", out.raw.scene_label, "sidecar");
    detail::get_opt(j, "seed", out.raw.seed, "sidecar");
    if (j.contains("rig")) out.raw.rig = rig_from_json(j.at("rig"));
    if (j.contains("grid")) {
        out.raw.grid = grid_from_json(j.at("grid"));
        try {
            out.raw.grid->validate(out.raw.pixels.width(), out.raw.pixels.height());
        } catch (const std::exception& e) {
            throw InputError("sidecar grid does not match the image: " + std::string(e.what()));
        }
    }
    if (j.contains("params")) out.raw.params = params_from_json(j.at("params"));
    if (j.contains("object_mask")) out.mask = mask_from_json(j.at("object_mask"), png.parent_path());
    return out;
}

// ---------------------------------------------------------------------------------------
// Run manifests

/// Everything needed to re-run a command: the fully resolved argument vector plus a
/// readable copy of the parameters and the files touched.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    Json parameters = Json::object();
    Json inputs = Json::object();
    Json outputs = Json::object();
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
};

inline Json to_json(const RunManifest& m) {
    return {{"format", "h3d-manifest"}, {"tool_version", m.tool_version}, {"command", m.command},
            {"argv", m.argv},           {"seed", m.seed},                 {"parameters", m.parameters},
            {"inputs", m.inputs},       {"outputs", m.outputs}};
}

inline RunManifest manifest_from_json(const Json& j) {
    detail::check_keys(j, "manifest",
                       {"format", "tool_version", "command", "argv", "seed", "parameters", "inputs", "outputs"});
    if (j.value("format", std::string{}) != "h3d-manifest") throw InputError("manifest: wrong format tag");
    RunManifest m;
    m.command = detail::get_req<std::string>(j, "command", "manifest");
    m.argv = detail::get_req<std::vector<std::string>>(j, "argv", "manifest");
    detail::get_opt(j, "seed", m.seed, "manifest");
    detail::get_opt(j, "tool_version", m.tool_version, "manifest");
    if (j.contains("parameters")) m.parameters = j.at("parameters");
    if (j.contains("inputs")) m.inputs = j.at("inputs");
    if (j.contains("outputs")) m.outputs = j.at("outputs");
    return m;
}

}  // namespace h3d
