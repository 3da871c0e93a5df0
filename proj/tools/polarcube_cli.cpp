// polarcube: command-line front end for simulation, reconstruction, codecs and statistics.
//
// Output protocol: the first stdout line is {"resolved_config": ...}, the last
// is {"summary": ...}. Exit codes: 0 ok, 2 config, 3 I/O, 4 numerical.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <polarcube/polarcube.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pc = polarcube;
using json = nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

json default_config() {
    return json::parse(R"({
      "seed": null,
      "threads": 1,
      "camera": {
        "type": "hyperspectral",
        "height": 64,
        "width": 64,
        "channels": 21,
        "qwp_angles_deg": [30.0, -45.0, 60.0, -90.0],
        "lp_angle_deg": 0.0,
        "exposure": 1.0
      },
      "scene": {
        "kind": "smooth",
        "intensity_mean": 0.5,
        "intensity_swing": 0.3,
        "max_dop": 0.8,
        "max_chi_deg": 22.5,
        "cycles": 1.5,
        "constant_stokes": [1.0, 0.0, 0.0, 0.0]
      },
      "noise": {
        "gaussian_sigma": 0.0,
        "shot_gain": 0.0,
        "saturation_level": 1.0,
        "black_level": 0.0
      },
      "solver": {
        "dop_tolerance": 0.001,
        "saturation_fraction": 0.998,
        "underexposure_factor": 2.0
      },
      "denoise": {
        "method": "burst",
        "window": 3
      },
      "pca": {
        "patch_size": 10,
        "components": 32,
        "rd_components": []
      },
      "inr": {
        "layers": 4,
        "hidden": 64,
        "feature_dim": 0,
        "k_spatial": 10,
        "k_channel": 1,
        "steps": 2000,
        "learning_rate": 0.005,
        "final_learning_rate": 0.0,
        "cosine_decay": true,
        "batch_pixels": 256,
        "beta1": 0.9,
        "beta2": 0.999,
        "record_every": 100,
        "last_layer_only": false
      },
      "stats": {
        "feature": "s0",
        "bins": 201,
        "direction": "both",
        "environments": [],
        "illuminations": [],
        "scene_types": []
      },
      "io": {
        "dtype": "f32"
      }
    })");
}

/// Rejects keys absent from the defaults and values of the wrong JSON type.
void check_schema(const json& defaults, const json& given, const std::string& where) {
    if (!given.is_object()) throw pc::ConfigError("config: " + where + " must be an object");
    for (auto it = given.begin(); it != given.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!defaults.contains(it.key())) throw pc::ConfigError("config: unknown key '" + key + "'");
        const json& d = defaults.at(it.key());
        const json& v = it.value();
        if (d.is_object()) {
            check_schema(d, v, key);
            continue;
        }
        const bool ok = d.is_null() ? (v.is_null() || v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))
                        : d.is_number() ? v.is_number()
                        : d.is_boolean() ? v.is_boolean()
                        : d.is_string()  ? v.is_string()
                        : d.is_array()   ? v.is_array()
                                         : true;
        if (!ok) throw pc::ConfigError("config: key '" + key + "' has the wrong type");
    }
}

template <typename T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw pc::ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

struct Context {
    json cfg;
    unsigned threads = 1;
    std::string out;

    std::optional<std::uint64_t> seed() const {
        if (cfg.at("seed").is_null()) return std::nullopt;
        return cfg.at("seed").get<std::uint64_t>();
    }
    std::uint64_t require_seed(const std::string& stage) const {
        const auto s = seed();
        if (!s) throw pc::ConfigError(stage + ": a seed is required (--seed or \"seed\" in the config)");
        return *s;
    }
    std::string require_out(const std::string& stage) const {
        if (out.empty()) throw pc::ConfigError(stage + ": --out is required");
        return out;
    }
    pc::SpsiDtype dtype() const {
        const auto d = get<std::string>(cfg.at("io"), "dtype");
        if (d == "f32") return pc::SpsiDtype::f32;
        if (d == "f64") return pc::SpsiDtype::f64;
        throw pc::ConfigError("config: io.dtype must be f32 or f64");
    }
};

void emit(const json& j) { std::cout << j.dump() << '\n' << std::flush; }

// ---------------------------------------------------------------------------
// Config to library objects

pc::CaptureConfig capture_config(const json& cam) {
    std::vector<double> angles;
    for (double a : get<std::vector<double>>(cam, "qwp_angles_deg")) angles.push_back(pc::deg(a));
    if (angles.size() < 4) throw pc::ConfigError("config: camera.qwp_angles_deg needs at least 4 angles");
    auto c = pc::CaptureConfig::rotating_qwp(angles, pc::deg(get<double>(cam, "lp_angle_deg")));
    c.exposure = get<double>(cam, "exposure");
    if (!(c.exposure > 0.0)) throw pc::ConfigError("config: camera.exposure must be positive");
    return c;
}

pc::NoiseModel noise_model(const json& n, std::uint64_t seed) {
    pc::NoiseModel m;
    m.gaussian_sigma = get<double>(n, "gaussian_sigma");
    m.shot_gain = get<double>(n, "shot_gain");
    m.saturation_level = get<double>(n, "saturation_level");
    m.black_level = get<double>(n, "black_level");
    m.rng_seed = seed;
    m.validate();
    return m;
}

pc::ReconstructOptions reconstruct_options(const Context& ctx) {
    const json& s = ctx.cfg.at("solver");
    pc::ReconstructOptions o;
    o.dop_tolerance = get<double>(s, "dop_tolerance");
    o.saturation_fraction = get<double>(s, "saturation_fraction");
    o.underexposure_factor = get<double>(s, "underexposure_factor");
    o.threads = ctx.threads;
    return o;
}

bool is_trichromatic(const json& cam) {
    const auto t = get<std::string>(cam, "type");
    if (t == "hyperspectral") return false;
    if (t == "trichromatic") return true;
    throw pc::ConfigError("config: camera.type must be hyperspectral or trichromatic");
}

pc::StokesImage make_scene(const Context& ctx, std::uint64_t seed) {
    const json& cam = ctx.cfg.at("camera");
    const json& sc = ctx.cfg.at("scene");
    const auto h = get<std::size_t>(cam, "height"), w = get<std::size_t>(cam, "width");
    const bool tri = is_trichromatic(cam);
    const std::size_t c = tri ? 3 : get<std::size_t>(cam, "channels");
    if (h == 0 || w == 0 || c == 0) throw pc::ConfigError("config: camera dimensions must be positive");
    std::vector<double> wl;
    if (!tri && c == 21) wl = pc::hyperspectral_wavelengths();
    const auto kind = get<std::string>(sc, "kind");
    if (kind == "smooth") {
        pc::SmoothSceneOptions o;
        o.intensity_mean = get<double>(sc, "intensity_mean");
        o.intensity_swing = get<double>(sc, "intensity_swing");
        o.max_dop = get<double>(sc, "max_dop");
        o.max_chi = pc::deg(get<double>(sc, "max_chi_deg"));
        o.cycles = get<double>(sc, "cycles");
        o.seed = seed;
        if (o.max_dop < 0.0 || o.max_dop > 1.0) throw pc::ConfigError("config: scene.max_dop must lie in [0, 1]");
        if (o.intensity_swing >= o.intensity_mean) throw pc::ConfigError("config: scene intensity could reach zero");
        return pc::smooth_scene(h, w, c, o, wl);
    }
    if (kind == "random") return pc::random_scene(h, w, c, seed, wl);
    if (kind == "constant") {
        const auto v = get<std::vector<double>>(sc, "constant_stokes");
        if (v.size() != 4) throw pc::ConfigError("config: scene.constant_stokes needs 4 values");
        const pc::StokesVector s{v[0], v[1], v[2], v[3]};
        if (!pc::is_valid(s, 0.0)) throw pc::ConfigError("config: scene.constant_stokes is not a valid Stokes vector");
        return pc::constant_scene(h, w, c, s, wl);
    }
    throw pc::ConfigError("config: scene.kind must be smooth, random or constant");
}

pc::RawCapture simulate(const Context& ctx, const pc::StokesImage& scene, std::uint64_t seed) {
    const json& cam = ctx.cfg.at("camera");
    const pc::NoiseModel noise = noise_model(ctx.cfg.at("noise"), seed);
    if (is_trichromatic(cam))
        return pc::simulate_trichromatic(scene, pc::default_mosaic_layout(), noise, {}, get<double>(cam, "exposure"));
    return pc::simulate_hyperspectral(scene, capture_config(cam), noise, ctx.threads);
}

pc::StokesImage reconstruct(const Context& ctx, const pc::RawCapture& raw) {
    pc::CaptureConfig cfg = capture_config(ctx.cfg.at("camera"));
    return pc::reconstruct_image(raw, cfg, reconstruct_options(ctx));
}

json quality_json(const pc::StokesImage& ref, const pc::StokesImage& test) {
    const pc::QualityReport q = pc::quality(ref, test);
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "nan"); };
    return {{"mse", q.mse},
            {"psnr_db", num(q.psnr)},
            {"peak", q.peak},
            {"max_relative_error", pc::max_relative_error(ref, test)},
            {"rmse", pc::rmse(ref, test)},
            {"jointly_valid_fraction", q.valid_fraction}};
}

pc::LabelFilter label_filter(const json& st) {
    pc::LabelFilter f;
    for (const auto& s : get<std::vector<std::string>>(st, "environments")) f.environments.insert(pc::parse_environment(s));
    for (const auto& s : get<std::vector<std::string>>(st, "illuminations")) f.illuminations.insert(pc::parse_illumination(s));
    for (const auto& s : get<std::vector<std::string>>(st, "scene_types")) f.scene_types.insert(pc::parse_scene_type(s));
    return f;
}

pc::GradientDirection gradient_direction(const json& st) {
    const auto d = get<std::string>(st, "direction");
    if (d == "both") return pc::GradientDirection::both;
    if (d == "horizontal") return pc::GradientDirection::horizontal;
    if (d == "vertical") return pc::GradientDirection::vertical;
    throw pc::ConfigError("config: stats.direction must be both, horizontal or vertical");
}

std::string feature_unit(pc::Feature f) {
    switch (f) {
    case pc::Feature::s0:
    case pc::Feature::s1:
    case pc::Feature::s2:
    case pc::Feature::s3: return "intensity";
    case pc::Feature::aolp: return "rad";
    default: return "1";
    }
}

// ---------------------------------------------------------------------------
// Subcommands

json cmd_simulate(const Context& ctx, const std::string& scene_in, const std::string& scene_out) {
    const std::string out = ctx.require_out("simulate");
    const std::uint64_t seed = ctx.require_seed("simulate");
    const pc::StokesImage scene = scene_in.empty() ? make_scene(ctx, seed) : pc::read_stokes_cube(scene_in);
    const pc::RawCapture raw = simulate(ctx, scene, seed);
    pc::write_spsi(out, raw, ctx.dtype());
    if (!scene_out.empty()) pc::write_spsi(scene_out, scene, ctx.dtype());
    return {{"raw", out},
            {"frames", raw.frames.size()},
            {"height", raw.height},
            {"width", raw.width},
            {"scene", scene_out.empty() ? json(nullptr) : json(scene_out)}};
}

json cmd_reconstruct(const Context& ctx, const std::string& input) {
    const std::string out = ctx.require_out("reconstruct");
    const pc::StokesImage img = reconstruct(ctx, pc::read_raw_capture(input));
    pc::write_spsi(out, img, ctx.dtype());
    return {{"cube", out}, {"channels", img.channels()}, {"valid_fraction", img.valid_fraction()}};
}

json cmd_features(const Context& ctx, const std::string& input) {
    const std::string out = ctx.require_out("features");
    const pc::StokesImage img = pc::read_stokes_cube(input);
    pc::CsvTable t({"y[px]", "x[px]", "channel[index]", "dop[1]", "dolp[1]", "docp[1]", "aolp[rad]", "chi[rad]", "cop[sign]",
                    "aolp_defined[bool]"});
    std::size_t rows = 0;
    for (std::size_t c = 0; c < img.channels(); ++c)
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x) {
                if (!img.valid(y, x, c)) continue;
                const auto f = pc::features(img.stokes(y, x, c));
                t.add_row({std::to_string(y), std::to_string(x), std::to_string(c), pc::format_real(f.rho),
                           pc::format_real(f.dolp), pc::format_real(f.docp), pc::format_real(f.psi),
                           pc::format_real(f.chi), std::to_string(f.cop), f.psi_degenerate ? "0" : "1"});
                ++rows;
            }
    t.write(out);
    return {{"csv", out}, {"rows", rows}};
}

json cmd_decompose(const Context& ctx, const std::string& input) {
    const std::string out = ctx.require_out("decompose");
    const pc::StokesImage img = pc::read_stokes_cube(input);
    const double tol = get<double>(ctx.cfg.at("solver"), "dop_tolerance");
    pc::CsvTable t({"y[px]", "x[px]", "channel[index]", "s0[intensity]", "polarized[intensity]", "unpolarized[intensity]"});
    double sp = 0.0, su = 0.0;
    std::size_t n = 0, skipped = 0;
    for (std::size_t c = 0; c < img.channels(); ++c)
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x) {
                const auto s = img.stokes(y, x, c);
                if (!img.valid(y, x, c) || !pc::is_valid(s, tol)) {
                    ++skipped;
                    continue;
                }
                const auto d = pc::decompose(s, tol);
                t.add_row({std::to_string(y), std::to_string(x), std::to_string(c), pc::format_real(s.s0),
                           pc::format_real(d.polarized), pc::format_real(d.unpolarized)});
                sp += d.polarized;
                su += d.unpolarized;
                ++n;
            }
    t.write(out);
    const double dn = n ? static_cast<double>(n) : 1.0;
    return {{"csv", out}, {"rows", n}, {"skipped_invalid", skipped}, {"mean_polarized", sp / dn}, {"mean_unpolarized", su / dn}};
}

json cmd_validate(const Context& ctx, const std::string& input) {
    pc::StokesImage img = pc::read_stokes_cube(input);
    const double stored = img.valid_fraction();
    img.refine_mask_by_dop(get<double>(ctx.cfg.at("solver"), "dop_tolerance"));
    if (!ctx.out.empty()) pc::write_spsi(ctx.out, img, ctx.dtype());
    return {{"stored_valid_fraction", stored},
            {"valid_fraction", img.valid_fraction()},
            {"valid_entries", img.valid_count()},
            {"entries", img.pixel_count() * img.channels()},
            {"cube", ctx.out.empty() ? json(nullptr) : json(ctx.out)}};
}

json cmd_denoise(const Context& ctx, const std::vector<std::string>& inputs) {
    const std::string out = ctx.require_out("denoise");
    const json& d = ctx.cfg.at("denoise");
    const auto method = get<std::string>(d, "method");
    pc::RawCapture result;
    if (method == "burst") {
        std::vector<pc::RawCapture> caps;
        for (const auto& p : inputs) caps.push_back(pc::read_raw_capture(p));
        result = pc::burst_average(caps);
    } else if (method == "median") {
        if (inputs.size() != 1) throw pc::ConfigError("denoise: median filtering takes exactly one capture");
        result = pc::median_filter(pc::read_raw_capture(inputs[0]), get<std::size_t>(d, "window"), ctx.threads);
    } else {
        throw pc::ConfigError("config: denoise.method must be burst or median");
    }
    pc::write_spsi(out, result, ctx.dtype());
    return {{"raw", out}, {"method", method}, {"inputs", inputs.size()}};
}

json cmd_pca_fit(const Context& ctx, const std::string& input, const std::string& spectrum_csv) {
    const std::string out = ctx.require_out("pca-fit");
    const json& p = ctx.cfg.at("pca");
    const pc::StokesImage img = pc::read_stokes_cube(input);
    const pc::PcaCodebook cb = pc::pca_fit(img, get<std::size_t>(p, "patch_size"), get<std::size_t>(p, "components"));
    pc::write_spsi(out, pc::PcaArtifact{cb, std::nullopt}, ctx.dtype());
    if (!spectrum_csv.empty()) pc::variance_spectrum_csv(cb).write(spectrum_csv);
    const auto spectrum = pc::variance_spectrum(cb);
    double retained = 0.0;
    for (double v : spectrum) retained += v;
    return {{"codebook", out}, {"dimension", cb.dimension()}, {"components", cb.components()}, {"retained_variance", retained}};
}

json cmd_pca_code(const Context& ctx, const std::string& input, const std::string& codebook, const std::string& decoded,
                  const std::string& rd_csv) {
    const std::string out = ctx.require_out("pca-code");
    const pc::StokesImage img = pc::read_stokes_cube(input);
    const pc::PcaCodebook cb = pc::read_pca(codebook).codebook;
    const pc::PcaEncoding enc = pc::pca_encode(img, cb);
    const pc::StokesImage dec = pc::pca_decode(enc, cb);
    pc::write_spsi(out, pc::PcaArtifact{cb, enc}, ctx.dtype());
    if (!decoded.empty()) pc::write_spsi(decoded, dec, ctx.dtype());
    auto ks = get<std::vector<std::size_t>>(ctx.cfg.at("pca"), "rd_components");
    if (!rd_csv.empty()) {
        if (ks.empty())
            for (std::size_t k = 1; k <= cb.components(); ++k) ks.push_back(k);
        pc::export_csv(pc::pca_rate_distortion(img, cb, ks), rd_csv);
    }
    return {{"artifact", out},
            {"mse", pc::pca_mse(img, dec, cb.patch_size)},
            {"bpp_coefficients", pc::bpp(pc::pca_storage_bits(enc, cb, false), img.width(), img.height())},
            {"bpp_with_codebook", pc::bpp(pc::pca_storage_bits(enc, cb, true), img.width(), img.height())},
            {"bpp_raw", pc::bpp(pc::raw_cube_bits(img.width(), img.height(), img.channels()), img.width(), img.height())}};
}

json cmd_inr_fit(const Context& ctx, const std::string& input, const std::string& loss_csv, const std::string& decoded) {
    const std::string out = ctx.require_out("inr-fit");
    const std::uint64_t seed = ctx.require_seed("inr-fit");
    const json& j = ctx.cfg.at("inr");
    const pc::StokesImage img = pc::read_stokes_cube(input);
    pc::InrArchitecture arch{get<std::size_t>(j, "layers"), get<std::size_t>(j, "hidden"), get<std::size_t>(j, "feature_dim"),
                             get<std::size_t>(j, "k_spatial"), get<std::size_t>(j, "k_channel")};
    pc::InrModel m = pc::inr_init(arch, img.height(), img.width(), img.channels(), seed);
    pc::InrTrainOptions o;
    o.steps = get<std::size_t>(j, "steps");
    o.learning_rate = get<double>(j, "learning_rate");
    o.final_learning_rate = get<double>(j, "final_learning_rate");
    o.cosine_decay = get<bool>(j, "cosine_decay");
    o.batch_pixels = get<std::size_t>(j, "batch_pixels");
    o.beta1 = get<double>(j, "beta1");
    o.beta2 = get<double>(j, "beta2");
    o.record_every = std::max<std::size_t>(1, get<std::size_t>(j, "record_every"));
    o.last_layer_only = get<bool>(j, "last_layer_only");
    o.seed = seed;
    if (o.steps == 0 || !(o.learning_rate > 0.0)) throw pc::ConfigError("config: inr.steps and inr.learning_rate must be positive");
    const pc::TrainReport r = pc::inr_train(m, img, o, ctx.threads);
    pc::write_spsi(out, m, img.wavelengths(), ctx.dtype());
    if (!loss_csv.empty()) pc::export_csv(r.loss_curve, loss_csv);
    if (!decoded.empty()) pc::write_spsi(decoded, pc::inr_decode(m, img.height(), img.width(), ctx.threads, img.wavelengths()), ctx.dtype());
    return {{"model", out},
            {"parameters", m.parameter_count()},
            {"bpp", pc::bpp(m.storage_bits(), img.width(), img.height())},
            {"final_mse", r.final_mse},
            {"final_psnr_db", std::isfinite(r.final_psnr) ? json(r.final_psnr) : json("inf")},
            {"steps", r.steps},
            {"wall_seconds", r.wall_seconds}};
}

json cmd_inr_code(const Context& ctx, const std::string& input, const std::string& reference) {
    const std::string out = ctx.require_out("inr-code");
    std::vector<double> wl;
    const pc::InrModel m = pc::read_inr(input, &wl);
    const pc::StokesImage dec = pc::inr_decode(m, m.height, m.width, ctx.threads, wl);
    pc::write_spsi(out, dec, ctx.dtype());
    json s = {{"cube", out}, {"parameters", m.parameter_count()}, {"bpp", pc::bpp(m.storage_bits(), m.width, m.height)}};
    if (!reference.empty()) {
        const pc::StokesImage ref = pc::read_stokes_cube(reference);
        s["mse"] = pc::inr_mse(m, ref, ctx.threads);
        s["quality"] = quality_json(ref, dec);
    }
    return s;
}

json cmd_stats(const Context& ctx, const std::vector<std::string>& inputs) {
    const std::string out = ctx.require_out("stats");
    const json& st = ctx.cfg.at("stats");
    const std::string feature = get<std::string>(st, "feature");
    const auto bins = get<std::size_t>(st, "bins");
    const pc::LabelFilter filter = label_filter(st);

    std::vector<pc::StokesImage> cubes;
    cubes.reserve(inputs.size());
    std::vector<pc::LabeledImage> images;
    for (const auto& p : inputs) {
        cubes.push_back(pc::read_stokes_cube(p));
        const std::string sidecar = p + ".labels.json";
        std::optional<pc::LabelSet> labels;
        if (std::filesystem::exists(sidecar)) labels = pc::read_labels(sidecar);
        images.emplace_back(cubes.back(), labels);
    }
    std::size_t accepted = 0;
    for (const auto& li : images) accepted += filter.accepts(li.labels);

    json s = {{"csv", out}, {"feature", feature}, {"images", inputs.size()}, {"accepted_images", accepted}};
    auto hist_summary = [&](const pc::Histogram& h) {
        s["samples"] = h.total();
        s["range"] = {h.lo(), h.hi()};
        s["bins"] = h.bins();
        s["mean"] = h.mean();
    };

    const std::string suffix = "-gradient";
    if (feature.size() > suffix.size() && feature.compare(feature.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const std::string base = feature.substr(0, feature.size() - suffix.size());
        const auto f = pc::parse_feature(base);
        if (!f) throw pc::ConfigError("stats: unknown feature '" + base + "'");
        const pc::Histogram h = pc::feature_gradient_histogram(images, *f, bins, filter, gradient_direction(st));
        pc::export_csv(h, out, feature_unit(*f));
        hist_summary(h);
    } else if (feature == "docp") {
        const pc::Histogram h = pc::docp_distribution(images, bins, filter);
        pc::export_csv(h, out);
        hist_summary(h);
    } else if (feature == "pol-unpol") {
        const auto [p, u] = pc::pol_unpol_histograms(images, bins, filter, get<double>(ctx.cfg.at("solver"), "dop_tolerance"));
        pc::CsvTable t({"bin_lo[intensity]", "bin_hi[intensity]", "bin_center[intensity]", "polarized_count[samples]",
                        "unpolarized_count[samples]"});
        for (std::size_t i = 0; i < p.bins(); ++i)
            t.add_row({pc::format_real(p.edge(i)), pc::format_real(p.edge(i + 1)), pc::format_real(p.center(i)),
                       std::to_string(p.count(i)), std::to_string(u.count(i))});
        t.write(out);
        s["samples"] = p.total();
        s["mean_polarized"] = p.mean();
        s["mean_unpolarized"] = u.mean();
    } else if (feature == "poincare-s1s2" || feature == "poincare-s1s3") {
        const bool s12 = feature == "poincare-s1s2";
        const pc::DensityGrid g =
            pc::poincare_density(images, s12 ? pc::PoincarePlane::s1_s2 : pc::PoincarePlane::s1_s3, bins, filter);
        pc::export_csv(g, out, "ns1", s12 ? "ns2" : "ns3");
        s["samples"] = g.total();
        s["grid"] = g.size();
    } else {
        const auto f = pc::parse_feature(feature);
        if (!f || static_cast<int>(*f) > static_cast<int>(pc::Feature::ns3))
            throw pc::ConfigError("stats: unknown feature '" + feature +
                                  "' (expected s0..s3, ns1..ns3, docp, pol-unpol, poincare-s1s2, poincare-s1s3 or <feature>-gradient)");
        const pc::Histogram h = pc::stokes_histogram(images, *f, bins, filter);
        pc::export_csv(h, out, feature_unit(*f));
        hist_summary(h);
    }
    return s;
}

json cmd_sfp_stats(const Context& ctx, const std::string& input) {
    const std::string out = ctx.require_out("sfp-stats");
    const pc::NormalMapStack stack = pc::read_normal_stack(input);
    const auto bins = get<std::size_t>(ctx.cfg.at("stats"), "bins");
    const pc::NormalSpectralStats st = pc::normal_spectral_stddev(stack, bins);
    pc::CsvTable t({"statistic[name]", "bin_lo[unit]", "bin_hi[unit]", "count[pixels]", "log_probability[log(1/unit)]"});
    json means;
    const std::pair<const char*, std::pair<const pc::Histogram*, const pc::Plane*>> rows[] = {
        {"std_x", {&st.hist_x, &st.std_x}},
        {"std_y", {&st.hist_y, &st.std_y}},
        {"std_z", {&st.hist_z, &st.std_z}},
        {"std_azimuth_rad", {&st.hist_azimuth, &st.std_azimuth}},
        {"std_elevation_rad", {&st.hist_elevation, &st.std_elevation}}};
    for (const auto& [name, hp] : rows) {
        const auto lp = hp.first->log_probability();
        for (std::size_t i = 0; i < hp.first->bins(); ++i)
            t.add_row({name, pc::format_real(hp.first->edge(i)), pc::format_real(hp.first->edge(i + 1)),
                       std::to_string(hp.first->count(i)), pc::format_real(lp[i])});
        double m = 0.0;
        for (double v : hp.second->values()) m += v;
        means[name] = m / static_cast<double>(hp.second->size());
    }
    t.write(out);
    return {{"csv", out}, {"pixels", stack.height() * stack.width()}, {"channels", stack.channels()}, {"mean", means}};
}

json cmd_roundtrip(const Context& ctx) {
    const std::uint64_t seed = ctx.require_seed("roundtrip");
    const auto start = std::chrono::steady_clock::now();
    const pc::StokesImage scene = make_scene(ctx, seed);
    const pc::RawCapture raw = simulate(ctx, scene, seed);
    const pc::StokesImage rec = reconstruct(ctx, raw);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!ctx.out.empty()) pc::write_spsi(ctx.out, rec, ctx.dtype());
    json s = quality_json(scene, rec);
    s["camera"] = ctx.cfg.at("camera").at("type");
    s["valid_fraction"] = rec.valid_fraction();
    s["seconds"] = seconds;
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polarcube: polarimetric hyperspectral simulation, reconstruction, codecs and statistics"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "RNG seed for stochastic stages");
    app.add_option("--threads", threads, "worker threads (fallback: POLARCUBE_THREADS)");
    app.add_option("--out", out, "output path");

    std::string input, scene_in, scene_out, spectrum_csv, codebook, decoded, rd_csv, loss_csv, reference, camera, method,
        feature, direction;
    std::vector<std::string> inputs;
    std::optional<double> noise;
    std::optional<std::size_t> steps, patch, components, bins, window;

    auto* sim = app.add_subcommand("simulate", "render a synthetic scene through the camera model");
    sim->add_option("--scene", scene_in, "input scene cube (default: synthetic scene from config)");
    sim->add_option("--scene-out", scene_out, "also write the ground-truth scene cube");
    sim->add_option("--camera", camera, "hyperspectral or trichromatic");
    sim->add_option("--noise", noise, "Gaussian read-noise sigma");

    auto* rec = app.add_subcommand("reconstruct", "per-pixel least-squares Stokes reconstruction");
    rec->add_option("input", input, "raw capture")->required();
    rec->add_option("--camera", camera, "hyperspectral or trichromatic");

    auto* fea = app.add_subcommand("features", "per-pixel DoP, DoLP, DoCP, AoLP, ellipticity and chirality (CSV)");
    fea->add_option("input", input, "Stokes cube")->required();

    auto* dec = app.add_subcommand("decompose", "polarized/unpolarized intensity split (CSV)");
    dec->add_option("input", input, "Stokes cube")->required();

    auto* val = app.add_subcommand("validate", "physical-validity check of a Stokes cube");
    val->add_option("input", input, "Stokes cube")->required();

    auto* den = app.add_subcommand("denoise", "burst averaging or median filtering of raw captures");
    den->add_option("inputs", inputs, "raw captures")->required();
    den->add_option("--method", method, "burst or median");
    den->add_option("--window", window, "median window (odd)");

    auto* pfit = app.add_subcommand("pca-fit", "fit a patch-PCA codebook");
    pfit->add_option("input", input, "Stokes cube")->required();
    pfit->add_option("--patch", patch, "patch size");
    pfit->add_option("--components", components, "number of bases");
    pfit->add_option("--spectrum-csv", spectrum_csv, "variance spectrum CSV");

    auto* pcode = app.add_subcommand("pca-code", "encode a cube with a codebook and report rate and distortion");
    pcode->add_option("input", input, "Stokes cube")->required();
    pcode->add_option("--codebook", codebook, "codebook from pca-fit")->required();
    pcode->add_option("--decoded", decoded, "write the decoded cube");
    pcode->add_option("--rd-csv", rd_csv, "rate-distortion CSV");

    auto* ifit = app.add_subcommand("inr-fit", "train a coordinate network on a cube");
    ifit->add_option("input", input, "Stokes cube")->required();
    ifit->add_option("--steps", steps, "training steps");
    ifit->add_option("--loss-csv", loss_csv, "loss curve CSV");
    ifit->add_option("--decoded", decoded, "write the decoded cube");

    auto* icode = app.add_subcommand("inr-code", "decode a trained network to a cube");
    icode->add_option("input", input, "model from inr-fit")->required();
    icode->add_option("--reference", reference, "cube to score against");

    auto* sta = app.add_subcommand("stats", "histograms and densities over one or more cubes (CSV)");
    sta->add_option("inputs", inputs, "Stokes cubes; labels are read from <cube>.labels.json when present")->required();
    sta->add_option("--feature", feature, "s0..s3, ns1..ns3, docp, pol-unpol, poincare-s1s2, poincare-s1s3, <feature>-gradient");
    sta->add_option("--bins", bins, "bin count");
    sta->add_option("--direction", direction, "gradient direction: both, horizontal, vertical");

    auto* sfp = app.add_subcommand("sfp-stats", "spectral spread of surface-normal stacks (CSV)");
    sfp->add_option("input", input, "normal-map stack")->required();
    sfp->add_option("--bins", bins, "bin count");

    auto* rt = app.add_subcommand("roundtrip", "simulate, reconstruct and score in one step");
    rt->add_option("--camera", camera, "hyperspectral or trichromatic");
    rt->add_option("--noise", noise, "Gaussian read-noise sigma");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    Context ctx;
    try {
        ctx.cfg = default_config();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw pc::IoError("cannot open config " + config_path);
            json given;
            try {
                in >> given;
            } catch (const json::exception& e) {
                throw pc::ConfigError("config: malformed JSON in " + config_path + ": " + e.what());
            }
            check_schema(ctx.cfg, given, "");
            ctx.cfg.merge_patch(given);
        }
        if (seed) ctx.cfg["seed"] = *seed;
        if (!camera.empty()) ctx.cfg["camera"]["type"] = camera;
        if (noise) ctx.cfg["noise"]["gaussian_sigma"] = *noise;
        if (!method.empty()) ctx.cfg["denoise"]["method"] = method;
        if (window) ctx.cfg["denoise"]["window"] = *window;
        if (patch) ctx.cfg["pca"]["patch_size"] = *patch;
        if (components) ctx.cfg["pca"]["components"] = *components;
        if (steps) ctx.cfg["inr"]["steps"] = *steps;
        if (!feature.empty()) ctx.cfg["stats"]["feature"] = feature;
        if (bins) ctx.cfg["stats"]["bins"] = *bins;
        if (!direction.empty()) ctx.cfg["stats"]["direction"] = direction;

        if (threads) {
            ctx.cfg["threads"] = *threads;
        } else if (const char* env = std::getenv("POLARCUBE_THREADS")) {
            try {
                ctx.cfg["threads"] = std::stoul(env);
            } catch (const std::exception&) {
                throw pc::ConfigError("POLARCUBE_THREADS must be a non-negative integer");
            }
        }
        ctx.threads = get<unsigned>(ctx.cfg, "threads");
        if (ctx.threads == 0) throw pc::ConfigError("threads must be at least 1");
        ctx.out = out;

        // Validate everything the chosen stage will read before doing any work.
        is_trichromatic(ctx.cfg.at("camera"));
        capture_config(ctx.cfg.at("camera"));
        noise_model(ctx.cfg.at("noise"), 0);
        ctx.dtype();
        label_filter(ctx.cfg.at("stats"));
        gradient_direction(ctx.cfg.at("stats"));
        if (get<std::size_t>(ctx.cfg.at("stats"), "bins") == 0) throw pc::ConfigError("config: stats.bins must be positive");

        emit({{"resolved_config", ctx.cfg}});

        json summary;
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "simulate") summary = cmd_simulate(ctx, scene_in, scene_out);
        else if (name == "reconstruct") summary = cmd_reconstruct(ctx, input);
        else if (name == "features") summary = cmd_features(ctx, input);
        else if (name == "decompose") summary = cmd_decompose(ctx, input);
        else if (name == "validate") summary = cmd_validate(ctx, input);
        else if (name == "denoise") summary = cmd_denoise(ctx, inputs);
        else if (name == "pca-fit") summary = cmd_pca_fit(ctx, input, spectrum_csv);
        else if (name == "pca-code") summary = cmd_pca_code(ctx, input, codebook, decoded, rd_csv);
        else if (name == "inr-fit") summary = cmd_inr_fit(ctx, input, loss_csv, decoded);
        else if (name == "inr-code") summary = cmd_inr_code(ctx, input, reference);
        else if (name == "stats") summary = cmd_stats(ctx, inputs);
        else if (name == "sfp-stats") summary = cmd_sfp_stats(ctx, input);
        else if (name == "roundtrip") summary = cmd_roundtrip(ctx);
        summary["command"] = name;
        emit({{"summary", summary}});
        return 0;
    } catch (const pc::Error& e) {
        std::cerr << "polarcube: " << e.what() << '\n';
        switch (e.category()) {
        case pc::ErrorCategory::config: return kExitConfig;
        case pc::ErrorCategory::io: return kExitIo;
        case pc::ErrorCategory::numerical: return kExitNumerical;
        }
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "polarcube: " << e.what() << '\n';
        return kExitIo;
    }
}
