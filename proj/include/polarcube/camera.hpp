/**
 * @file camera.hpp
 * @brief Forward simulation of the two Stokes cameras.
 *
 * Hyperspectral camera: a rotating QWP in front of a tunable filter that acts
 * as a fixed linear polarizer, one frame per (channel, QWP angle).
 *
 * Trichromatic camera: a single RGGB mosaic frame whose 4x4 superpixel mixes
 * wire-grid polarizer axes with micro-retarders of two fast axes. Pixel
 * (n, m) belongs to segment (n mod 4) * 4 + (m mod 4).
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "parallel.hpp"
#include "stokes.hpp"
#include "system_matrix.hpp"

namespace polarcube {

// ---------------------------------------------------------------------------
// Spectral response

/// Per-channel transmission curves sampled on a shared wavelength grid (nm).
struct SpectralResponse {
    std::vector<double> wavelengths;
    std::vector<std::vector<double>> transmission;  ///< [channel][sample]

    std::size_t channels() const { return transmission.size(); }

    void validate() const {
        if (wavelengths.size() < 2) throw ConfigError("SpectralResponse: need at least two grid samples");
        for (std::size_t i = 1; i < wavelengths.size(); ++i)
            if (!(wavelengths[i] > wavelengths[i - 1])) throw ConfigError("SpectralResponse: grid must be strictly increasing");
        for (const auto& curve : transmission) {
            if (curve.size() != wavelengths.size()) throw ConfigError("SpectralResponse: curve length mismatch");
            for (double t : curve)
                if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("SpectralResponse: transmission outside [0, 1]");
        }
    }

    /// Trapezoidal area under one channel's curve.
    double area(std::size_t channel) const {
        double a = 0.0;
        const auto& t = transmission.at(channel);
        for (std::size_t i = 1; i < wavelengths.size(); ++i)
            a += 0.5 * (t[i] + t[i - 1]) * (wavelengths[i] - wavelengths[i - 1]);
        return a;
    }

    /// Gaussian curves with the given peak wavelengths and full width at half maximum.
    static SpectralResponse gaussian(const std::vector<double>& centers, double fwhm, const std::vector<double>& grid) {
        SpectralResponse r;
        r.wavelengths = grid;
        const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        for (double c : centers) {
            std::vector<double> curve(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double d = (grid[i] - c) / sigma;
                curve[i] = std::exp(-0.5 * d * d);
            }
            r.transmission.push_back(std::move(curve));
        }
        r.validate();
        return r;
    }

    /// Unit-height box filters of the given width centred on each wavelength.
    static SpectralResponse box(const std::vector<double>& centers, double width, const std::vector<double>& grid) {
        SpectralResponse r;
        r.wavelengths = grid;
        for (double c : centers) {
            std::vector<double> curve(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i)
                curve[i] = std::abs(grid[i] - c) <= 0.5 * width + 1e-9 ? 1.0 : 0.0;
            r.transmission.push_back(std::move(curve));
        }
        r.validate();
        return r;
    }
};

/// Uniform grid [first, last] with the given step.
inline std::vector<double> wavelength_grid(double first, double last, double step) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) g.push_back(first + step * static_cast<double>(i));
    return g;
}

/// Gaussian RGB responses (FWHM 30 nm) on a 1 nm grid over 400..700 nm.
inline SpectralResponse default_trichromatic_response() {
    return SpectralResponse::gaussian({600.0, 530.0, 460.0}, 30.0, wavelength_grid(400.0, 700.0, 1.0));
}

/// 10 nm box filters at 450..650 nm, 1 nm grid over 440..660 nm.
inline SpectralResponse default_lctf_response() {
    return SpectralResponse::box(hyperspectral_wavelengths(), 10.0, wavelength_grid(440.0, 660.0, 1.0));
}

/// Trapezoidal integral of transmission * Stokes spectrum for one channel.
inline StokesVector integrate_spectrum(std::span<const StokesVector> spectrum, const SpectralResponse& response,
                                       std::size_t channel) {
    if (spectrum.size() != response.wavelengths.size())
        throw ConfigError("integrate_spectrum: spectrum has " + std::to_string(spectrum.size()) +
                          " samples, response grid has " + std::to_string(response.wavelengths.size()));
    if (channel >= response.channels()) throw ConfigError("integrate_spectrum: channel out of range");
    const auto& t = response.transmission[channel];
    const auto& w = response.wavelengths;
    StokesVector acc;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const double h = 0.5 * (w[i] - w[i - 1]);
        for (std::size_t k = 0; k < 4; ++k) acc[k] += h * (t[i] * spectrum[i][k] + t[i - 1] * spectrum[i - 1][k]);
    }
    return acc;
}

/// Recorded intensity of one configuration: [M_c(config) * integral(Omega * s)]_0.
inline double measure_intensity(std::span<const StokesVector> spectrum, const MeasurementConfig& config,
                                const SpectralResponse& response, std::size_t channel,
                                const MuellerMatrix& calibration = MuellerMatrix::identity()) {
    const StokesVector sc = integrate_spectrum(spectrum, response, channel);
    return apply(modulation_mueller(config, calibration), sc).s0;
}

// ---------------------------------------------------------------------------
// Noise

struct NoiseModel {
    double gaussian_sigma = 0.0;
    double shot_gain = 0.0;  ///< signal-proportional variance
    double saturation_level = 1.0;
    double black_level = 0.0;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(gaussian_sigma >= 0.0) || !(shot_gain >= 0.0)) throw ConfigError("NoiseModel: sigma and gains must be >= 0");
        if (!(black_level < saturation_level)) throw ConfigError("NoiseModel: black_level must be below saturation_level");
    }
    bool noiseless() const { return gaussian_sigma == 0.0 && shot_gain == 0.0; }
};

/// Adds Gaussian read noise plus signal-dependent shot noise and clips to
/// [black_level, saturation_level]. `stream` selects an independent random
/// stream so frames can be generated in any order.
inline Plane add_noise(const Plane& frame, const NoiseModel& model, std::uint64_t stream = 0) {
    model.validate();
    Plane out = frame;
    std::seed_seq seq{static_cast<std::uint32_t>(model.rng_seed), static_cast<std::uint32_t>(model.rng_seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (double& v : out.values()) {
        if (!model.noiseless()) {
            const double var = model.gaussian_sigma * model.gaussian_sigma + model.shot_gain * std::max(v, 0.0);
            v += std::sqrt(var) * unit(rng);
        }
        v = std::clamp(v, model.black_level, model.saturation_level);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mosaic layout

enum class BayerColor : std::uint8_t { red = 0, green = 1, blue = 2 };

struct MosaicCell {
    BayerColor color = BayerColor::green;
    double polarizer_axis = 0.0;
    double retarder_axis = 0.0;
    double retardance = deg(45.0);

    MeasurementConfig measurement() const { return {retarder_axis, retardance, polarizer_axis, true}; }
    friend bool operator==(const MosaicCell&, const MosaicCell&) = default;
};

inline constexpr std::size_t segment_index(std::size_t row, std::size_t col) { return (row % 4) * 4 + (col % 4); }

/// 4x4 superpixel description. Construction checks 4/8/4 R/G/B cells and a
/// rank-4 system for every color.
class MosaicLayout {
public:
    explicit MosaicLayout(const std::array<MosaicCell, 16>& cells) : cells_(cells) {
        std::array<int, 3> counts{};
        for (const auto& c : cells_) ++counts[static_cast<std::size_t>(c.color)];
        if (counts[0] != 4 || counts[1] != 8 || counts[2] != 4)
            throw ConfigError("MosaicLayout: expected 4 red, 8 green, 4 blue cells");
        for (int color = 0; color < 3; ++color) {
            const SystemMatrix sm = analyze_system(system_rows(configs(static_cast<BayerColor>(color)), MuellerMatrix::identity()));
            if (sm.rank < 4) throw DegenerateConfigurationError(sm.rank, sm.condition_number);
        }
    }

    const MosaicCell& cell(std::size_t k) const { return cells_.at(k); }
    const std::array<MosaicCell, 16>& cells() const { return cells_; }

    /// Segment indices holding the given color, ascending.
    std::vector<std::size_t> segments(BayerColor color) const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < 16; ++k)
            if (cells_[k].color == color) out.push_back(k);
        return out;
    }

    std::vector<MeasurementConfig> configs(BayerColor color) const {
        std::vector<MeasurementConfig> out;
        for (std::size_t k : segments(color)) out.push_back(cells_[k].measurement());
        return out;
    }

    CaptureConfig capture_config(BayerColor color, const MuellerMatrix& calibration = MuellerMatrix::identity(),
                                 double exposure = 1.0) const {
        CaptureConfig c;
        c.configs = configs(color);
        c.calibration = {calibration};
        c.exposure = exposure;
        return c;
    }

    friend bool operator==(const MosaicLayout&, const MosaicLayout&) = default;

private:
    std::array<MosaicCell, 16> cells_;
};

/// RGGB quadrants, each holding wire-grid axes 90/45 over 135/0 degrees.
/// Micro-retarders (45 degree retardance) alternate fast axes 0 and 90
/// degrees by column so every color sees both retarder orientations.
inline MosaicLayout default_mosaic_layout() {
    std::array<MosaicCell, 16> cells{};
    const std::array<double, 4> pol = {deg(90.0), deg(45.0), deg(135.0), deg(0.0)};  // (0,0) (0,1) (1,0) (1,1)
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            MosaicCell& cell = cells[r * 4 + c];
            const bool top = r < 2, left = c < 2;
            cell.color = top && left ? BayerColor::red : (!top && !left ? BayerColor::blue : BayerColor::green);
            cell.polarizer_axis = pol[(r % 2) * 2 + (c % 2)];
            cell.retarder_axis = (c % 2 == 0) ? 0.0 : deg(90.0);
            cell.retardance = deg(45.0);
        }
    return MosaicLayout(cells);
}

// ---------------------------------------------------------------------------
// Raw captures

struct RawFrame {
    std::size_t channel = 0;
    std::size_t config_index = 0;
    Plane data;

    friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

/// Intensity frames plus the sensor range they were clipped to. A capture
/// with a layout holds a single mosaic frame.
struct RawCapture {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<RawFrame> frames;
    std::vector<double> wavelengths;
    double saturation_level = 1.0;
    double black_level = 0.0;
    std::optional<MosaicLayout> layout;

    const RawFrame* find(std::size_t channel, std::size_t config_index) const {
        for (const auto& f : frames)
            if (f.channel == channel && f.config_index == config_index) return &f;
        return nullptr;
    }

    friend bool operator==(const RawCapture&, const RawCapture&) = default;
};

namespace detail {
inline void require_finite_scene(const StokesImage& scene) {
    for (double v : scene.raw())
        if (!std::isfinite(v)) throw ConfigError("scene contains non-finite values");
}
} // namespace detail

/// One frame per (channel, configuration). Scene channels hold per-channel
/// Stokes vectors, i.e. already integrated against the channel response.
inline RawCapture simulate_hyperspectral(const StokesImage& scene, const CaptureConfig& config, const NoiseModel& noise,
                                         unsigned threads = 1) {
    if (config.configs.empty()) throw ConfigError("simulate_hyperspectral: empty configuration list");
    noise.validate();
    detail::require_finite_scene(scene);
    const std::size_t channels = scene.channels();
    const std::size_t m = config.configs.size();
    for (std::size_t c = 0; c < channels; ++c) (void)system_matrix(config, c);  // rank check

    RawCapture raw;
    raw.height = scene.height();
    raw.width = scene.width();
    raw.wavelengths = scene.wavelengths();
    raw.saturation_level = noise.saturation_level;
    raw.black_level = noise.black_level;
    raw.frames.resize(channels * m);

    parallel_for(channels * m, threads, [&](std::size_t idx) {
        const std::size_t c = idx / m, i = idx % m;
        const MuellerMatrix mm = modulation_mueller(config.configs[i], config.calibration_for(c));
        Plane frame(scene.height(), scene.width());
        for (std::size_t y = 0; y < scene.height(); ++y)
            for (std::size_t x = 0; x < scene.width(); ++x)
                frame(y, x) = config.exposure * apply(mm, scene.stokes(y, x, c)).s0;
        raw.frames[idx] = RawFrame{c, i, add_noise(frame, noise, idx)};
    });
    return raw;
}

inline RawCapture simulate_hyperspectral(const StokesImage& scene, const std::vector<double>& qwp_angles,
                                         double lp_angle, const NoiseModel& noise, unsigned threads = 1) {
    if (qwp_angles.empty()) throw ConfigError("simulate_hyperspectral: empty angle list");
    return simulate_hyperspectral(scene, CaptureConfig::rotating_qwp(qwp_angles, lp_angle), noise, threads);
}

/// Single mosaic frame; pixel (n, m) records its cell's configuration applied
/// to the scene channel of its cell's color.
inline RawCapture simulate_trichromatic(const StokesImage& scene, const MosaicLayout& layout, const NoiseModel& noise,
                                        const std::vector<MuellerMatrix>& calibration = {}, double exposure = 1.0) {
    if (scene.channels() != 3) throw ConfigError("simulate_trichromatic: scene must have 3 channels");
    if (scene.height() % 4 != 0 || scene.width() % 4 != 0)
        throw ConfigError("simulate_trichromatic: dimensions must be divisible by 4");
    if (!calibration.empty() && calibration.size() != 3) throw ConfigError("simulate_trichromatic: need 3 calibration matrices");
    noise.validate();
    detail::require_finite_scene(scene);

    std::array<MuellerMatrix, 16> cell_m;
    for (std::size_t k = 0; k < 16; ++k) {
        const auto color = static_cast<std::size_t>(layout.cell(k).color);
        cell_m[k] = modulation_mueller(layout.cell(k).measurement(),
                                       calibration.empty() ? MuellerMatrix::identity() : calibration[color]);
    }
    Plane frame(scene.height(), scene.width());
    for (std::size_t y = 0; y < scene.height(); ++y)
        for (std::size_t x = 0; x < scene.width(); ++x) {
            const std::size_t k = segment_index(y, x);
            const auto color = static_cast<std::size_t>(layout.cell(k).color);
            frame(y, x) = exposure * apply(cell_m[k], scene.stokes(y, x, color)).s0;
        }

    RawCapture raw;
    raw.height = scene.height();
    raw.width = scene.width();
    raw.wavelengths = scene.wavelengths();
    raw.saturation_level = noise.saturation_level;
    raw.black_level = noise.black_level;
    raw.layout = layout;
    raw.frames.push_back(RawFrame{0, 0, add_noise(frame, noise, 0)});
    return raw;
}

// ---------------------------------------------------------------------------
// Mosaic segmentation and demosaicing

/// Sixteen (H/4) x (W/4) segment images; segment K holds pixels with
/// (n mod 4) * 4 + (m mod 4) == K.
inline std::vector<Plane> mosaic_split(const Plane& frame) {
    if (frame.height() % 4 != 0 || frame.width() % 4 != 0 || frame.empty())
        throw ConfigError("mosaic_split: dimensions must be positive multiples of 4");
    const std::size_t h = frame.height() / 4, w = frame.width() / 4;
    std::vector<Plane> seg(16, Plane(h, w));
    for (std::size_t y = 0; y < frame.height(); ++y)
        for (std::size_t x = 0; x < frame.width(); ++x) seg[segment_index(y, x)](y / 4, x / 4) = frame(y, x);
    return seg;
}

inline Plane mosaic_merge(const std::vector<Plane>& segments) {
    if (segments.size() != 16) throw ConfigError("mosaic_merge: need 16 segments");
    for (const auto& s : segments)
        if (!s.same_shape(segments[0])) throw ConfigError("mosaic_merge: inconsistent segment dims");
    const std::size_t h = segments[0].height(), w = segments[0].width();
    Plane frame(h * 4, w * 4);
    for (std::size_t y = 0; y < frame.height(); ++y)
        for (std::size_t x = 0; x < frame.width(); ++x) frame(y, x) = segments[segment_index(y, x)](y / 4, x / 4);
    return frame;
}

namespace detail {
/// Bracketing sample indices and weight for coordinate u in sample units.
/// Beyond the outermost samples the nearest pair is extrapolated linearly.
struct LerpTap {
    std::size_t i0, i1;
    double t;
};
inline LerpTap lerp_tap(double u, std::size_t n) {
    if (n == 1) return {0, 0, 0.0};
    double base = std::floor(u);
    if (base < 0.0) base = 0.0;
    if (base > static_cast<double>(n - 2)) base = static_cast<double>(n - 2);
    const auto i0 = static_cast<std::size_t>(base);
    return {i0, i0 + 1, u - base};
}
} // namespace detail

/// Bilinear upsampling of each segment to full resolution. Segment K's sample
/// (i, j) sits at full-resolution pixel (4i + K/4, 4j + K%4); those values are
/// reproduced exactly and affine signals are reproduced everywhere.
inline std::vector<Plane> demosaic(const std::vector<Plane>& segments, unsigned threads = 1) {
    if (segments.size() != 16) throw ConfigError("demosaic: need 16 segments");
    for (const auto& s : segments)
        if (!s.same_shape(segments[0]) || s.empty()) throw ConfigError("demosaic: inconsistent segment dims");
    const std::size_t h = segments[0].height(), w = segments[0].width();
    std::vector<Plane> out(16, Plane(h * 4, w * 4));
    parallel_for(16, threads, [&](std::size_t k) {
        const double dy = static_cast<double>(k / 4), dx = static_cast<double>(k % 4);
        const Plane& seg = segments[k];
        Plane& dst = out[k];
        for (std::size_t y = 0; y < h * 4; ++y) {
            const auto ty = detail::lerp_tap((static_cast<double>(y) - dy) / 4.0, h);
            for (std::size_t x = 0; x < w * 4; ++x) {
                const auto tx = detail::lerp_tap((static_cast<double>(x) - dx) / 4.0, w);
                const double top = (1.0 - tx.t) * seg(ty.i0, tx.i0) + tx.t * seg(ty.i0, tx.i1);
                const double bot = (1.0 - tx.t) * seg(ty.i1, tx.i0) + tx.t * seg(ty.i1, tx.i1);
                dst(y, x) = (1.0 - ty.t) * top + ty.t * bot;
            }
        }
    });
    return out;
}

} // namespace polarcube
