/**
 * @file reconstruct.hpp
 * @brief Per-pixel least-squares Stokes estimation, burst averaging, median
 * filtering and reconstruction quality metrics.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "camera.hpp"
#include "error.hpp"
#include "image.hpp"
#include "parallel.hpp"
#include "system_matrix.hpp"

namespace polarcube {

struct ReconstructOptions {
    double dop_tolerance = kDefaultValidityTolerance;
    /// Samples at or above this fraction of the saturation level are saturated.
    double saturation_fraction = 0.998;
    /// Samples at or below this multiple of the black level are underexposed.
    double underexposure_factor = 2.0;
    unsigned threads = 1;
};

namespace detail {
struct ExposureLimits {
    double high, low;
    bool clipped(double v) const { return v >= high || v <= low; }
};
inline ExposureLimits exposure_limits(const RawCapture& raw, const ReconstructOptions& opt) {
    return {opt.saturation_fraction * raw.saturation_level, opt.underexposure_factor * raw.black_level};
}

inline StokesImage reconstruct_hyperspectral(const RawCapture& raw, const CaptureConfig& config,
                                             const ReconstructOptions& opt) {
    const std::size_t m = config.configs.size();
    std::size_t channels = 0;
    for (const auto& f : raw.frames) channels = std::max(channels, f.channel + 1);
    if (channels == 0) throw ConfigError("reconstruct_image: capture has no frames");

    std::vector<const Plane*> frames(channels * m, nullptr);
    for (const auto& f : raw.frames) {
        if (f.config_index >= m) throw ConfigError("reconstruct_image: frame references unknown configuration");
        if (f.data.height() != raw.height || f.data.width() != raw.width)
            throw ConfigError("reconstruct_image: frame dims do not match capture");
        frames[f.channel * m + f.config_index] = &f.data;
    }
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (!frames[i])
            throw ConfigError("reconstruct_image: missing frame for channel " + std::to_string(i / m) + ", configuration " +
                              std::to_string(i % m));

    std::vector<double> wl = raw.wavelengths;
    if (!wl.empty() && wl.size() != channels) wl.clear();
    StokesImage out(raw.height, raw.width, channels, wl);
    const auto limits = exposure_limits(raw, opt);

    for (std::size_t c = 0; c < channels; ++c) {
        const StokesSolver solver(system_matrix(config, c));
        parallel_for(raw.height, opt.threads, [&](std::size_t y) {
            std::vector<double> intensities(m);
            for (std::size_t x = 0; x < raw.width; ++x) {
                bool clipped = false;
                for (std::size_t i = 0; i < m; ++i) {
                    intensities[i] = (*frames[c * m + i])(y, x);
                    clipped = clipped || limits.clipped(intensities[i]);
                }
                const StokesVector s = solver.solve(intensities);
                out.set_stokes(y, x, c, s);
                out.set_valid(y, x, c, !clipped && is_valid(s, opt.dop_tolerance));
            }
        });
    }
    return out;
}

inline StokesImage reconstruct_trichromatic(const RawCapture& raw, const std::vector<MuellerMatrix>& calibration,
                                            double exposure, const ReconstructOptions& opt) {
    if (raw.frames.size() != 1) throw ConfigError("reconstruct_image: mosaic capture must hold exactly one frame");
    const MosaicLayout& layout = *raw.layout;
    const Plane& frame = raw.frames[0].data;
    const auto limits = exposure_limits(raw, opt);

    const auto segments = mosaic_split(frame);
    std::vector<Plane> flag_segments;
    flag_segments.reserve(16);
    for (const auto& seg : segments) {
        Plane f(seg.height(), seg.width());
        for (std::size_t i = 0; i < seg.size(); ++i) f.values()[i] = limits.clipped(seg.values()[i]) ? 1.0 : 0.0;
        flag_segments.push_back(std::move(f));
    }
    const auto planes = demosaic(segments, opt.threads);
    const auto flags = demosaic(flag_segments, opt.threads);

    std::vector<double> wl = raw.wavelengths;
    if (wl.size() != 3) wl.clear();
    StokesImage out(raw.height, raw.width, 3, wl);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto color = static_cast<BayerColor>(c);
        const auto segs = layout.segments(color);
        const StokesSolver solver(system_matrix(
            layout.capture_config(color, calibration.empty() ? MuellerMatrix::identity() : calibration.at(c), exposure)));
        parallel_for(raw.height, opt.threads, [&](std::size_t y) {
            std::vector<double> intensities(segs.size());
            for (std::size_t x = 0; x < raw.width; ++x) {
                bool clipped = false;
                for (std::size_t i = 0; i < segs.size(); ++i) {
                    intensities[i] = planes[segs[i]](y, x);
                    clipped = clipped || flags[segs[i]](y, x) != 0.0;
                }
                const StokesVector s = solver.solve(intensities);
                out.set_stokes(y, x, c, s);
                out.set_valid(y, x, c, !clipped && is_valid(s, opt.dop_tolerance));
            }
        });
    }
    return out;
}
} // namespace detail

/// Per-pixel per-channel least-squares reconstruction. For mosaic captures
/// the configuration's calibration holds one matrix per color (or none) and
/// its configuration list is ignored in favour of the layout.
inline StokesImage reconstruct_image(const RawCapture& raw, const CaptureConfig& config,
                                     const ReconstructOptions& opt = {}) {
    if (raw.layout) return detail::reconstruct_trichromatic(raw, config.calibration, config.exposure, opt);
    return detail::reconstruct_hyperspectral(raw, config, opt);
}

/// Per-pixel system matrices, e.g. from a calibrated per-pixel Mueller model.
/// `system_for(y, x, channel)` must return a rank-4 matrix whose rows follow
/// the capture's configuration order.
using PixelSystemFn = std::function<SystemMatrix(std::size_t, std::size_t, std::size_t)>;

inline StokesImage reconstruct_image(const RawCapture& raw, std::size_t configs_per_channel,
                                     const PixelSystemFn& system_for, const ReconstructOptions& opt = {}) {
    if (raw.layout) throw ConfigError("reconstruct_image: per-pixel systems are only supported for frame stacks");
    const std::size_t m = configs_per_channel;
    std::size_t channels = 0;
    for (const auto& f : raw.frames) channels = std::max(channels, f.channel + 1);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < m; ++i)
            if (!raw.find(c, i)) throw ConfigError("reconstruct_image: missing frame");
    StokesImage out(raw.height, raw.width, channels, raw.wavelengths.size() == channels ? raw.wavelengths : std::vector<double>{});
    const auto limits = detail::exposure_limits(raw, opt);
    for (std::size_t c = 0; c < channels; ++c) {
        std::vector<const Plane*> frames(m);
        for (std::size_t i = 0; i < m; ++i) frames[i] = &raw.find(c, i)->data;
        parallel_for(raw.height, opt.threads, [&](std::size_t y) {
            std::vector<double> intensities(m);
            for (std::size_t x = 0; x < raw.width; ++x) {
                bool clipped = false;
                for (std::size_t i = 0; i < m; ++i) {
                    intensities[i] = (*frames[i])(y, x);
                    clipped = clipped || limits.clipped(intensities[i]);
                }
                const SystemMatrix sm = system_for(y, x, c);
                if (sm.rows() != m) throw ConfigError("reconstruct_image: per-pixel system has wrong row count");
                const StokesVector s = StokesSolver(sm).solve(intensities);
                out.set_stokes(y, x, c, s);
                out.set_valid(y, x, c, !clipped && is_valid(s, opt.dop_tolerance));
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Burst averaging and median filtering

/// Pixelwise arithmetic mean of equally sized frames.
inline Plane burst_average(const std::vector<Plane>& frames) {
    if (frames.empty()) throw ConfigError("burst_average: empty frame list");
    Plane acc(frames[0].height(), frames[0].width());
    for (const auto& f : frames) {
        if (!f.same_shape(acc)) throw ConfigError("burst_average: frame dims differ");
        for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += f.values()[i];
    }
    const double n = static_cast<double>(frames.size());
    for (double& v : acc.values()) v /= n;
    return acc;
}

/// Burst average of whole captures, frame by frame. Captures must share
/// structure (same frame tags, same order).
inline RawCapture burst_average(const std::vector<RawCapture>& captures) {
    if (captures.empty()) throw ConfigError("burst_average: empty capture list");
    RawCapture out = captures[0];
    for (std::size_t f = 0; f < out.frames.size(); ++f) {
        std::vector<Plane> stack;
        stack.reserve(captures.size());
        for (const auto& cap : captures) {
            if (cap.frames.size() != out.frames.size() || cap.frames[f].channel != out.frames[f].channel ||
                cap.frames[f].config_index != out.frames[f].config_index)
                throw ConfigError("burst_average: captures differ in frame structure");
            stack.push_back(cap.frames[f].data);
        }
        out.frames[f].data = burst_average(stack);
    }
    return out;
}

/// k x k median with edge replication; k must be odd.
inline Plane median_filter(const Plane& frame, std::size_t k, unsigned threads = 1) {
    if (k == 0 || k % 2 == 0) throw ConfigError("median_filter: window size must be odd and positive");
    if (k == 1) return frame;
    const auto r = static_cast<std::ptrdiff_t>(k / 2);
    const auto h = static_cast<std::ptrdiff_t>(frame.height());
    const auto w = static_cast<std::ptrdiff_t>(frame.width());
    Plane out(frame.height(), frame.width());
    parallel_for(frame.height(), threads, [&](std::size_t yy) {
        std::vector<double> window(k * k);
        const auto y = static_cast<std::ptrdiff_t>(yy);
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            std::size_t n = 0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                    const auto sy = std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1);
                    const auto sx = std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1);
                    window[n++] = frame(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
                }
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
            std::nth_element(window.begin(), mid, window.end());
            out(yy, static_cast<std::size_t>(x)) = *mid;
        }
    });
    return out;
}

/// Median filter applied to every frame of a capture.
inline RawCapture median_filter(const RawCapture& raw, std::size_t k, unsigned threads = 1) {
    RawCapture out = raw;
    for (auto& f : out.frames) f.data = median_filter(f.data, k, threads);
    return out;
}

// ---------------------------------------------------------------------------
// Quality

/// PSNR reported when the error is exactly zero.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline double psnr_from_mse(double mse, double peak) {
    if (mse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(peak * peak / mse);
}

struct QualityReport {
    double mse = 0.0;
    double psnr = 0.0;
    double peak = 0.0;
    std::array<double, 4> element_mse{};
    std::array<double, 4> element_psnr{};
    std::vector<double> channel_psnr;
    std::vector<std::array<double, 4>> channel_element_psnr;
    double valid_fraction = 0.0;  ///< jointly valid entries / all entries
    std::size_t samples = 0;      ///< jointly valid (pixel, channel) entries
};

/// Error metrics over jointly valid (pixel, channel) entries. Peak is the
/// maximum s0 of the reference over those entries.
inline QualityReport quality(const StokesImage& reference, const StokesImage& test) {
    if (!reference.same_shape(test)) throw ConfigError("quality: image dims differ");
    const std::size_t h = reference.height(), w = reference.width(), channels = reference.channels();
    QualityReport q;
    std::array<double, 4> sum{};
    std::vector<std::array<double, 4>> ch_sum(channels, std::array<double, 4>{});
    std::vector<std::size_t> ch_n(channels, 0);
    double peak = 0.0;
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                if (!reference.valid(y, x, c) || !test.valid(y, x, c)) continue;
                ++q.samples;
                ++ch_n[c];
                peak = std::max(peak, reference.at(y, x, c, 0));
                for (std::size_t k = 0; k < 4; ++k) {
                    const double d = reference.at(y, x, c, k) - test.at(y, x, c, k);
                    sum[k] += d * d;
                    ch_sum[c][k] += d * d;
                }
            }
    if (q.samples == 0) throw NumericalError("quality: no jointly valid pixels");
    q.peak = peak;
    const double n = static_cast<double>(q.samples);
    double total = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        q.element_mse[k] = sum[k] / n;
        q.element_psnr[k] = psnr_from_mse(q.element_mse[k], peak);
        total += sum[k];
    }
    q.mse = total / (4.0 * n);
    q.psnr = psnr_from_mse(q.mse, peak);
    q.channel_psnr.assign(channels, std::numeric_limits<double>::quiet_NaN());
    q.channel_element_psnr.assign(channels, std::array<double, 4>{});
    for (std::size_t c = 0; c < channels; ++c) {
        if (ch_n[c] == 0) {
            q.channel_element_psnr[c].fill(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double cn = static_cast<double>(ch_n[c]);
        double ct = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            q.channel_element_psnr[c][k] = psnr_from_mse(ch_sum[c][k] / cn, peak);
            ct += ch_sum[c][k];
        }
        q.channel_psnr[c] = psnr_from_mse(ct / (4.0 * cn), peak);
    }
    q.valid_fraction = n / static_cast<double>(h * w * channels);
    return q;
}

/// Largest |s_hat - s| over every entry, divided by the largest reference s0.
inline double max_relative_error(const StokesImage& reference, const StokesImage& test) {
    if (!reference.same_shape(test)) throw ConfigError("max_relative_error: image dims differ");
    double peak = 0.0, err = 0.0;
    for (std::size_t c = 0; c < reference.channels(); ++c)
        for (std::size_t y = 0; y < reference.height(); ++y)
            for (std::size_t x = 0; x < reference.width(); ++x) peak = std::max(peak, reference.at(y, x, c, 0));
    const auto a = reference.raw();
    const auto b = test.raw();
    for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
    return peak > 0.0 ? err / peak : err;
}

/// Root mean square error over every Stokes entry.
inline double rmse(const StokesImage& reference, const StokesImage& test) {
    if (!reference.same_shape(test)) throw ConfigError("rmse: image dims differ");
    const auto a = reference.raw();
    const auto b = test.raw();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

} // namespace polarcube
