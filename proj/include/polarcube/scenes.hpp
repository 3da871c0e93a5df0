/**
 * @file scenes.hpp
 * @brief Synthetic Stokes scenes for simulation, tests and demos.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "image.hpp"
#include "stokes.hpp"

namespace polarcube {

/// Stokes vector from intensity, DoP, AoLP and ellipticity angle.
inline StokesVector stokes_from_ellipse(double s0, double dop, double psi, double chi) {
    const double p = s0 * dop;
    return {s0, p * std::cos(2.0 * chi) * std::cos(2.0 * psi), p * std::cos(2.0 * chi) * std::sin(2.0 * psi),
            p * std::sin(2.0 * chi)};
}

struct SmoothSceneOptions {
    double intensity_mean = 0.5;
    double intensity_swing = 0.3;
    double max_dop = 0.8;
    double max_chi = std::numbers::pi / 8.0;
    double cycles = 1.5;  ///< spatial frequency across the image
    std::uint64_t seed = 1;
};

/// Band-limited scene: each quantity is a sum of a few random low-frequency
/// sinusoids, varying smoothly across space and channel. Every entry is a
/// valid Stokes vector and is marked valid.
inline StokesImage smooth_scene(std::size_t height, std::size_t width, std::size_t channels,
                                const SmoothSceneOptions& opt = {}, std::vector<double> wavelengths = {}) {
    StokesImage img(height, width, channels, std::move(wavelengths));
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> freq(0.5, 1.0);
    struct Wave {
        double fx, fy, fc, ph;
    };
    auto make = [&] {
        std::vector<Wave> w(3);
        for (auto& v : w) v = {freq(rng) * opt.cycles, freq(rng) * opt.cycles, freq(rng), phase(rng)};
        return w;
    };
    const auto w_s0 = make(), w_dop = make(), w_psi = make(), w_chi = make();
    auto eval = [](const std::vector<Wave>& ws, double u, double v, double t) {
        double s = 0.0;
        for (const auto& w : ws) s += std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.fc * t + w.ph);
        return s / static_cast<double>(ws.size());
    };
    for (std::size_t c = 0; c < channels; ++c) {
        const double t = channels > 1 ? static_cast<double>(c) / static_cast<double>(channels - 1) : 0.0;
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const double u = width > 1 ? static_cast<double>(x) / static_cast<double>(width - 1) : 0.0;
                const double v = height > 1 ? static_cast<double>(y) / static_cast<double>(height - 1) : 0.0;
                const double s0 = opt.intensity_mean + opt.intensity_swing * eval(w_s0, u, v, t);
                const double dop = opt.max_dop * 0.5 * (1.0 + eval(w_dop, u, v, t));
                const double psi = std::numbers::pi / 2.0 * eval(w_psi, u, v, t);
                const double chi = opt.max_chi * eval(w_chi, u, v, t);
                img.set_stokes(y, x, c, stokes_from_ellipse(s0, dop, psi, chi));
            }
    }
    return img;
}

inline StokesImage constant_scene(std::size_t height, std::size_t width, std::size_t channels, const StokesVector& s,
                                  std::vector<double> wavelengths = {}) {
    StokesImage img(height, width, channels, std::move(wavelengths));
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) img.set_stokes(y, x, c, s);
    return img;
}

/// Uniform random valid Stokes vector with s0 in [s0_lo, s0_hi].
inline StokesVector random_valid_stokes(std::mt19937_64& rng, double s0_lo = 0.1, double s0_hi = 1.0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double s0 = s0_lo + (s0_hi - s0_lo) * u01(rng);
    const double dop = u01(rng);
    const double z = 2.0 * u01(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * u01(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s0, s0 * dop * r * std::cos(phi), s0 * dop * r * std::sin(phi), s0 * dop * z};
}

/// Independent random valid vectors per entry.
inline StokesImage random_scene(std::size_t height, std::size_t width, std::size_t channels, std::uint64_t seed,
                                std::vector<double> wavelengths = {}) {
    StokesImage img(height, width, channels, std::move(wavelengths));
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) img.set_stokes(y, x, c, random_valid_stokes(rng));
    return img;
}

} // namespace polarcube
