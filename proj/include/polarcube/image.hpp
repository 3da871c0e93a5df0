/**
 * @file image.hpp
 * @brief Dense image containers: scalar planes and hyperspectral Stokes cubes.
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"
#include "stokes.hpp"

namespace polarcube {

/// Row-major height x width plane of doubles.
class Plane {
public:
    Plane() = default;
    Plane(std::size_t height, std::size_t width, double fill = 0.0)
        : height_(height), width_(width), data_(height * width, fill) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    double operator()(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool same_shape(const Plane& other) const { return height_ == other.height_ && width_ == other.width_; }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// Per-pixel, per-channel Stokes vectors with a validity mask.
///
/// Storage is channel-major, then Stokes component, then row-major, which is
/// also the on-disk order of the container format.
class StokesImage {
public:
    StokesImage() = default;
    StokesImage(std::size_t height, std::size_t width, std::size_t channels,
                std::vector<double> wavelengths = {})
        : height_(height), width_(width), channels_(channels), wavelengths_(std::move(wavelengths)),
          data_(height * width * channels * 4, 0.0), mask_(height * width * channels, 1) {
        if (!wavelengths_.empty() && wavelengths_.size() != channels)
            throw ConfigError("StokesImage: wavelength table length must equal channel count");
    }

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::size_t pixel_count() const { return height_ * width_; }
    const std::vector<double>& wavelengths() const { return wavelengths_; }
    void set_wavelengths(std::vector<double> w) {
        if (!w.empty() && w.size() != channels_) throw ConfigError("StokesImage: wavelength table length mismatch");
        wavelengths_ = std::move(w);
    }

    double& at(std::size_t y, std::size_t x, std::size_t c, std::size_t k) {
        return data_[((c * 4 + k) * height_ + y) * width_ + x];
    }
    double at(std::size_t y, std::size_t x, std::size_t c, std::size_t k) const {
        return data_[((c * 4 + k) * height_ + y) * width_ + x];
    }

    StokesVector stokes(std::size_t y, std::size_t x, std::size_t c) const {
        return {at(y, x, c, 0), at(y, x, c, 1), at(y, x, c, 2), at(y, x, c, 3)};
    }
    void set_stokes(std::size_t y, std::size_t x, std::size_t c, const StokesVector& s) {
        for (std::size_t k = 0; k < 4; ++k) at(y, x, c, k) = s[k];
    }

    bool valid(std::size_t y, std::size_t x, std::size_t c) const {
        return mask_[(c * height_ + y) * width_ + x] != 0;
    }
    void set_valid(std::size_t y, std::size_t x, std::size_t c, bool v) {
        mask_[(c * height_ + y) * width_ + x] = v ? 1 : 0;
    }

    /// One Stokes component of one channel as a plane.
    Plane component(std::size_t c, std::size_t k) const {
        Plane p(height_, width_);
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>((c * 4 + k) * pixel_count()), pixel_count(),
                    p.values().begin());
        return p;
    }

    std::span<double> raw() { return data_; }
    std::span<const double> raw() const { return data_; }
    std::span<std::uint8_t> mask() { return mask_; }
    std::span<const std::uint8_t> mask() const { return mask_; }

    std::size_t valid_count() const {
        return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
    }
    double valid_fraction() const {
        return mask_.empty() ? 0.0 : static_cast<double>(valid_count()) / static_cast<double>(mask_.size());
    }

    bool same_shape(const StokesImage& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

    /// Marks every entry valid iff is_valid(stokes, tol) holds, and-ed with the current mask.
    void refine_mask_by_dop(double tol = kDefaultValidityTolerance) {
        for (std::size_t c = 0; c < channels_; ++c)
            for (std::size_t y = 0; y < height_; ++y)
                for (std::size_t x = 0; x < width_; ++x)
                    if (valid(y, x, c) && !is_valid(stokes(y, x, c), tol)) set_valid(y, x, c, false);
    }

    friend bool operator==(const StokesImage&, const StokesImage&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> wavelengths_;
    std::vector<double> data_;
    std::vector<std::uint8_t> mask_;
};

/// The 21 channels of the tunable-filter camera: 450..650 nm in 10 nm steps.
inline std::vector<double> hyperspectral_wavelengths() {
    std::vector<double> w;
    for (int nm = 450; nm <= 650; nm += 10) w.push_back(static_cast<double>(nm));
    return w;
}

} // namespace polarcube
