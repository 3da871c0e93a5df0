/**
 * @file pca.hpp
 * @brief Patch-PCA codec for Stokes cubes.
 *
 * Images are cut into non-overlapping P x P patches. A patch vector p is
 * represented as p = B c + mu with an orthonormal basis B, so encoding is
 * c = B^T (p - mu).
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace polarcube {

/// Which Stokes elements a patch vector carries: all four, or a single one.
inline constexpr int kJointElements = -1;

struct PcaCodebook {
    std::size_t patch_size = 0;
    std::size_t channels = 0;
    int element = kJointElements;
    Eigen::VectorXd mean;    ///< length D
    Eigen::MatrixXd basis;   ///< D x K, orthonormal columns
    Eigen::VectorXd sigma;   ///< per-basis standard deviation, non-increasing
    double total_variance = 0.0;  ///< sum of variances over all directions

    std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
    std::size_t components() const { return static_cast<std::size_t>(basis.cols()); }
    std::size_t elements_per_pixel() const { return element == kJointElements ? 4 : 1; }
};

struct PcaEncoding {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::vector<double> wavelengths;
    Eigen::MatrixXd coefficients;  ///< patches x K, row-major grid order
};

/// Patch vector length for the given geometry.
inline std::size_t patch_dimension(std::size_t patch_size, std::size_t channels, int element = kJointElements) {
    return patch_size * patch_size * channels * (element == kJointElements ? 4 : 1);
}

/// Non-overlapping P x P patches in row-major grid order; each row is one
/// patch flattened as (row, col, channel, element) with element fastest.
/// Remainder rows and columns are dropped. `element` selects a single Stokes
/// element instead of all four.
inline Eigen::MatrixXd extract_patches(const StokesImage& img, std::size_t p, int element = kJointElements) {
    if (p == 0) throw ConfigError("extract_patches: patch size must be positive");
    if (p > std::min(img.height(), img.width())) throw ConfigError("extract_patches: patch larger than image");
    if (element < kJointElements || element > 3) throw ConfigError("extract_patches: element must be -1 or 0..3");
    const std::size_t gr = img.height() / p, gc = img.width() / p;
    const std::size_t ne = element == kJointElements ? 4 : 1;
    const std::size_t d = patch_dimension(p, img.channels(), element);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(gr * gc), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < gr; ++i)
        for (std::size_t j = 0; j < gc; ++j) {
            const auto row = static_cast<Eigen::Index>(i * gc + j);
            Eigen::Index col = 0;
            for (std::size_t r = 0; r < p; ++r)
                for (std::size_t c = 0; c < p; ++c)
                    for (std::size_t ch = 0; ch < img.channels(); ++ch)
                        for (std::size_t k = 0; k < ne; ++k) {
                            const std::size_t el = element == kJointElements ? k : static_cast<std::size_t>(element);
                            out(row, col++) = img.at(i * p + r, j * p + c, ch, el);
                        }
        }
    return out;
}

/// Fits K principal directions by SVD of the centred patch matrix. Each basis
/// vector is signed so its largest-magnitude entry is positive.
inline PcaCodebook pca_fit(const Eigen::MatrixXd& patches, std::size_t k, std::size_t patch_size, std::size_t channels,
                           int element = kJointElements) {
    const auto n = static_cast<std::size_t>(patches.rows());
    const auto d = static_cast<std::size_t>(patches.cols());
    if (k == 0 || k > n) throw ConfigError("pca_fit: need 1 <= K <= number of patches");
    if (k > std::min(n, d)) throw ConfigError("pca_fit: K exceeds min(N, D)");
    if (n < 2) throw ConfigError("pca_fit: need at least two patches");
    if (patch_dimension(patch_size, channels, element) != d) throw ConfigError("pca_fit: patch geometry does not match D");

    PcaCodebook cb;
    cb.patch_size = patch_size;
    cb.channels = channels;
    cb.element = element;
    cb.mean = patches.colwise().mean().transpose();
    const Eigen::MatrixXd centred = patches.rowwise() - cb.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double denom = static_cast<double>(n - 1);
    cb.total_variance = sv.squaredNorm() / denom;
    cb.basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
    cb.sigma = sv.head(static_cast<Eigen::Index>(k)) / std::sqrt(denom);
    for (Eigen::Index j = 0; j < cb.basis.cols(); ++j) {
        Eigen::Index arg = 0;
        cb.basis.col(j).cwiseAbs().maxCoeff(&arg);
        if (cb.basis(arg, j) < 0.0) cb.basis.col(j) *= -1.0;
    }
    return cb;
}

inline PcaCodebook pca_fit(const StokesImage& img, std::size_t patch_size, std::size_t k, int element = kJointElements) {
    return pca_fit(extract_patches(img, patch_size, element), k, patch_size, img.channels(), element);
}

/// Share of total variance carried by each retained basis, sigma_i^2 / sum_n sigma_n^2.
inline std::vector<double> variance_spectrum(const PcaCodebook& cb) {
    std::vector<double> out(cb.components(), 0.0);
    if (cb.total_variance <= 0.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = cb.sigma[static_cast<Eigen::Index>(i)];
        out[i] = s * s / cb.total_variance;
    }
    return out;
}

/// Codebook restricted to its first k bases.
inline PcaCodebook truncate(const PcaCodebook& cb, std::size_t k) {
    if (k == 0 || k > cb.components()) throw ConfigError("truncate: K out of range");
    PcaCodebook out = cb;
    out.basis = cb.basis.leftCols(static_cast<Eigen::Index>(k));
    out.sigma = cb.sigma.head(static_cast<Eigen::Index>(k));
    return out;
}

inline PcaEncoding pca_encode(const StokesImage& img, const PcaCodebook& cb) {
    if (cb.element != kJointElements) throw ConfigError("pca_encode: single-element codebooks cannot encode images");
    if (img.channels() != cb.channels) throw ConfigError("pca_encode: channel count does not match codebook");
    const Eigen::MatrixXd patches = extract_patches(img, cb.patch_size);
    PcaEncoding enc;
    enc.height = img.height();
    enc.width = img.width();
    enc.grid_rows = img.height() / cb.patch_size;
    enc.grid_cols = img.width() / cb.patch_size;
    enc.wavelengths = img.wavelengths();
    enc.coefficients = (patches.rowwise() - cb.mean.transpose()) * cb.basis;
    return enc;
}

/// Reassembles p_hat = B c + mu in grid order. Pixels outside the patch grid
/// are zero and flagged invalid.
inline StokesImage pca_decode(const PcaEncoding& enc, const PcaCodebook& cb) {
    if (static_cast<std::size_t>(enc.coefficients.cols()) != cb.components())
        throw ConfigError("pca_decode: coefficient count does not match codebook");
    if (static_cast<std::size_t>(enc.coefficients.rows()) != enc.grid_rows * enc.grid_cols)
        throw ConfigError("pca_decode: coefficient rows do not match patch grid");
    const std::size_t p = cb.patch_size;
    StokesImage out(enc.height, enc.width, cb.channels, enc.wavelengths);
    for (std::size_t c = 0; c < cb.channels; ++c)
        for (std::size_t y = 0; y < enc.height; ++y)
            for (std::size_t x = 0; x < enc.width; ++x)
                out.set_valid(y, x, c, y < enc.grid_rows * p && x < enc.grid_cols * p);
    const Eigen::MatrixXd patches = (enc.coefficients * cb.basis.transpose()).rowwise() + cb.mean.transpose();
    for (std::size_t i = 0; i < enc.grid_rows; ++i)
        for (std::size_t j = 0; j < enc.grid_cols; ++j) {
            const auto row = static_cast<Eigen::Index>(i * enc.grid_cols + j);
            Eigen::Index col = 0;
            for (std::size_t r = 0; r < p; ++r)
                for (std::size_t cc = 0; cc < p; ++cc)
                    for (std::size_t ch = 0; ch < cb.channels; ++ch)
                        for (std::size_t k = 0; k < 4; ++k) out.at(i * p + r, j * p + cc, ch, k) = patches(row, col++);
        }
    return out;
}

/// Bits per pixel: stored bits over spatial pixel count.
inline double bpp(double stored_bits, std::size_t width, std::size_t height) {
    if (width * height == 0) throw ConfigError("bpp: empty image");
    return stored_bits / static_cast<double>(width * height);
}

/// Bits of an uncompressed cube at the given sample width.
inline double raw_cube_bits(std::size_t width, std::size_t height, std::size_t channels, unsigned bits_per_value = 32) {
    return static_cast<double>(width) * static_cast<double>(height) * static_cast<double>(channels) * 4.0 * bits_per_value;
}

/// Stored bits of an encoding: coefficients only, or coefficients plus the
/// basis and mean needed to decode.
inline double pca_storage_bits(const PcaEncoding& enc, const PcaCodebook& cb, bool include_codebook,
                               unsigned bits_per_value = 32) {
    double values = static_cast<double>(enc.coefficients.size());
    if (include_codebook) values += static_cast<double>(cb.basis.size() + cb.mean.size());
    return values * bits_per_value;
}

/// Mean squared error over the area covered by the patch grid.
inline double pca_mse(const StokesImage& original, const StokesImage& decoded, std::size_t patch_size) {
    const std::size_t h = original.height() / patch_size * patch_size;
    const std::size_t w = original.width() / patch_size * patch_size;
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < original.channels(); ++c)
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double d = original.at(y, x, c, k) - decoded.at(y, x, c, k);
                    s += d * d;
                    ++n;
                }
    return n ? s / static_cast<double>(n) : 0.0;
}

struct RateDistortionPoint {
    std::size_t components = 0;
    double bpp_coefficients = 0.0;
    double bpp_with_codebook = 0.0;
    double mse = 0.0;
};

/// MSE and BPP for each requested number of bases of a fitted codebook.
inline std::vector<RateDistortionPoint> pca_rate_distortion(const StokesImage& img, const PcaCodebook& cb,
                                                            const std::vector<std::size_t>& ks) {
    std::vector<RateDistortionPoint> out;
    for (std::size_t k : ks) {
        const PcaCodebook t = truncate(cb, k);
        const PcaEncoding enc = pca_encode(img, t);
        const StokesImage dec = pca_decode(enc, t);
        out.push_back({k, bpp(pca_storage_bits(enc, t, false), img.width(), img.height()),
                       bpp(pca_storage_bits(enc, t, true), img.width(), img.height()), pca_mse(img, dec, cb.patch_size)});
    }
    return out;
}

} // namespace polarcube
