/**
 * @file analysis.hpp
 * @brief Dataset statistics over collections of Stokes cubes.
 *
 * Every statistic only uses valid (pixel, channel) entries of images whose
 * labels pass the filter. Gradient samples need both endpoints valid.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "labels.hpp"
#include "stokes.hpp"

namespace polarcube {

// ---------------------------------------------------------------------------
// Histogram / DensityGrid

/// Uniform-bin histogram over [lo, hi]. Samples outside the range are
/// tallied separately and excluded from `total`.
class Histogram {
public:
    Histogram() = default;
    Histogram(double lo, double hi, std::size_t bins) : lo_(lo), hi_(hi), counts_(bins, 0) {
        if (bins == 0) throw ConfigError("Histogram: need at least one bin");
        if (!(hi > lo)) throw ConfigError("Histogram: range must satisfy hi > lo");
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::size_t bins() const { return counts_.size(); }
    double bin_width() const { return (hi_ - lo_) / static_cast<double>(counts_.size()); }
    double edge(std::size_t i) const { return i == counts_.size() ? hi_ : lo_ + bin_width() * static_cast<double>(i); }
    double center(std::size_t i) const { return lo_ + bin_width() * (static_cast<double>(i) + 0.5); }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::uint64_t count(std::size_t i) const { return counts_.at(i); }
    std::uint64_t total() const { return total_; }
    std::uint64_t out_of_range() const { return out_of_range_; }
    /// Sum of the binned samples, for exact means.
    double sum() const { return sum_; }
    double mean() const { return total_ ? sum_ / static_cast<double>(total_) : 0.0; }

    std::size_t bin_of(double v) const {
        const auto i = static_cast<std::ptrdiff_t>(std::floor((v - lo_) / bin_width()));
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(counts_.size()) - 1));
    }

    void add(double v) {
        if (!(v >= lo_ && v <= hi_)) {
            ++out_of_range_;
            return;
        }
        ++counts_[bin_of(v)];
        ++total_;
        sum_ += v;
    }

    void merge(const Histogram& o) {
        if (o.lo_ != lo_ || o.hi_ != hi_ || o.counts_.size() != counts_.size())
            throw ConfigError("Histogram::merge: incompatible binning");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
        total_ += o.total_;
        out_of_range_ += o.out_of_range_;
        sum_ += o.sum_;
    }

    /// log(count / total / bin_width); -inf for empty bins.
    std::vector<double> log_probability() const {
        std::vector<double> out(counts_.size(), -std::numeric_limits<double>::infinity());
        if (total_ == 0) return out;
        for (std::size_t i = 0; i < counts_.size(); ++i)
            if (counts_[i]) out[i] = std::log(static_cast<double>(counts_[i]) / static_cast<double>(total_) / bin_width());
        return out;
    }

    /// Skewness of the binned distribution evaluated at bin centres.
    double binned_skewness() const {
        if (total_ == 0) return 0.0;
        const double n = static_cast<double>(total_);
        double m1 = 0.0;
        for (std::size_t i = 0; i < counts_.size(); ++i) m1 += center(i) * static_cast<double>(counts_[i]);
        m1 /= n;
        double m2 = 0.0, m3 = 0.0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            const double d = center(i) - m1;
            m2 += d * d * static_cast<double>(counts_[i]);
            m3 += d * d * d * static_cast<double>(counts_[i]);
        }
        m2 /= n;
        m3 /= n;
        return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    }

    friend bool operator==(const Histogram&, const Histogram&) = default;

private:
    double lo_ = 0.0, hi_ = 1.0;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    std::uint64_t out_of_range_ = 0;
    double sum_ = 0.0;
};

/// Square grid of counts over [lo, hi]^2 with a max-normalised view.
class DensityGrid {
public:
    DensityGrid(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n), counts_(n * n, 0) {
        if (n == 0 || !(hi > lo)) throw ConfigError("DensityGrid: invalid binning");
    }

    std::size_t size() const { return n_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double cell_width() const { return (hi_ - lo_) / static_cast<double>(n_); }
    double center(std::size_t i) const { return lo_ + cell_width() * (static_cast<double>(i) + 0.5); }
    std::size_t index_of(double v) const {
        const auto i = static_cast<std::ptrdiff_t>(std::floor((v - lo_) / cell_width()));
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n_) - 1));
    }

    /// Row index follows the vertical axis, column the horizontal one.
    void add(double u, double v) {
        if (!(u >= lo_ && u <= hi_ && v >= lo_ && v <= hi_)) return;
        ++counts_[index_of(v) * n_ + index_of(u)];
        ++total_;
    }

    std::uint64_t count(std::size_t row, std::size_t col) const { return counts_.at(row * n_ + col); }
    std::uint64_t total() const { return total_; }
    std::uint64_t max_count() const { return counts_.empty() ? 0 : *std::max_element(counts_.begin(), counts_.end()); }
    /// Count divided by the largest cell count, so the densest cell is 1.
    double normalized(std::size_t row, std::size_t col) const {
        const auto m = max_count();
        return m ? static_cast<double>(count(row, col)) / static_cast<double>(m) : 0.0;
    }

private:
    double lo_, hi_;
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

// ---------------------------------------------------------------------------
// Inputs

struct LabeledImage {
    const StokesImage* image = nullptr;
    std::optional<LabelSet> labels;

    LabeledImage(const StokesImage& img, std::optional<LabelSet> l = std::nullopt) : image(&img), labels(std::move(l)) {}
};

enum class Feature { s0, s1, s2, s3, ns1, ns2, ns3, dolp, docp, aolp, cop };

inline std::optional<Feature> parse_feature(std::string_view s) {
    static constexpr std::pair<std::string_view, Feature> names[] = {
        {"s0", Feature::s0},     {"s1", Feature::s1},     {"s2", Feature::s2},   {"s3", Feature::s3},
        {"ns1", Feature::ns1},   {"ns2", Feature::ns2},   {"ns3", Feature::ns3}, {"dolp", Feature::dolp},
        {"docp", Feature::docp}, {"aolp", Feature::aolp}, {"cop", Feature::cop}};
    for (const auto& [n, f] : names)
        if (n == s) return f;
    return std::nullopt;
}

inline constexpr std::size_t kDefaultBins = 201;

namespace detail {

/// Value of a feature at one entry; nullopt when undefined there.
inline std::optional<double> feature_value(const StokesVector& s, Feature f) {
    switch (f) {
    case Feature::s0: return s.s0;
    case Feature::s1: return s.s1;
    case Feature::s2: return s.s2;
    case Feature::s3: return s.s3;
    default: break;
    }
    if (!(s.s0 > 0.0)) return std::nullopt;
    switch (f) {
    case Feature::ns1: return s.s1 / s.s0;
    case Feature::ns2: return s.s2 / s.s0;
    case Feature::ns3: return s.s3 / s.s0;
    default: break;
    }
    const PolarimetricFeatures pf = features(s);
    switch (f) {
    case Feature::dolp: return pf.dolp;
    case Feature::docp: return pf.docp;
    case Feature::aolp:
        if (pf.psi_degenerate) return std::nullopt;
        return pf.psi;
    case Feature::cop: return static_cast<double>(pf.cop);
    default: return std::nullopt;
    }
}

template <typename Fn>
void for_each_valid(std::span<const LabeledImage> images, const LabelFilter& filter, Fn&& fn) {
    for (const auto& li : images) {
        if (!filter.accepts(li.labels)) continue;
        const StokesImage& img = *li.image;
        for (std::size_t c = 0; c < img.channels(); ++c)
            for (std::size_t y = 0; y < img.height(); ++y)
                for (std::size_t x = 0; x < img.width(); ++x)
                    if (img.valid(y, x, c)) fn(img.stokes(y, x, c));
    }
}

inline std::pair<double, double> symmetric_extent(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    if (m == 0.0) m = 1.0;
    return {-m, m};
}

inline std::pair<double, double> data_extent(const std::vector<double>& v) {
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    double lo = *mn, hi = *mx;
    if (!(hi > lo)) {
        const double pad = std::max(1.0, std::abs(lo)) * 0.5;
        lo -= pad;
        hi += pad;
    }
    return {lo, hi};
}

inline Histogram histogram_of(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
    Histogram h(lo, hi, bins);
    for (double v : values) h.add(v);
    return h;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Stokes-element and intensity distributions

/// Histogram of one Stokes element (s0..s3) or normalized element
/// (ns1..ns3) over every valid entry. Normalized elements use [-1, 1], s0 its
/// data extent, and s1..s3 a symmetric data extent unless a range is given.
inline Histogram stokes_histogram(std::span<const LabeledImage> images, Feature element, std::size_t bins = kDefaultBins,
                                  const LabelFilter& filter = {},
                                  std::optional<std::pair<double, double>> range = std::nullopt) {
    if (static_cast<int>(element) > static_cast<int>(Feature::ns3))
        throw ConfigError("stokes_histogram: element must be s0..s3 or ns1..ns3");
    std::vector<double> values;
    detail::for_each_valid(images, filter, [&](const StokesVector& s) {
        if (auto v = detail::feature_value(s, element)) values.push_back(*v);
    });
    if (values.empty()) throw ConfigError("stokes_histogram: empty selection");
    std::pair<double, double> r;
    if (range) r = *range;
    else if (element >= Feature::ns1) r = {-1.0, 1.0};
    else if (element == Feature::s0) r = detail::data_extent(values);
    else r = detail::symmetric_extent(values);
    return detail::histogram_of(values, r.first, r.second, bins);
}

/// Polarized P and unpolarized U intensity histograms on a shared range.
inline std::pair<Histogram, Histogram> pol_unpol_histograms(std::span<const LabeledImage> images,
                                                            std::size_t bins = kDefaultBins, const LabelFilter& filter = {},
                                                            double tol = kDefaultValidityTolerance) {
    std::vector<double> p, u;
    detail::for_each_valid(images, filter, [&](const StokesVector& s) {
        if (!is_valid(s, tol)) return;
        const Decomposition d = decompose(s, tol);
        p.push_back(d.polarized);
        u.push_back(d.unpolarized);
    });
    if (p.empty()) throw ConfigError("pol_unpol_histograms: empty selection");
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        lo = std::min({lo, p[i], u[i]});
        hi = std::max({hi, p[i], u[i]});
    }
    if (!(hi > lo)) hi = lo + 1.0;
    return {detail::histogram_of(p, lo, hi, bins), detail::histogram_of(u, lo, hi, bins)};
}

/// DoCP over [0, 1].
inline Histogram docp_distribution(std::span<const LabeledImage> images, std::size_t bins = kDefaultBins,
                                   const LabelFilter& filter = {}) {
    Histogram h(0.0, 1.0, bins);
    bool any = false;
    detail::for_each_valid(images, filter, [&](const StokesVector& s) {
        if (!(s.s0 > 0.0)) return;
        h.add(std::min(1.0, features(s).docp));
        any = true;
    });
    if (!any) throw ConfigError("docp_distribution: empty selection");
    return h;
}

enum class PoincarePlane { s1_s2, s1_s3 };

/// Projected normalized Stokes points on the s'1-s'2 or s'1-s'3 plane,
/// binned on an n x n grid over [-1, 1]^2. Points outside the unit ball
/// (beyond 1 + tol) are skipped.
inline DensityGrid poincare_density(std::span<const LabeledImage> images, PoincarePlane plane, std::size_t n = kDefaultBins,
                                    const LabelFilter& filter = {}, double tol = kDefaultValidityTolerance) {
    DensityGrid g(-1.0, 1.0, n);
    detail::for_each_valid(images, filter, [&](const StokesVector& s) {
        if (!(s.s0 > 0.0)) return;
        const PoincarePoint p = normalize(s);
        if (p.norm() > 1.0 + tol) return;
        const double v = plane == PoincarePlane::s1_s2 ? p.y : p.z;
        g.add(std::clamp(p.x, -1.0, 1.0), std::clamp(v, -1.0, 1.0));
    });
    if (g.total() == 0) throw ConfigError("poincare_density: empty selection");
    return g;
}

// ---------------------------------------------------------------------------
// Gradients

struct GradientField {
    Plane gx;  ///< H x (W - 1), gx(y, x) = p(y, x + 1) - p(y, x)
    Plane gy;  ///< (H - 1) x W, gy(y, x) = p(y + 1, x) - p(y, x)
};

inline GradientField gradient_field(const Plane& p) {
    if (p.height() < 2 || p.width() < 2) throw ConfigError("gradient_field: need at least 2x2 pixels");
    GradientField g{Plane(p.height(), p.width() - 1), Plane(p.height() - 1, p.width())};
    for (std::size_t y = 0; y < p.height(); ++y)
        for (std::size_t x = 0; x + 1 < p.width(); ++x) g.gx(y, x) = p(y, x + 1) - p(y, x);
    for (std::size_t y = 0; y + 1 < p.height(); ++y)
        for (std::size_t x = 0; x < p.width(); ++x) g.gy(y, x) = p(y + 1, x) - p(y, x);
    return g;
}

/// Wraps an AoLP difference: values beyond pi/2 in magnitude are shifted by
/// pi toward zero, since AoLP has period pi.
inline double wrap_aolp_difference(double d) {
    constexpr double pi = std::numbers::pi;
    if (std::abs(d) > pi / 2.0) d -= pi * (d > 0.0 ? 1.0 : -1.0);
    return d;
}

/// Wrapped forward difference from AoLP a to neighbor b.
inline double aolp_gradient(double a, double b) { return wrap_aolp_difference(b - a); }

inline void require_aolp_range(double psi) {
    if (!(psi > -std::numbers::pi / 2.0 && psi <= std::numbers::pi / 2.0))
        throw ConfigError("aolp_gradient: AoLP outside (-pi/2, pi/2]");
}

/// Forward differences of an AoLP plane with angular wrapping; outputs lie in [-pi/2, pi/2].
inline GradientField aolp_gradient(const Plane& psi) {
    for (double v : psi.values()) require_aolp_range(v);
    GradientField g = gradient_field(psi);
    for (double& v : g.gx.values()) v = wrap_aolp_difference(v);
    for (double& v : g.gy.values()) v = wrap_aolp_difference(v);
    return g;
}

enum class GradientDirection { both, horizontal, vertical };

/// Gradient samples of a feature over valid, defined entries of every accepted image.
inline std::vector<double> feature_gradients(std::span<const LabeledImage> images, Feature feature,
                                             GradientDirection dir = GradientDirection::both, const LabelFilter& filter = {}) {
    std::vector<double> out;
    for (const auto& li : images) {
        if (!filter.accepts(li.labels)) continue;
        const StokesImage& img = *li.image;
        const std::size_t h = img.height(), w = img.width();
        if (h < 2 || w < 2) throw ConfigError("feature_gradients: need at least 2x2 pixels");
        for (std::size_t c = 0; c < img.channels(); ++c) {
            std::vector<double> val(h * w, 0.0);
            std::vector<std::uint8_t> ok(h * w, 0);
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    if (!img.valid(y, x, c)) continue;
                    if (auto v = detail::feature_value(img.stokes(y, x, c), feature)) {
                        val[y * w + x] = *v;
                        ok[y * w + x] = 1;
                    }
                }
            auto diff = [&](std::size_t a, std::size_t b) {
                if (!ok[a] || !ok[b]) return;
                const double d = val[b] - val[a];
                out.push_back(feature == Feature::aolp ? wrap_aolp_difference(d) : d);
            };
            if (dir != GradientDirection::vertical)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x + 1 < w; ++x) diff(y * w + x, y * w + x + 1);
            if (dir != GradientDirection::horizontal)
                for (std::size_t y = 0; y + 1 < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) diff(y * w + x, (y + 1) * w + x);
        }
    }
    return out;
}

/// Default histogram range of a feature's gradient.
inline std::pair<double, double> gradient_range(Feature feature, const std::vector<double>& samples) {
    switch (feature) {
    case Feature::aolp: return {-std::numbers::pi / 2.0, std::numbers::pi / 2.0};
    case Feature::cop: return {-2.5, 2.5};
    case Feature::dolp:
    case Feature::docp: return {-1.0, 1.0};
    case Feature::ns1:
    case Feature::ns2:
    case Feature::ns3: return {-2.0, 2.0};
    default: return detail::symmetric_extent(samples);
    }
}

/// Gradient histogram of a feature; use log_probability() for the log view.
/// CoP defaults to five unit-width bins centred on -2..2.
inline Histogram feature_gradient_histogram(std::span<const LabeledImage> images, Feature feature,
                                            std::size_t bins = kDefaultBins, const LabelFilter& filter = {},
                                            GradientDirection dir = GradientDirection::both) {
    const std::vector<double> g = feature_gradients(images, feature, dir, filter);
    if (g.empty()) throw ConfigError("feature_gradient_histogram: empty selection");
    const auto [lo, hi] = gradient_range(feature, g);
    return detail::histogram_of(g, lo, hi, feature == Feature::cop ? 5 : bins);
}

// ---------------------------------------------------------------------------
// Normal-map spectral consistency

/// Unit normals per channel, channel-major then component (x, y, z) then row-major.
class NormalMapStack {
public:
    NormalMapStack(std::size_t height, std::size_t width, std::size_t channels)
        : height_(height), width_(width), channels_(channels), data_(height * width * channels * 3, 0.0) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }

    double& at(std::size_t y, std::size_t x, std::size_t c, std::size_t k) {
        return data_[((c * 3 + k) * height_ + y) * width_ + x];
    }
    double at(std::size_t y, std::size_t x, std::size_t c, std::size_t k) const {
        return data_[((c * 3 + k) * height_ + y) * width_ + x];
    }
    void set(std::size_t y, std::size_t x, std::size_t c, double nx, double ny, double nz) {
        at(y, x, c, 0) = nx;
        at(y, x, c, 1) = ny;
        at(y, x, c, 2) = nz;
    }
    std::span<const double> raw() const { return data_; }
    std::span<double> raw() { return data_; }

    void validate(double tol = 1e-3) const {
        for (std::size_t c = 0; c < channels_; ++c)
            for (std::size_t y = 0; y < height_; ++y)
                for (std::size_t x = 0; x < width_; ++x) {
                    const double n = std::sqrt(at(y, x, c, 0) * at(y, x, c, 0) + at(y, x, c, 1) * at(y, x, c, 1) +
                                               at(y, x, c, 2) * at(y, x, c, 2));
                    if (std::abs(n - 1.0) > tol) throw ConfigError("NormalMapStack: normal is not unit length");
                }
    }

private:
    std::size_t height_, width_, channels_;
    std::vector<double> data_;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_pi(double a) {
    constexpr double pi = std::numbers::pi;
    double r = std::remainder(a, 2.0 * pi);
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

/// Root mean square of the wrapped deviations from the circular mean.
inline double circular_stddev(std::span<const double> angles) {
    if (angles.empty()) return 0.0;
    double sx = 0.0, sy = 0.0;
    for (double a : angles) {
        sx += std::cos(a);
        sy += std::sin(a);
    }
    const double mean = std::atan2(sy, sx);
    double s = 0.0;
    for (double a : angles) {
        const double d = wrap_pi(a - mean);
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(angles.size()));
}

inline double population_stddev(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

struct NormalSpectralStats {
    Plane std_x, std_y, std_z;
    Plane std_azimuth;    ///< radians, circular
    Plane std_elevation;  ///< radians
    Histogram hist_x, hist_y, hist_z, hist_azimuth, hist_elevation;
};

/// Per-pixel spread of normals across channels. Azimuth is atan2(ny, nx)
/// and elevation asin(nz).
inline NormalSpectralStats normal_spectral_stddev(const NormalMapStack& stack, std::size_t bins = kDefaultBins) {
    if (stack.channels() < 2) throw ConfigError("normal_spectral_stddev: need at least 2 channels");
    const std::size_t h = stack.height(), w = stack.width(), nc = stack.channels();
    NormalSpectralStats st{Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w), {}, {}, {}, {}, {}};
    std::vector<double> buf(nc), az(nc);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            Plane* comp[3] = {&st.std_x, &st.std_y, &st.std_z};
            for (std::size_t k = 0; k < 3; ++k) {
                for (std::size_t c = 0; c < nc; ++c) buf[c] = stack.at(y, x, c, k);
                (*comp[k])(y, x) = population_stddev(buf);
            }
            for (std::size_t c = 0; c < nc; ++c) {
                az[c] = std::atan2(stack.at(y, x, c, 1), stack.at(y, x, c, 0));
                buf[c] = std::asin(std::clamp(stack.at(y, x, c, 2), -1.0, 1.0));
            }
            st.std_azimuth(y, x) = circular_stddev(az);
            st.std_elevation(y, x) = population_stddev(buf);
        }
    // Population std of values in [-1, 1] is at most 1; angles at most pi.
    auto hist = [&](const Plane& p, double hi) {
        Histogram hh(0.0, hi, bins);
        for (double v : p.values()) hh.add(std::min(v, hi));
        return hh;
    };
    st.hist_x = hist(st.std_x, 1.0);
    st.hist_y = hist(st.std_y, 1.0);
    st.hist_z = hist(st.std_z, 1.0);
    st.hist_azimuth = hist(st.std_azimuth, std::numbers::pi);
    st.hist_elevation = hist(st.std_elevation, std::numbers::pi / 2.0);
    return st;
}

} // namespace polarcube
