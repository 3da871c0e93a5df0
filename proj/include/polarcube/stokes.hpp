/**
 * @file stokes.hpp
 * @brief Stokes vectors, Mueller matrices and polarimetric features.
 *
 * Conventions follow ideal optical elements:
 * - s0: total intensity
 * - s1: horizontal minus vertical linear
 * - s2: +45 minus -45 degree linear
 * - s3: right minus left circular
 *
 * All angles are in radians. Every function here is pure.
 */
#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "error.hpp"

namespace polarcube {

inline constexpr double kDefaultValidityTolerance = 1e-3;

struct StokesVector {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;

    constexpr double& operator[](std::size_t i) { return i == 0 ? s0 : i == 1 ? s1 : i == 2 ? s2 : s3; }
    constexpr double operator[](std::size_t i) const { return i == 0 ? s0 : i == 1 ? s1 : i == 2 ? s2 : s3; }

    /// Norm of the polarized part, sqrt(s1^2 + s2^2 + s3^2).
    double polarized_norm() const { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }
    /// Norm of the linear part, sqrt(s1^2 + s2^2).
    double linear_norm() const { return std::hypot(s1, s2); }

    friend constexpr bool operator==(const StokesVector&, const StokesVector&) = default;
};

inline constexpr StokesVector unpolarized(double intensity) { return {intensity, 0.0, 0.0, 0.0}; }

/// 4x4 real matrix acting on Stokes vectors, row-major.
struct MuellerMatrix {
    std::array<std::array<double, 4>, 4> m{};

    static constexpr MuellerMatrix identity() {
        MuellerMatrix r;
        for (std::size_t i = 0; i < 4; ++i) r.m[i][i] = 1.0;
        return r;
    }

    constexpr double& operator()(std::size_t r, std::size_t c) { return m[r][c]; }
    constexpr double operator()(std::size_t r, std::size_t c) const { return m[r][c]; }

    friend constexpr MuellerMatrix operator*(const MuellerMatrix& a, const MuellerMatrix& b) {
        MuellerMatrix r;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 4; ++k) acc += a.m[i][k] * b.m[k][j];
                r.m[i][j] = acc;
            }
        return r;
    }

    friend constexpr bool operator==(const MuellerMatrix&, const MuellerMatrix&) = default;

    bool is_finite() const {
        for (const auto& row : m)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Largest absolute entry of a - b.
inline double max_abs_diff(const MuellerMatrix& a, const MuellerMatrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) d = std::max(d, std::abs(a.m[i][j] - b.m[i][j]));
    return d;
}

inline StokesVector apply(const MuellerMatrix& mm, const StokesVector& s) {
    StokesVector out;
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = mm.m[i][0] * s.s0 + mm.m[i][1] * s.s1 + mm.m[i][2] * s.s2 + mm.m[i][3] * s.s3;
    }
    return out;
}

inline StokesVector operator*(const MuellerMatrix& mm, const StokesVector& s) { return apply(mm, s); }

/// Ideal linear polarizer with transmission axis at theta.
inline MuellerMatrix lp_mueller(double theta) {
    const double c = std::cos(2.0 * theta);
    const double s = std::sin(2.0 * theta);
    MuellerMatrix r;
    r.m = {{{0.5, 0.5 * c, 0.5 * s, 0.0},
            {0.5 * c, 0.5 * c * c, 0.5 * c * s, 0.0},
            {0.5 * s, 0.5 * c * s, 0.5 * s * s, 0.0},
            {0.0, 0.0, 0.0, 0.0}}};
    return r;
}

/// Ideal linear retarder with fast axis at theta and retardance delta.
/// delta = pi/2 gives a quarter-wave plate.
inline MuellerMatrix retarder_mueller(double theta, double delta) {
    const double c = std::cos(2.0 * theta);
    const double s = std::sin(2.0 * theta);
    const double cd = std::cos(delta);
    const double sd = std::sin(delta);
    MuellerMatrix r;
    r.m = {{{1.0, 0.0, 0.0, 0.0},
            {0.0, c * c + s * s * cd, c * s * (1.0 - cd), -s * sd},
            {0.0, c * s * (1.0 - cd), s * s + c * c * cd, c * sd},
            {0.0, s * sd, -c * sd, cd}}};
    return r;
}

inline MuellerMatrix qwp_mueller(double theta) { return retarder_mueller(theta, std::numbers::pi / 2.0); }

/// Frame rotation of the Stokes reference axes by theta.
inline MuellerMatrix rotator_mueller(double theta) {
    const double c = std::cos(2.0 * theta);
    const double s = std::sin(2.0 * theta);
    MuellerMatrix r = MuellerMatrix::identity();
    r.m[1][1] = c;
    r.m[1][2] = s;
    r.m[2][1] = -s;
    r.m[2][2] = c;
    return r;
}

/// Element m physically rotated by theta: R(-theta) * m * R(theta).
inline MuellerMatrix rotate_mueller(const MuellerMatrix& m, double theta) {
    return rotator_mueller(-theta) * m * rotator_mueller(theta);
}

struct PolarimetricFeatures {
    double rho = 0.0;   ///< degree of polarization
    double dolp = 0.0;  ///< degree of linear polarization
    double docp = 0.0;  ///< degree of circular polarization
    double psi = 0.0;   ///< angle of linear polarization, (-pi/2, pi/2]
    double chi = 0.0;   ///< ellipticity angle, [-pi/4, pi/4]
    int cop = 0;        ///< chirality: sign of s3
    bool psi_degenerate = false;  ///< linear part is zero, psi meaningless
};

/// Folds an angle of period pi into (-pi/2, pi/2].
inline double wrap_half_pi(double angle) {
    constexpr double pi = std::numbers::pi;
    double a = std::remainder(angle, pi);  // [-pi/2, pi/2]
    if (a <= -pi / 2.0) a += pi;
    return a;
}

inline PolarimetricFeatures features(const StokesVector& s) {
    if (!(s.s0 > 0.0)) throw NumericalError("features: s0 must be positive");
    PolarimetricFeatures f;
    const double lin = s.linear_norm();
    const double pol = s.polarized_norm();
    f.rho = pol / s.s0;
    f.dolp = lin / s.s0;
    f.docp = std::abs(s.s3) / s.s0;
    f.cop = s.s3 > 0.0 ? 1 : (s.s3 < 0.0 ? -1 : 0);
    if (lin == 0.0) {
        f.psi = 0.0;
        f.psi_degenerate = true;
    } else {
        f.psi = wrap_half_pi(0.5 * std::atan2(s.s2, s.s1));
    }
    // atan2 with a non-negative second argument equals arctan(s3 / L) and
    // stays defined at L = 0.
    f.chi = pol == 0.0 ? 0.0 : 0.5 * std::atan2(s.s3, lin);
    return f;
}

struct Decomposition {
    double polarized = 0.0;
    double unpolarized = 0.0;
};

/// True iff s0 > 0 and the degree of polarization does not exceed 1 + tol.
inline bool is_valid(const StokesVector& s, double tol = kDefaultValidityTolerance) {
    if (!(s.s0 > 0.0) || !std::isfinite(s.s0)) return false;
    const double pol = s.polarized_norm();
    if (!std::isfinite(pol)) return false;
    return pol / s.s0 <= 1.0 + tol;
}

/// Splits s0 into polarized intensity P = |(s1,s2,s3)| and the remainder.
inline Decomposition decompose(const StokesVector& s, double tol = kDefaultValidityTolerance) {
    if (!is_valid(s, tol)) throw NumericalError("decompose: Stokes vector is not physically valid");
    Decomposition d;
    d.polarized = s.polarized_norm();
    d.unpolarized = s.s0 - d.polarized;
    return d;
}

struct PoincarePoint {
    double x = 0.0;  ///< s1 / s0
    double y = 0.0;  ///< s2 / s0
    double z = 0.0;  ///< s3 / s0

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline PoincarePoint normalize(const StokesVector& s) {
    if (!(s.s0 > 0.0)) throw NumericalError("normalize: s0 must be positive");
    return {s.s1 / s.s0, s.s2 / s.s0, s.s3 / s.s0};
}

} // namespace polarcube
