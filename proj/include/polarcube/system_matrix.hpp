/**
 * @file system_matrix.hpp
 * @brief Measurement configurations and the linear system they induce.
 *
 * A measurement passes light through a retarder (fast axis theta1,
 * retardance delta) and then a linear polarizer (axis theta2) before the
 * sensor records total intensity. Row i of the system matrix is the first
 * row of C * P(theta2_i) * Q(theta1_i, delta_i), scaled by exposure.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"
#include "stokes.hpp"

namespace polarcube {

inline constexpr double deg(double degrees) { return degrees * std::numbers::pi / 180.0; }

struct MeasurementConfig {
    double retarder_axis = 0.0;  ///< theta1
    double retardance = std::numbers::pi / 2.0;
    double polarizer_axis = 0.0;  ///< theta2
    bool has_retarder = true;

    friend bool operator==(const MeasurementConfig&, const MeasurementConfig&) = default;
};

/// Combined modulation optics for one configuration, light path retarder then polarizer.
inline MuellerMatrix modulation_mueller(const MeasurementConfig& cfg,
                                        const MuellerMatrix& calibration = MuellerMatrix::identity()) {
    const MuellerMatrix p = lp_mueller(cfg.polarizer_axis);
    if (!cfg.has_retarder) return calibration * p;
    return calibration * p * retarder_mueller(cfg.retarder_axis, cfg.retardance);
}

/// Configuration set of one capture and its per-channel calibration.
struct CaptureConfig {
    std::vector<MeasurementConfig> configs;
    /// One matrix per channel; empty means identity for all channels.
    std::vector<MuellerMatrix> calibration;
    double exposure = 1.0;

    const MuellerMatrix& calibration_for(std::size_t channel) const {
        static const MuellerMatrix id = MuellerMatrix::identity();
        if (calibration.empty()) return id;
        if (channel >= calibration.size()) throw ConfigError("CaptureConfig: no calibration for channel " + std::to_string(channel));
        return calibration[channel];
    }

    /// Rotating quarter-wave plate in front of a fixed linear polarizer.
    static CaptureConfig rotating_qwp(const std::vector<double>& qwp_angles, double lp_angle = 0.0) {
        CaptureConfig c;
        for (double a : qwp_angles) c.configs.push_back({a, std::numbers::pi / 2.0, lp_angle, true});
        return c;
    }

    /// Polarizer-only measurements; blind to circular polarization.
    static CaptureConfig linear_only(const std::vector<double>& lp_angles) {
        CaptureConfig c;
        for (double a : lp_angles) c.configs.push_back({0.0, 0.0, a, false});
        return c;
    }
};

/// QWP angles of the tunable-filter camera.
inline std::vector<double> default_qwp_angles() { return {deg(30.0), deg(-45.0), deg(60.0), deg(-90.0)}; }

class DegenerateConfigurationError : public ConfigError {
public:
    DegenerateConfigurationError(int rank, double condition)
        : ConfigError("degenerate measurement configuration: system rank " + std::to_string(rank) +
                      " < 4 (condition number " + std::to_string(condition) + ")"),
          rank_(rank) {}
    int rank() const noexcept { return rank_; }

private:
    int rank_;
};

struct SystemMatrix {
    Eigen::MatrixXd a;  ///< m x 4
    int rank = 0;
    double condition_number = 0.0;
    Eigen::Vector4d singular_values = Eigen::Vector4d::Zero();

    std::size_t rows() const { return static_cast<std::size_t>(a.rows()); }
};

inline constexpr double kRankTolerance = 1e-10;

/// Rank and conditioning of an m x 4 matrix without rejecting it.
inline SystemMatrix analyze_system(Eigen::MatrixXd a) {
    SystemMatrix sm;
    if (a.cols() != 4) throw ConfigError("system matrix must have 4 columns");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const Eigen::VectorXd sv = svd.singularValues();
    for (Eigen::Index i = 0; i < 4; ++i) sm.singular_values[i] = i < sv.size() ? sv[i] : 0.0;
    const double smax = sm.singular_values[0];
    for (Eigen::Index i = 0; i < 4; ++i)
        if (smax > 0.0 && sm.singular_values[i] > kRankTolerance * smax) ++sm.rank;
    sm.condition_number = sm.singular_values[3] > 0.0 ? smax / sm.singular_values[3]
                                                      : std::numeric_limits<double>::infinity();
    sm.a = std::move(a);
    return sm;
}

inline Eigen::MatrixXd system_rows(const std::vector<MeasurementConfig>& configs, const MuellerMatrix& calibration,
                                   double exposure = 1.0) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(configs.size()), 4);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const MuellerMatrix m = modulation_mueller(configs[i], calibration);
        for (std::size_t k = 0; k < 4; ++k) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = exposure * m(0, k);
    }
    return a;
}

/// System matrix of one channel. Throws DegenerateConfigurationError unless rank is 4.
inline SystemMatrix system_matrix(const CaptureConfig& config, std::size_t channel = 0) {
    if (config.configs.size() < 4)
        throw ConfigError("system_matrix: need at least 4 configurations, got " + std::to_string(config.configs.size()));
    SystemMatrix sm = analyze_system(system_rows(config.configs, config.calibration_for(channel), config.exposure));
    if (sm.rank < 4) throw DegenerateConfigurationError(sm.rank, sm.condition_number);
    return sm;
}

/// Least-squares Stokes estimate and its residual norm.
struct StokesSolution {
    StokesVector s;
    double residual = 0.0;
};

/// Householder-QR least-squares solver, factored once and reused across pixels.
class StokesSolver {
public:
    explicit StokesSolver(const SystemMatrix& sm) : a_(sm.a) {
        if (sm.rank < 4) throw DegenerateConfigurationError(sm.rank, sm.condition_number);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a_);
        // R^-1 Q^T, i.e. the QR solution applied to each unit intensity vector.
        solve_map_ = qr.solve(Eigen::MatrixXd::Identity(a_.rows(), a_.rows()));
    }

    std::size_t rows() const { return static_cast<std::size_t>(a_.rows()); }

    StokesVector solve(std::span<const double> intensities) const {
        StokesVector s;
        const Eigen::Index m = a_.rows();
        for (Eigen::Index k = 0; k < 4; ++k) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) acc += solve_map_(k, i) * intensities[static_cast<std::size_t>(i)];
            s[static_cast<std::size_t>(k)] = acc;
        }
        return s;
    }

    StokesSolution solve_with_residual(std::span<const double> intensities) const {
        StokesSolution out;
        out.s = solve(intensities);
        double r2 = 0.0;
        for (Eigen::Index i = 0; i < a_.rows(); ++i) {
            double pred = 0.0;
            for (Eigen::Index k = 0; k < 4; ++k) pred += a_(i, k) * out.s[static_cast<std::size_t>(k)];
            const double d = pred - intensities[static_cast<std::size_t>(i)];
            r2 += d * d;
        }
        out.residual = std::sqrt(r2);
        return out;
    }

private:
    Eigen::MatrixXd a_;
    Eigen::MatrixXd solve_map_;  // 4 x m
};

/// Single-shot least-squares solve of argmin_s ||A s - I||^2.
inline StokesSolution solve_stokes(const SystemMatrix& sm, std::span<const double> intensities) {
    if (intensities.size() != sm.rows()) throw ConfigError("solve_stokes: intensity count does not match system rows");
    for (double v : intensities)
        if (!std::isfinite(v)) throw NumericalError("solve_stokes: non-finite intensity");
    return StokesSolver(sm).solve_with_residual(intensities);
}

} // namespace polarcube
