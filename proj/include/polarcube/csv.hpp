/**
 * @file csv.hpp
 * @brief CSV emitters for histograms, density grids and curves.
 *
 * Every file starts with a header row whose column names carry units in
 * brackets. Reals are printed with 17 significant digits so they re-parse
 * to the same double.
 */
#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "atomic_file.hpp"
#include "inr.hpp"
#include "pca.hpp"

namespace polarcube {

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

    void add_row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw ConfigError("CsvTable: row width does not match header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }

    const std::string& text() const { return text_; }
    void write(const std::string& path) const { atomic_write_file(path, text_); }

private:
    std::size_t columns_;
    std::string text_;
};

/// One row per bin: lower edge, upper edge, centre, count, log probability.
inline CsvTable histogram_csv(const Histogram& h, const std::string& unit = "1") {
    CsvTable t({"bin_lo[" + unit + "]", "bin_hi[" + unit + "]", "bin_center[" + unit + "]", "count[samples]",
                "log_probability[log(1/" + unit + ")]"});
    const auto lp = h.log_probability();
    for (std::size_t i = 0; i < h.bins(); ++i)
        t.add_row({format_real(h.edge(i)), format_real(h.edge(i + 1)), format_real(h.center(i)), std::to_string(h.count(i)),
                   format_real(lp[i])});
    return t;
}

/// Row-major cells: row index follows the vertical axis.
inline CsvTable density_csv(const DensityGrid& g, const std::string& u_name = "u", const std::string& v_name = "v") {
    CsvTable t({"row[index]", "col[index]", v_name + "_center[1]", u_name + "_center[1]", "count[samples]",
                "normalized[1]"});
    for (std::size_t r = 0; r < g.size(); ++r)
        for (std::size_t c = 0; c < g.size(); ++c)
            t.add_row({std::to_string(r), std::to_string(c), format_real(g.center(r)), format_real(g.center(c)),
                       std::to_string(g.count(r, c)), format_real(g.normalized(r, c))});
    return t;
}

inline CsvTable loss_curve_csv(const std::vector<LossRecord>& curve) {
    CsvTable t({"step[iteration]", "mse[intensity^2]", "learning_rate[1]"});
    for (const auto& r : curve) t.add_row({std::to_string(r.step), format_real(r.mse), format_real(r.learning_rate)});
    return t;
}

inline CsvTable rate_distortion_csv(const std::vector<RateDistortionPoint>& pts) {
    CsvTable t({"components[count]", "bpp_coefficients[bit/pixel]", "bpp_with_codebook[bit/pixel]", "mse[intensity^2]"});
    for (const auto& p : pts)
        t.add_row({std::to_string(p.components), format_real(p.bpp_coefficients), format_real(p.bpp_with_codebook),
                   format_real(p.mse)});
    return t;
}

inline CsvTable variance_spectrum_csv(const PcaCodebook& cb) {
    CsvTable t({"basis[index]", "sigma[intensity]", "variance_fraction[1]"});
    const auto v = variance_spectrum(cb);
    for (std::size_t i = 0; i < v.size(); ++i)
        t.add_row({std::to_string(i), format_real(cb.sigma[static_cast<Eigen::Index>(i)]), format_real(v[i])});
    return t;
}

inline void export_csv(const Histogram& h, const std::string& path, const std::string& unit = "1") {
    histogram_csv(h, unit).write(path);
}
inline void export_csv(const DensityGrid& g, const std::string& path, const std::string& u_name = "u",
                       const std::string& v_name = "v") {
    density_csv(g, u_name, v_name).write(path);
}
inline void export_csv(const std::vector<LossRecord>& curve, const std::string& path) { loss_curve_csv(curve).write(path); }
inline void export_csv(const std::vector<RateDistortionPoint>& pts, const std::string& path) {
    rate_distortion_csv(pts).write(path);
}

} // namespace polarcube
