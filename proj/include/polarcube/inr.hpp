/**
 * @file inr.hpp
 * @brief Coordinate-network representation of a Stokes cube.
 *
 * Two-stage network:
 *   f   = spatial_mlp(gamma_ks(x), gamma_ks(y))        per-pixel feature
 *   s   = spectral_head(f, gamma_kc(c))                 4 Stokes outputs
 * with gamma_k(u) = [u, sin(w_0 u), cos(w_0 u), ..., sin(w_k u), cos(w_k u)],
 * w_j = 2^j pi, and coordinates normalised to [-1, 1].
 *
 * The spatial MLP has `layers` dense layers, all rectified. The spectral head
 * is one rectified hidden layer followed by a linear output layer.
 * Gradients are computed by a hand-written reverse pass over the batch.
 */
#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "error.hpp"
#include "image.hpp"
#include "parallel.hpp"
#include "reconstruct.hpp"

namespace polarcube {

/// gamma_k(x): length 2k + 3.
inline std::vector<double> positional_encode(double x, std::size_t k) {
    std::vector<double> out;
    out.reserve(2 * k + 3);
    out.push_back(x);
    double w = std::numbers::pi;
    for (std::size_t j = 0; j <= k; ++j, w *= 2.0) {
        out.push_back(std::sin(w * x));
        out.push_back(std::cos(w * x));
    }
    return out;
}

inline constexpr std::size_t encoding_length(std::size_t k) { return 2 * k + 3; }

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;

    std::size_t parameter_count() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

struct InrModel {
    std::size_t layers = 8;        ///< dense layers in the spatial MLP
    std::size_t hidden = 256;
    std::size_t feature_dim = 256;  ///< width of the per-pixel feature
    std::size_t k_spatial = 10;
    std::size_t k_channel = 1;
    // Coordinate ranges mapped to [-1, 1].
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t channels = 1;

    std::vector<DenseLayer> spatial;
    DenseLayer spectral_hidden;  ///< in: feature_dim + gamma_kc length
    DenseLayer output;           ///< hidden -> 4

    std::size_t parameter_count() const {
        std::size_t n = spectral_hidden.parameter_count() + output.parameter_count();
        for (const auto& l : spatial) n += l.parameter_count();
        return n;
    }

    double storage_bits(unsigned bits_per_value = 32) const {
        return static_cast<double>(parameter_count()) * bits_per_value;
    }

    bool all_finite() const {
        auto fin = [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); };
        if (!fin(spectral_hidden) || !fin(output)) return false;
        for (const auto& l : spatial)
            if (!fin(l)) return false;
        return true;
    }

    /// Visits every weight and bias tensor in a fixed order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        for (auto& l : spatial) {
            fn(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            fn(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
        for (DenseLayer* l : {&spectral_hidden, &output}) {
            fn(l->weight.data(), static_cast<std::size_t>(l->weight.size()));
            fn(l->bias.data(), static_cast<std::size_t>(l->bias.size()));
        }
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<InrModel*>(this)->for_each_tensor([&](double* p, std::size_t n) { fn(static_cast<const double*>(p), n); });
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        for_each_tensor([&](const double* p, std::size_t n) { out.insert(out.end(), p, p + n); });
        return out;
    }
    void unflatten(std::span<const double> values) {
        if (values.size() != parameter_count()) throw ConfigError("InrModel::unflatten: size mismatch");
        std::size_t off = 0;
        for_each_tensor([&](double* p, std::size_t n) {
            std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), n, p);
            off += n;
        });
    }

    double normalize(double v, std::size_t extent) const {
        return extent > 1 ? 2.0 * v / static_cast<double>(extent - 1) - 1.0 : 0.0;
    }
};

namespace detail {
inline DenseLayer init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    DenseLayer l;
    l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = u(rng);
    return l;
}
} // namespace detail

struct InrArchitecture {
    std::size_t layers = 8;
    std::size_t hidden = 256;
    std::size_t feature_dim = 0;  ///< 0 means equal to hidden
    std::size_t k_spatial = 10;
    std::size_t k_channel = 1;
};

/// Fresh model with variance-scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)) and zero biases.
inline InrModel inr_init(const InrArchitecture& arch, std::size_t height, std::size_t width, std::size_t channels,
                         std::uint64_t seed) {
    if (arch.layers < 2) throw ConfigError("inr_init: need at least 2 spatial layers");
    if (arch.hidden == 0) throw ConfigError("inr_init: hidden width must be positive");
    InrModel m;
    m.layers = arch.layers;
    m.hidden = arch.hidden;
    m.feature_dim = arch.feature_dim ? arch.feature_dim : arch.hidden;
    m.k_spatial = arch.k_spatial;
    m.k_channel = arch.k_channel;
    m.height = height;
    m.width = width;
    m.channels = channels;
    std::mt19937_64 rng(seed);
    std::size_t in = 2 * encoding_length(m.k_spatial);
    for (std::size_t i = 0; i < m.layers; ++i) {
        const std::size_t out = i + 1 == m.layers ? m.feature_dim : m.hidden;
        m.spatial.push_back(detail::init_dense(in, out, rng));
        in = out;
    }
    m.spectral_hidden = detail::init_dense(m.feature_dim + encoding_length(m.k_channel), m.hidden, rng);
    m.output = detail::init_dense(m.hidden, 4, rng);
    return m;
}

inline InrModel inr_init(std::size_t layers, std::size_t hidden, std::size_t height, std::size_t width,
                         std::size_t channels, std::uint64_t seed) {
    return inr_init(InrArchitecture{layers, hidden, 0, 10, 1}, height, width, channels, seed);
}

/// Gradient buffers with the model's shape.
struct InrGradient {
    std::vector<Eigen::MatrixXd> spatial_w;
    std::vector<Eigen::VectorXd> spatial_b;
    Eigen::MatrixXd hidden_w, output_w;
    Eigen::VectorXd hidden_b, output_b;

    std::vector<double> flatten() const {
        std::vector<double> out;
        auto push = [&](const auto& t) { out.insert(out.end(), t.data(), t.data() + t.size()); };
        for (std::size_t i = 0; i < spatial_w.size(); ++i) {
            push(spatial_w[i]);
            push(spatial_b[i]);
        }
        push(hidden_w);
        push(hidden_b);
        push(output_w);
        push(output_b);
        return out;
    }
};

/// One training target: pixel (y, x), channel c.
struct InrSample {
    std::size_t y = 0, x = 0, c = 0;
};

namespace detail {

inline Eigen::VectorXd encode_vec(double u, std::size_t k) {
    const auto v = positional_encode(u, k);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Batched activations of one forward pass. Pixels are unique columns of the
/// spatial stage; entries index (pixel, channel) pairs for the spectral head.
struct InrTape {
    std::vector<Eigen::MatrixXd> spatial_act;  ///< [0] = encoded input, [i+1] = relu output of layer i
    Eigen::MatrixXd hidden_pre;                ///< hidden x entries
    Eigen::MatrixXd hidden_act;
    Eigen::MatrixXd out;                       ///< 4 x entries
    std::vector<std::size_t> entry_pixel;
    std::vector<std::size_t> entry_channel;
};

/// Per-channel constant of the spectral hidden layer: W_c gamma(c) + b.
inline Eigen::MatrixXd channel_terms(const InrModel& m) {
    const auto fd = static_cast<Eigen::Index>(m.feature_dim);
    const auto ec = static_cast<Eigen::Index>(encoding_length(m.k_channel));
    Eigen::MatrixXd terms(static_cast<Eigen::Index>(m.hidden), static_cast<Eigen::Index>(m.channels));
    for (std::size_t c = 0; c < m.channels; ++c)
        terms.col(static_cast<Eigen::Index>(c)) =
            m.spectral_hidden.weight.middleCols(fd, ec) * encode_vec(m.normalize(static_cast<double>(c), m.channels), m.k_channel) +
            m.spectral_hidden.bias;
    return terms;
}

inline void forward(const InrModel& m, const std::vector<std::pair<double, double>>& pixel_coords,
                    const std::vector<std::size_t>& entry_pixel, const std::vector<std::size_t>& entry_channel,
                    InrTape& tape) {
    const auto np = static_cast<Eigen::Index>(pixel_coords.size());
    const auto es = static_cast<Eigen::Index>(encoding_length(m.k_spatial));
    Eigen::MatrixXd input(2 * es, np);
    for (Eigen::Index j = 0; j < np; ++j) {
        const auto [yy, xx] = pixel_coords[static_cast<std::size_t>(j)];
        input.col(j).head(es) = encode_vec(m.normalize(xx, m.width), m.k_spatial);
        input.col(j).tail(es) = encode_vec(m.normalize(yy, m.height), m.k_spatial);
    }
    tape.spatial_act.clear();
    tape.spatial_act.push_back(std::move(input));
    for (const auto& l : m.spatial) {
        Eigen::MatrixXd z = (l.weight * tape.spatial_act.back()).colwise() + l.bias;
        tape.spatial_act.push_back(z.cwiseMax(0.0));
    }
    const auto fd = static_cast<Eigen::Index>(m.feature_dim);
    const Eigen::MatrixXd g = m.spectral_hidden.weight.leftCols(fd) * tape.spatial_act.back();
    const Eigen::MatrixXd terms = channel_terms(m);
    const auto ne = static_cast<Eigen::Index>(entry_pixel.size());
    tape.hidden_pre.resize(static_cast<Eigen::Index>(m.hidden), ne);
    for (Eigen::Index e = 0; e < ne; ++e)
        tape.hidden_pre.col(e) = g.col(static_cast<Eigen::Index>(entry_pixel[static_cast<std::size_t>(e)])) +
                                 terms.col(static_cast<Eigen::Index>(entry_channel[static_cast<std::size_t>(e)]));
    tape.hidden_act = tape.hidden_pre.cwiseMax(0.0);
    tape.out = (m.output.weight * tape.hidden_act).colwise() + m.output.bias;
    tape.entry_pixel = entry_pixel;
    tape.entry_channel = entry_channel;
}

/// Reverse pass for loss = mean over entries and the 4 outputs of squared error.
inline void backward(const InrModel& m, const InrTape& tape, const Eigen::MatrixXd& target, InrGradient& grad) {
    const auto ne = tape.out.cols();
    const double scale = 2.0 / static_cast<double>(ne * 4);
    const Eigen::MatrixXd dout = scale * (tape.out - target);
    grad.output_w = dout * tape.hidden_act.transpose();
    grad.output_b = dout.rowwise().sum();
    Eigen::MatrixXd dpre = (m.output.weight.transpose() * dout).cwiseProduct(
        (tape.hidden_pre.array() > 0.0).cast<double>().matrix());
    grad.hidden_b = dpre.rowwise().sum();

    const auto fd = static_cast<Eigen::Index>(m.feature_dim);
    const auto ec = static_cast<Eigen::Index>(encoding_length(m.k_channel));
    const auto np = tape.spatial_act.back().cols();
    // Scatter entry gradients to pixels and channels.
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.hidden), np);
    Eigen::MatrixXd dchan = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.hidden), static_cast<Eigen::Index>(m.channels));
    for (Eigen::Index e = 0; e < ne; ++e) {
        dg.col(static_cast<Eigen::Index>(tape.entry_pixel[static_cast<std::size_t>(e)])) += dpre.col(e);
        dchan.col(static_cast<Eigen::Index>(tape.entry_channel[static_cast<std::size_t>(e)])) += dpre.col(e);
    }
    Eigen::MatrixXd enc_c(ec, static_cast<Eigen::Index>(m.channels));
    for (std::size_t c = 0; c < m.channels; ++c)
        enc_c.col(static_cast<Eigen::Index>(c)) = encode_vec(m.normalize(static_cast<double>(c), m.channels), m.k_channel);
    grad.hidden_w.resize(m.spectral_hidden.weight.rows(), m.spectral_hidden.weight.cols());
    grad.hidden_w.leftCols(fd) = dg * tape.spatial_act.back().transpose();
    grad.hidden_w.middleCols(fd, ec) = dchan * enc_c.transpose();

    Eigen::MatrixXd dact = m.spectral_hidden.weight.leftCols(fd).transpose() * dg;
    grad.spatial_w.resize(m.spatial.size());
    grad.spatial_b.resize(m.spatial.size());
    for (std::size_t i = m.spatial.size(); i-- > 0;) {
        const Eigen::MatrixXd& act = tape.spatial_act[i + 1];
        const Eigen::MatrixXd dz = dact.cwiseProduct((act.array() > 0.0).cast<double>().matrix());
        grad.spatial_w[i] = dz * tape.spatial_act[i].transpose();
        grad.spatial_b[i] = dz.rowwise().sum();
        if (i > 0) dact = m.spatial[i].weight.transpose() * dz;
    }
}

struct PreparedBatch {
    std::vector<std::pair<double, double>> pixel_coords;
    std::vector<std::size_t> entry_pixel, entry_channel;
    Eigen::MatrixXd target;
};

inline PreparedBatch prepare_batch(const StokesImage& img, std::span<const InrSample> samples) {
    PreparedBatch b;
    // Samples sharing a pixel share its spatial column.
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    b.target.resize(4, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t e = 0; e < samples.size(); ++e) {
        const auto& s = samples[e];
        std::size_t idx = keys.size();
        if (!keys.empty() && keys.back() == std::make_pair(s.y, s.x)) idx = keys.size() - 1;
        else {
            keys.emplace_back(s.y, s.x);
            b.pixel_coords.emplace_back(static_cast<double>(s.y), static_cast<double>(s.x));
        }
        b.entry_pixel.push_back(idx);
        b.entry_channel.push_back(s.c);
        for (std::size_t k = 0; k < 4; ++k) b.target(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e)) = img.at(s.y, s.x, s.c, k);
    }
    return b;
}

} // namespace detail

/// Network output at pixel coordinates (p_x, p_y) and channel index c.
inline StokesVector inr_forward(const InrModel& m, double p_x, double p_y, double c) {
    const auto fd = static_cast<Eigen::Index>(m.feature_dim);
    const auto es = static_cast<Eigen::Index>(encoding_length(m.k_spatial));
    Eigen::VectorXd a(2 * es);
    a.head(es) = detail::encode_vec(m.normalize(p_x, m.width), m.k_spatial);
    a.tail(es) = detail::encode_vec(m.normalize(p_y, m.height), m.k_spatial);
    for (const auto& l : m.spatial) a = (l.weight * a + l.bias).cwiseMax(0.0);
    const Eigen::VectorXd ec = detail::encode_vec(m.normalize(c, m.channels), m.k_channel);
    const Eigen::VectorXd h = (m.spectral_hidden.weight.leftCols(fd) * a +
                               m.spectral_hidden.weight.rightCols(ec.size()) * ec + m.spectral_hidden.bias)
                                  .cwiseMax(0.0);
    const Eigen::Vector4d o = m.output.weight * h + m.output.bias;
    return {o[0], o[1], o[2], o[3]};
}

/// Loss (mean squared error over samples and Stokes elements) and its gradient.
inline double inr_loss_and_gradient(const InrModel& m, const StokesImage& img, std::span<const InrSample> samples,
                                    InrGradient* grad = nullptr) {
    if (samples.empty()) throw ConfigError("inr_loss_and_gradient: empty batch");
    const auto batch = detail::prepare_batch(img, samples);
    detail::InrTape tape;
    detail::forward(m, batch.pixel_coords, batch.entry_pixel, batch.entry_channel, tape);
    const double loss = (tape.out - batch.target).squaredNorm() / static_cast<double>(tape.out.size());
    if (grad) detail::backward(m, tape, batch.target, *grad);
    return loss;
}

/// Evaluates the network on the full coordinate grid.
inline StokesImage inr_decode(const InrModel& m, std::size_t height, std::size_t width, unsigned threads = 1,
                              std::vector<double> wavelengths = {}) {
    StokesImage out(height, width, m.channels, std::move(wavelengths));
    parallel_for(height, threads, [&](std::size_t y) {
        std::vector<std::pair<double, double>> coords;
        std::vector<std::size_t> ep, ecn;
        for (std::size_t x = 0; x < width; ++x) {
            coords.emplace_back(static_cast<double>(y), static_cast<double>(x));
            for (std::size_t c = 0; c < m.channels; ++c) {
                ep.push_back(x);
                ecn.push_back(c);
            }
        }
        detail::InrTape tape;
        detail::forward(m, coords, ep, ecn, tape);
        for (std::size_t e = 0; e < ep.size(); ++e)
            for (std::size_t k = 0; k < 4; ++k)
                out.at(y, ep[e], ecn[e], k) = tape.out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e));
    });
    return out;
}

inline StokesImage inr_decode(const InrModel& m, unsigned threads = 1) { return inr_decode(m, m.height, m.width, threads); }

// ---------------------------------------------------------------------------
// Training

enum class InrOptimizer { adam, sgd };

struct InrTrainOptions {
    std::size_t steps = 2000;
    double learning_rate = 1e-3;
    double final_learning_rate = 0.0;  ///< cosine decay target
    bool cosine_decay = true;
    /// Pixels per step; every valid channel of a sampled pixel is used.
    /// 0 trains on every valid entry each step.
    std::size_t batch_pixels = 256;
    InrOptimizer optimizer = InrOptimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool last_layer_only = false;
    std::size_t record_every = 100;
    std::uint64_t seed = 0;
};

struct LossRecord {
    std::size_t step = 0;
    double mse = 0.0;
    double learning_rate = 0.0;
};

struct TrainReport {
    std::vector<LossRecord> loss_curve;
    double final_mse = 0.0;
    double final_psnr = 0.0;
    double wall_seconds = 0.0;
    std::size_t steps = 0;
};

/// Raised when the loss becomes non-finite; carries the last finite checkpoint.
class TrainingDivergedError : public NumericalError {
public:
    TrainingDivergedError(std::size_t step, InrModel checkpoint)
        : NumericalError("inr_train: loss diverged at step " + std::to_string(step)), step_(step),
          checkpoint_(std::move(checkpoint)) {}
    std::size_t step() const noexcept { return step_; }
    const InrModel& checkpoint() const noexcept { return checkpoint_; }

private:
    std::size_t step_;
    InrModel checkpoint_;
};

inline double learning_rate_at(const InrTrainOptions& opt, std::size_t step) {
    if (!opt.cosine_decay || opt.steps <= 1) return opt.learning_rate;
    const double t = static_cast<double>(step) / static_cast<double>(opt.steps - 1);
    return opt.final_learning_rate +
           0.5 * (opt.learning_rate - opt.final_learning_rate) * (1.0 + std::cos(std::numbers::pi * t));
}

/// Mean squared error of the decoded model over the valid entries of img.
inline double inr_mse(const InrModel& m, const StokesImage& img, unsigned threads = 1) {
    const StokesImage dec = inr_decode(m, img.height(), img.width(), threads);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < img.channels(); ++c)
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x) {
                if (!img.valid(y, x, c)) continue;
                for (std::size_t k = 0; k < 4; ++k) {
                    const double d = dec.at(y, x, c, k) - img.at(y, x, c, k);
                    s += d * d;
                }
                ++n;
            }
    return n ? s / static_cast<double>(4 * n) : 0.0;
}

/// Fits the model to the valid entries of img. The final PSNR uses the
/// reconstruction-quality conventions (peak = max reference s0).
inline TrainReport inr_train(InrModel& m, const StokesImage& img, const InrTrainOptions& opt, unsigned threads = 1) {
    if (img.height() != m.height || img.width() != m.width || img.channels() != m.channels)
        throw ConfigError("inr_train: image dims do not match the model's coordinate ranges");
    std::vector<std::size_t> valid_pixels;
    std::vector<InrSample> all;
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x) {
            bool any = false;
            for (std::size_t c = 0; c < img.channels(); ++c)
                if (img.valid(y, x, c)) {
                    all.push_back({y, x, c});
                    any = true;
                }
            if (any) valid_pixels.push_back(y * img.width() + x);
        }
    if (valid_pixels.empty()) throw ConfigError("inr_train: image has no valid pixels");

    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, valid_pixels.size() - 1);

    std::vector<double> params = m.flatten();
    std::vector<double> mom(params.size(), 0.0), vel(params.size(), 0.0);
    const std::size_t last_offset = params.size() - m.output.parameter_count();
    InrModel checkpoint = m;
    TrainReport report;
    InrGradient grad;
    std::vector<InrSample> batch;

    for (std::size_t step = 0; step < opt.steps; ++step) {
        std::span<const InrSample> samples = all;
        if (opt.batch_pixels > 0) {
            batch.clear();
            for (std::size_t i = 0; i < opt.batch_pixels; ++i) {
                const std::size_t p = valid_pixels[pick(rng)];
                const std::size_t y = p / img.width(), x = p % img.width();
                for (std::size_t c = 0; c < img.channels(); ++c)
                    if (img.valid(y, x, c)) batch.push_back({y, x, c});
            }
            samples = batch;
        }
        const double loss = inr_loss_and_gradient(m, img, samples, &grad);
        if (!std::isfinite(loss)) throw TrainingDivergedError(step, checkpoint);

        const double lr = learning_rate_at(opt, step);
        if (step % opt.record_every == 0 || step + 1 == opt.steps) {
            report.loss_curve.push_back({step, loss, lr});
            checkpoint = m;
        }

        const std::vector<double> g = grad.flatten();
        const std::size_t first = opt.last_layer_only ? last_offset : 0;
        if (opt.optimizer == InrOptimizer::sgd) {
            for (std::size_t i = first; i < params.size(); ++i) params[i] -= lr * g[i];
        } else {
            const double t = static_cast<double>(step + 1);
            const double c1 = 1.0 - std::pow(opt.beta1, t);
            const double c2 = 1.0 - std::pow(opt.beta2, t);
            for (std::size_t i = first; i < params.size(); ++i) {
                mom[i] = opt.beta1 * mom[i] + (1.0 - opt.beta1) * g[i];
                vel[i] = opt.beta2 * vel[i] + (1.0 - opt.beta2) * g[i] * g[i];
                params[i] -= lr * (mom[i] / c1) / (std::sqrt(vel[i] / c2) + opt.epsilon);
            }
        }
        m.unflatten(params);
    }
    if (!m.all_finite()) throw TrainingDivergedError(opt.steps, checkpoint);

    report.steps = opt.steps;
    const StokesImage dec = inr_decode(m, img.height(), img.width(), threads);
    StokesImage scored = dec;
    std::copy(img.mask().begin(), img.mask().end(), scored.mask().begin());
    const QualityReport q = quality(img, scored);
    report.final_mse = q.mse;
    report.final_psnr = q.psnr;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace polarcube
