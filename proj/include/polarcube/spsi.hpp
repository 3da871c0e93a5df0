/**
 * @file spsi.hpp
 * @brief SPSI single-file container for cubes, raw captures and codec artifacts.
 *
 * Layout, little-endian throughout:
 *
 *     "SPSI"  u16 version  u16 kind  u32 width  u32 height
 *     u16 channels  u16 components  u8 dtype  f32 wavelengths[channels]
 *     payload
 *
 * A Stokes cube payload is the data (channel, component, row, column order)
 * followed by the validity mask packed LSB-first in (channel, row, column)
 * order. dtype 0 stores 32-bit floats and dtype 1 64-bit floats.
 */
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "analysis.hpp"
#include "atomic_file.hpp"
#include "camera.hpp"
#include "error.hpp"
#include "image.hpp"
#include "inr.hpp"
#include "pca.hpp"

namespace polarcube {

inline constexpr std::uint16_t kSpsiVersion = 1;
inline constexpr std::size_t kSpsiFixedHeaderBytes = 21;

enum class SpsiKind : std::uint16_t { stokes_cube = 0, raw_capture = 1, pca = 2, inr = 3, normal_stack = 4 };
enum class SpsiDtype : std::uint8_t { f32 = 0, f64 = 1 };

inline std::size_t dtype_bytes(SpsiDtype d) { return d == SpsiDtype::f32 ? 4 : 8; }

class FormatError : public IoError {
public:
    enum class Reason { bad_magic, truncated, version_mismatch, trailing_bytes, kind_mismatch, invariant };
    FormatError(Reason r, const std::string& what) : IoError(what), reason_(r) {}
    Reason reason() const { return reason_; }

private:
    Reason reason_;
};

struct SpsiHeader {
    std::uint16_t version = kSpsiVersion;
    SpsiKind kind = SpsiKind::stokes_cube;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint16_t channels = 0;
    std::uint16_t components = 4;
    SpsiDtype dtype = SpsiDtype::f32;
    std::vector<float> wavelengths;  ///< length channels; 0 = unspecified

    std::size_t byte_size() const { return kSpsiFixedHeaderBytes + 4 * static_cast<std::size_t>(channels); }
};

/// Payload bytes of a Stokes cube: data plus the packed mask.
inline std::uint64_t cube_payload_bytes(std::uint64_t width, std::uint64_t height, std::uint64_t channels,
                                        SpsiDtype dtype = SpsiDtype::f32) {
    const std::uint64_t entries = width * height * channels;
    return entries * 4 * dtype_bytes(dtype) + (entries + 7) / 8;
}

/// Total bytes of a Stokes cube file, header included.
inline std::uint64_t cube_file_bytes(std::uint64_t width, std::uint64_t height, std::uint64_t channels,
                                     SpsiDtype dtype = SpsiDtype::f32) {
    return kSpsiFixedHeaderBytes + 4 * channels + cube_payload_bytes(width, height, channels, dtype);
}

namespace detail {

class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        std::array<std::uint8_t, sizeof(T)> b;
        std::memcpy(b.data(), &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
        bytes_.insert(bytes_.end(), b.begin(), b.end());
    }
    void put_real(double v, SpsiDtype d) {
        if (d == SpsiDtype::f32) put(static_cast<float>(v));
        else put(v);
    }
    void put_bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), c, c + n);
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::array<std::uint8_t, sizeof(T)> v;
        std::memcpy(v.data(), b_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(v.begin(), v.end());
        pos_ += sizeof(T);
        T out;
        std::memcpy(&out, v.data(), sizeof(T));
        return out;
    }
    double get_real(SpsiDtype d) { return d == SpsiDtype::f32 ? static_cast<double>(get<float>()) : get<double>(); }
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw FormatError(FormatError::Reason::truncated, "SPSI: file is truncated");
    }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return b_.size() - pos_; }
    const std::uint8_t* cursor() const { return b_.data() + pos_; }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    void finish() const {
        if (pos_ != b_.size()) throw FormatError(FormatError::Reason::trailing_bytes, "SPSI: payload size does not match file length");
    }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

template <typename T>
std::uint16_t checked_u16(T v, const char* what) {
    if (v > 0xFFFF) throw ConfigError(std::string("SPSI: ") + what + " exceeds 16 bits");
    return static_cast<std::uint16_t>(v);
}
template <typename T>
std::uint32_t checked_u32(T v, const char* what) {
    if (v > 0xFFFFFFFFull) throw ConfigError(std::string("SPSI: ") + what + " exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
}

inline std::vector<float> wavelength_table(const std::vector<double>& wl, std::size_t channels) {
    std::vector<float> out(channels, 0.0f);
    for (std::size_t i = 0; i < wl.size() && i < channels; ++i) out[i] = static_cast<float>(wl[i]);
    return out;
}

/// All-zero tables mean "unspecified" and load as empty.
inline std::vector<double> wavelengths_from_table(const std::vector<float>& t) {
    if (std::all_of(t.begin(), t.end(), [](float v) { return v == 0.0f; })) return {};
    return std::vector<double>(t.begin(), t.end());
}

inline void write_header(ByteWriter& w, const SpsiHeader& h) {
    w.put_bytes("SPSI", 4);
    w.put(h.version);
    w.put(static_cast<std::uint16_t>(h.kind));
    w.put(h.width);
    w.put(h.height);
    w.put(h.channels);
    w.put(h.components);
    w.put(static_cast<std::uint8_t>(h.dtype));
    for (float v : h.wavelengths) w.put(v);
}

inline SpsiHeader read_header(ByteReader& r) {
    r.need(4);
    if (std::memcmp(r.cursor(), "SPSI", 4) != 0) throw FormatError(FormatError::Reason::bad_magic, "SPSI: bad magic");
    r.skip(4);
    SpsiHeader h;
    h.version = r.get<std::uint16_t>();
    if (h.version != kSpsiVersion)
        throw FormatError(FormatError::Reason::version_mismatch, "SPSI: unsupported version " + std::to_string(h.version));
    const auto kind = r.get<std::uint16_t>();
    if (kind > 4) throw FormatError(FormatError::Reason::invariant, "SPSI: unknown kind " + std::to_string(kind));
    h.kind = static_cast<SpsiKind>(kind);
    h.width = r.get<std::uint32_t>();
    h.height = r.get<std::uint32_t>();
    h.channels = r.get<std::uint16_t>();
    h.components = r.get<std::uint16_t>();
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw FormatError(FormatError::Reason::invariant, "SPSI: unknown dtype " + std::to_string(dtype));
    h.dtype = static_cast<SpsiDtype>(dtype);
    h.wavelengths.resize(h.channels);
    for (auto& v : h.wavelengths) v = r.get<float>();
    return h;
}

inline void expect_kind(const SpsiHeader& h, SpsiKind k) {
    if (h.kind != k) throw FormatError(FormatError::Reason::kind_mismatch, "SPSI: unexpected object kind");
}

inline void put_plane(ByteWriter& w, std::span<const double> v, SpsiDtype d) {
    for (double x : v) w.put_real(x, d);
}
inline void get_plane(ByteReader& r, std::span<double> v, SpsiDtype d) {
    r.need(v.size() * dtype_bytes(d));
    for (double& x : v) x = r.get_real(d);
}

/// Runs a constructor, reporting its invariant failures as format errors.
template <typename Fn>
auto construct(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(FormatError::Reason::invariant, std::string("SPSI: invalid object: ") + e.what());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Stokes cube

inline std::vector<std::uint8_t> encode_spsi(const StokesImage& img, SpsiDtype dtype = SpsiDtype::f32) {
    SpsiHeader h;
    h.kind = SpsiKind::stokes_cube;
    h.width = detail::checked_u32(img.width(), "width");
    h.height = detail::checked_u32(img.height(), "height");
    h.channels = detail::checked_u16(img.channels(), "channels");
    h.components = 4;
    h.dtype = dtype;
    h.wavelengths = detail::wavelength_table(img.wavelengths(), img.channels());
    detail::ByteWriter w;
    detail::write_header(w, h);
    detail::put_plane(w, img.raw(), dtype);
    const auto mask = img.mask();
    std::vector<std::uint8_t> packed((mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    w.put_bytes(packed.data(), packed.size());
    return std::move(w.bytes());
}

inline StokesImage decode_stokes_cube(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    const SpsiHeader h = detail::read_header(r);
    detail::expect_kind(h, SpsiKind::stokes_cube);
    if (h.components != 4) throw FormatError(FormatError::Reason::invariant, "SPSI: cube must have 4 components");
    const std::uint64_t payload = cube_payload_bytes(h.width, h.height, h.channels, h.dtype);
    if (r.remaining() < payload) throw FormatError(FormatError::Reason::truncated, "SPSI: file is truncated");
    if (r.remaining() > payload) throw FormatError(FormatError::Reason::trailing_bytes, "SPSI: payload size does not match file length");
    StokesImage img = detail::construct(
        [&] { return StokesImage(h.height, h.width, h.channels, detail::wavelengths_from_table(h.wavelengths)); });
    detail::get_plane(r, img.raw(), h.dtype);
    auto mask = img.mask();
    const std::size_t nbytes = (mask.size() + 7) / 8;
    const std::uint8_t* packed = r.cursor();
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
    r.skip(nbytes);
    r.finish();
    return img;
}

// ---------------------------------------------------------------------------
// Raw capture
//
// After the common header: f64 saturation, f64 black, u8 has_layout,
// [16 x (u8 color, f64 polarizer, f64 retarder, f64 retardance)], u32 frame
// count, frame table (u16 channel, u16 config index), then frame data.

inline std::vector<std::uint8_t> encode_spsi(const RawCapture& raw, SpsiDtype dtype = SpsiDtype::f32) {
    SpsiHeader h;
    h.kind = SpsiKind::raw_capture;
    h.width = detail::checked_u32(raw.width, "width");
    h.height = detail::checked_u32(raw.height, "height");
    h.channels = detail::checked_u16(raw.wavelengths.size(), "channels");
    h.components = 1;
    h.dtype = dtype;
    h.wavelengths = detail::wavelength_table(raw.wavelengths, raw.wavelengths.size());
    detail::ByteWriter w;
    detail::write_header(w, h);
    w.put(raw.saturation_level);
    w.put(raw.black_level);
    w.put(static_cast<std::uint8_t>(raw.layout ? 1 : 0));
    if (raw.layout)
        for (const auto& c : raw.layout->cells()) {
            w.put(static_cast<std::uint8_t>(c.color));
            w.put(c.polarizer_axis);
            w.put(c.retarder_axis);
            w.put(c.retardance);
        }
    w.put(detail::checked_u32(raw.frames.size(), "frame count"));
    for (const auto& f : raw.frames) {
        if (f.data.height() != raw.height || f.data.width() != raw.width)
            throw ConfigError("write_spsi: frame dimensions do not match capture");
        w.put(detail::checked_u16(f.channel, "frame channel"));
        w.put(detail::checked_u16(f.config_index, "frame config index"));
    }
    for (const auto& f : raw.frames) detail::put_plane(w, f.data.values(), dtype);
    return std::move(w.bytes());
}

inline RawCapture decode_raw_capture(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    const SpsiHeader h = detail::read_header(r);
    detail::expect_kind(h, SpsiKind::raw_capture);
    RawCapture raw;
    raw.width = h.width;
    raw.height = h.height;
    raw.wavelengths.assign(h.wavelengths.begin(), h.wavelengths.end());
    raw.saturation_level = r.get<double>();
    raw.black_level = r.get<double>();
    const auto has_layout = r.get<std::uint8_t>();
    if (has_layout > 1) throw FormatError(FormatError::Reason::invariant, "SPSI: bad layout flag");
    if (has_layout) {
        std::array<MosaicCell, 16> cells;
        for (auto& c : cells) {
            const auto color = r.get<std::uint8_t>();
            if (color > 2) throw FormatError(FormatError::Reason::invariant, "SPSI: bad mosaic color");
            c.color = static_cast<BayerColor>(color);
            c.polarizer_axis = r.get<double>();
            c.retarder_axis = r.get<double>();
            c.retardance = r.get<double>();
        }
        raw.layout = detail::construct([&] { return MosaicLayout(cells); });
    }
    const auto count = r.get<std::uint32_t>();
    r.need(static_cast<std::size_t>(count) * 4);
    raw.frames.resize(count);
    for (auto& f : raw.frames) {
        f.channel = r.get<std::uint16_t>();
        f.config_index = r.get<std::uint16_t>();
    }
    const std::uint64_t frame_bytes = static_cast<std::uint64_t>(h.width) * h.height * dtype_bytes(h.dtype);
    if (r.remaining() < frame_bytes * count) throw FormatError(FormatError::Reason::truncated, "SPSI: file is truncated");
    for (auto& f : raw.frames) {
        f.data = Plane(raw.height, raw.width);
        detail::get_plane(r, f.data.values(), h.dtype);
    }
    r.finish();
    if (!(raw.saturation_level > raw.black_level))
        throw FormatError(FormatError::Reason::invariant, "SPSI: saturation level must exceed black level");
    if (raw.layout && raw.frames.size() != 1)
        throw FormatError(FormatError::Reason::invariant, "SPSI: mosaic capture must hold one frame");
    return raw;
}

// ---------------------------------------------------------------------------
// PCA artifact
//
// Dimension table (u32): patch_size, channels, element + 1, D, K,
// has_encoding, then for encodings height, width, grid_rows, grid_cols.
// Tensors: mean[D], basis[D x K] row-major, sigma[K], total_variance,
// coefficients[N x K] row-major.

struct PcaArtifact {
    PcaCodebook codebook;
    std::optional<PcaEncoding> encoding;
};

inline std::vector<std::uint8_t> encode_spsi(const PcaArtifact& art, SpsiDtype dtype = SpsiDtype::f32) {
    const PcaCodebook& cb = art.codebook;
    SpsiHeader h;
    h.kind = SpsiKind::pca;
    h.width = art.encoding ? detail::checked_u32(art.encoding->width, "width") : 0;
    h.height = art.encoding ? detail::checked_u32(art.encoding->height, "height") : 0;
    h.channels = detail::checked_u16(cb.channels, "channels");
    h.components = static_cast<std::uint16_t>(cb.elements_per_pixel());
    h.dtype = dtype;
    h.wavelengths = detail::wavelength_table(art.encoding ? art.encoding->wavelengths : std::vector<double>{}, cb.channels);
    if (cb.basis.rows() != cb.mean.size() || cb.sigma.size() != cb.basis.cols())
        throw ConfigError("write_spsi: inconsistent codebook");
    detail::ByteWriter w;
    detail::write_header(w, h);
    w.put(detail::checked_u32(cb.patch_size, "patch size"));
    w.put(detail::checked_u32(cb.channels, "channels"));
    w.put(static_cast<std::uint32_t>(cb.element + 1));
    w.put(detail::checked_u32(cb.dimension(), "dimension"));
    w.put(detail::checked_u32(cb.components(), "components"));
    w.put(static_cast<std::uint32_t>(art.encoding ? 1 : 0));
    if (art.encoding) {
        const PcaEncoding& e = *art.encoding;
        if (static_cast<std::size_t>(e.coefficients.cols()) != cb.components() ||
            static_cast<std::size_t>(e.coefficients.rows()) != e.grid_rows * e.grid_cols)
            throw ConfigError("write_spsi: encoding does not match codebook");
        w.put(detail::checked_u32(e.height, "height"));
        w.put(detail::checked_u32(e.width, "width"));
        w.put(detail::checked_u32(e.grid_rows, "grid rows"));
        w.put(detail::checked_u32(e.grid_cols, "grid cols"));
    }
    for (Eigen::Index i = 0; i < cb.mean.size(); ++i) w.put_real(cb.mean[i], dtype);
    for (Eigen::Index i = 0; i < cb.basis.rows(); ++i)
        for (Eigen::Index j = 0; j < cb.basis.cols(); ++j) w.put_real(cb.basis(i, j), dtype);
    for (Eigen::Index i = 0; i < cb.sigma.size(); ++i) w.put_real(cb.sigma[i], dtype);
    w.put_real(cb.total_variance, dtype);
    if (art.encoding) {
        const auto& c = art.encoding->coefficients;
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = 0; j < c.cols(); ++j) w.put_real(c(i, j), dtype);
    }
    return std::move(w.bytes());
}

inline PcaArtifact decode_pca(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    const SpsiHeader h = detail::read_header(r);
    detail::expect_kind(h, SpsiKind::pca);
    PcaArtifact art;
    PcaCodebook& cb = art.codebook;
    cb.patch_size = r.get<std::uint32_t>();
    cb.channels = r.get<std::uint32_t>();
    cb.element = static_cast<int>(r.get<std::uint32_t>()) - 1;
    const std::size_t d = r.get<std::uint32_t>();
    const std::size_t k = r.get<std::uint32_t>();
    const auto has_enc = r.get<std::uint32_t>();
    auto bad = [](const char* what) { return FormatError(FormatError::Reason::invariant, std::string("SPSI: ") + what); };
    if (cb.element < kJointElements || cb.element > 3) throw bad("PCA element out of range");
    if (cb.patch_size == 0 || d != patch_dimension(cb.patch_size, cb.channels, cb.element)) throw bad("PCA dimension mismatch");
    if (k == 0 || k > d) throw bad("PCA component count out of range");
    if (has_enc > 1) throw bad("bad encoding flag");
    std::size_t grid_rows = 0, grid_cols = 0, height = 0, width = 0;
    if (has_enc) {
        height = r.get<std::uint32_t>();
        width = r.get<std::uint32_t>();
        grid_rows = r.get<std::uint32_t>();
        grid_cols = r.get<std::uint32_t>();
        if (grid_rows != height / cb.patch_size || grid_cols != width / cb.patch_size) throw bad("PCA grid mismatch");
    }
    const std::size_t n = grid_rows * grid_cols;
    r.need((d + d * k + k + 1 + n * k) * dtype_bytes(h.dtype));
    const auto di = static_cast<Eigen::Index>(d), ki = static_cast<Eigen::Index>(k);
    cb.mean.resize(di);
    for (Eigen::Index i = 0; i < di; ++i) cb.mean[i] = r.get_real(h.dtype);
    cb.basis.resize(di, ki);
    for (Eigen::Index i = 0; i < di; ++i)
        for (Eigen::Index j = 0; j < ki; ++j) cb.basis(i, j) = r.get_real(h.dtype);
    cb.sigma.resize(ki);
    for (Eigen::Index i = 0; i < ki; ++i) cb.sigma[i] = r.get_real(h.dtype);
    cb.total_variance = r.get_real(h.dtype);
    if (has_enc) {
        PcaEncoding e;
        e.height = height;
        e.width = width;
        e.grid_rows = grid_rows;
        e.grid_cols = grid_cols;
        e.wavelengths = detail::wavelengths_from_table(h.wavelengths);
        e.coefficients.resize(static_cast<Eigen::Index>(n), ki);
        for (Eigen::Index i = 0; i < e.coefficients.rows(); ++i)
            for (Eigen::Index j = 0; j < ki; ++j) e.coefficients(i, j) = r.get_real(h.dtype);
        art.encoding = std::move(e);
    }
    r.finish();
    return art;
}

// ---------------------------------------------------------------------------
// INR model
//
// Dimension table (u32): layers, hidden, feature_dim, k_spatial, k_channel.
// Tensors follow InrModel::flatten order.

inline std::vector<std::uint8_t> encode_spsi(const InrModel& m, const std::vector<double>& wavelengths = {},
                                             SpsiDtype dtype = SpsiDtype::f32) {
    SpsiHeader h;
    h.kind = SpsiKind::inr;
    h.width = detail::checked_u32(m.width, "width");
    h.height = detail::checked_u32(m.height, "height");
    h.channels = detail::checked_u16(m.channels, "channels");
    h.components = 4;
    h.dtype = dtype;
    h.wavelengths = detail::wavelength_table(wavelengths, m.channels);
    detail::ByteWriter w;
    detail::write_header(w, h);
    for (std::size_t v : {m.layers, m.hidden, m.feature_dim, m.k_spatial, m.k_channel}) w.put(detail::checked_u32(v, "INR dimension"));
    for (double v : m.flatten()) w.put_real(v, dtype);
    return std::move(w.bytes());
}

inline InrModel decode_inr(const std::vector<std::uint8_t>& bytes, std::vector<double>* wavelengths = nullptr) {
    detail::ByteReader r(bytes);
    const SpsiHeader h = detail::read_header(r);
    detail::expect_kind(h, SpsiKind::inr);
    InrArchitecture arch;
    arch.layers = r.get<std::uint32_t>();
    arch.hidden = r.get<std::uint32_t>();
    arch.feature_dim = r.get<std::uint32_t>();
    arch.k_spatial = r.get<std::uint32_t>();
    arch.k_channel = r.get<std::uint32_t>();
    if (arch.feature_dim == 0 || arch.layers > 64 || arch.hidden > 65536 || arch.feature_dim > 65536 || arch.k_spatial > 64 ||
        arch.k_channel > 64)
        throw FormatError(FormatError::Reason::invariant, "SPSI: INR dimensions out of range");
    InrModel m = detail::construct([&] { return inr_init(arch, h.height, h.width, h.channels, 0); });
    std::vector<double> values(m.parameter_count());
    r.need(values.size() * dtype_bytes(h.dtype));
    for (double& v : values) v = r.get_real(h.dtype);
    r.finish();
    m.unflatten(values);
    if (!m.all_finite()) throw FormatError(FormatError::Reason::invariant, "SPSI: INR weights are not finite");
    if (wavelengths) *wavelengths = detail::wavelengths_from_table(h.wavelengths);
    return m;
}

// ---------------------------------------------------------------------------
// Normal-map stack: data in (channel, component, row, column) order, 3 components.

inline std::vector<std::uint8_t> encode_spsi(const NormalMapStack& s, SpsiDtype dtype = SpsiDtype::f32) {
    SpsiHeader h;
    h.kind = SpsiKind::normal_stack;
    h.width = detail::checked_u32(s.width(), "width");
    h.height = detail::checked_u32(s.height(), "height");
    h.channels = detail::checked_u16(s.channels(), "channels");
    h.components = 3;
    h.dtype = dtype;
    h.wavelengths.assign(s.channels(), 0.0f);
    detail::ByteWriter w;
    detail::write_header(w, h);
    detail::put_plane(w, s.raw(), dtype);
    return std::move(w.bytes());
}

inline NormalMapStack decode_normal_stack(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    const SpsiHeader h = detail::read_header(r);
    detail::expect_kind(h, SpsiKind::normal_stack);
    if (h.components != 3) throw FormatError(FormatError::Reason::invariant, "SPSI: normal stack must have 3 components");
    const std::uint64_t payload = static_cast<std::uint64_t>(h.width) * h.height * h.channels * 3 * dtype_bytes(h.dtype);
    if (r.remaining() < payload) throw FormatError(FormatError::Reason::truncated, "SPSI: file is truncated");
    NormalMapStack s(h.height, h.width, h.channels);
    detail::get_plane(r, s.raw(), h.dtype);
    r.finish();
    detail::construct([&] {
        s.validate(h.dtype == SpsiDtype::f32 ? 1e-3 + 1e-6 : 1e-3);
        return 0;
    });
    return s;
}

// ---------------------------------------------------------------------------
// Files

inline SpsiHeader read_spsi_header(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    detail::ByteReader r(bytes);
    return detail::read_header(r);
}

template <typename T, typename... Args>
void write_spsi(const std::string& path, const T& obj, Args&&... args) {
    atomic_write_file(path, encode_spsi(obj, std::forward<Args>(args)...));
}

inline StokesImage read_stokes_cube(const std::string& path) { return decode_stokes_cube(read_file_bytes(path)); }
inline RawCapture read_raw_capture(const std::string& path) { return decode_raw_capture(read_file_bytes(path)); }
inline PcaArtifact read_pca(const std::string& path) { return decode_pca(read_file_bytes(path)); }
inline InrModel read_inr(const std::string& path, std::vector<double>* wavelengths = nullptr) {
    return decode_inr(read_file_bytes(path), wavelengths);
}
inline NormalMapStack read_normal_stack(const std::string& path) { return decode_normal_stack(read_file_bytes(path)); }

using SpsiObject = std::variant<StokesImage, RawCapture, PcaArtifact, InrModel, NormalMapStack>;

/// Reads any container, dispatching on the header kind.
inline SpsiObject read_spsi(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    detail::ByteReader r(bytes);
    const SpsiHeader h = detail::read_header(r);
    switch (h.kind) {
    case SpsiKind::stokes_cube: return decode_stokes_cube(bytes);
    case SpsiKind::raw_capture: return decode_raw_capture(bytes);
    case SpsiKind::pca: return decode_pca(bytes);
    case SpsiKind::inr: return decode_inr(bytes);
    case SpsiKind::normal_stack: return decode_normal_stack(bytes);
    }
    throw FormatError(FormatError::Reason::invariant, "SPSI: unknown kind");
}

} // namespace polarcube
