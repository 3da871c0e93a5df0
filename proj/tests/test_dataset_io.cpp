#include <gtest/gtest.h>

#include <polarcube/camera.hpp>
#include <polarcube/csv.hpp>
#include <polarcube/labels.hpp>
#include <polarcube/scenes.hpp>
#include <polarcube/spsi.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

using namespace polarcube;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int n = 0;
        path_ = fs::temp_directory_path() / ("polarcube_io_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

// Values exactly representable in binary32, so the default dtype round-trips bit-exactly.
StokesImage float_exact_scene(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
    StokesImage img = random_scene(h, w, c, seed, c == 21 ? hyperspectral_wavelengths() : std::vector<double>{});
    for (double& v : img.raw()) v = static_cast<double>(static_cast<float>(v));
    return img;
}

bool same_bits(const StokesImage& a, const StokesImage& b) {
    return a.same_shape(b) && a.wavelengths() == b.wavelengths() &&
           std::memcmp(a.raw().data(), b.raw().data(), a.raw().size_bytes()) == 0 &&
           std::equal(a.mask().begin(), a.mask().end(), b.mask().begin());
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

} // namespace

TEST(Spsi, CubeRoundTripIsBitExact) {
    TempDir dir;
    auto img = float_exact_scene(7, 9, 21, 1);
    img.set_valid(3, 4, 5, false);
    img.set_valid(0, 0, 0, false);
    write_spsi(dir.file("a.spsi"), img);
    EXPECT_TRUE(same_bits(read_stokes_cube(dir.file("a.spsi")), img));
}

TEST(Spsi, DoublePrecisionRoundTripIsBitExact) {
    auto img = random_scene(5, 6, 3, 2);
    img.set_valid(1, 2, 1, false);
    EXPECT_TRUE(same_bits(decode_stokes_cube(encode_spsi(img, SpsiDtype::f64)), img));
}

TEST(Spsi, EncodingIsDeterministic) {
    const auto img = random_scene(6, 6, 2, 3);
    EXPECT_EQ(encode_spsi(img), encode_spsi(img));
    const auto bytes = encode_spsi(img);
    EXPECT_EQ(encode_spsi(decode_stokes_cube(bytes)), bytes);
}

TEST(Spsi, HeaderLayoutAndPayloadSize) {
    const StokesImage img(512, 612, 21, hyperspectral_wavelengths());
    const auto bytes = encode_spsi(img);
    const std::uint64_t entries = 612ull * 512 * 21;
    EXPECT_EQ(cube_payload_bytes(612, 512, 21), entries * 16 + (entries + 7) / 8);
    EXPECT_EQ(bytes.size(), 21 + 21 * 4 + cube_payload_bytes(612, 512, 21));
    EXPECT_EQ(std::memcmp(bytes.data(), "SPSI", 4), 0);
    std::uint32_t w = 0, h = 0;
    std::uint16_t version = 0, c = 0;
    std::memcpy(&version, bytes.data() + 4, 2);
    std::memcpy(&w, bytes.data() + 8, 4);
    std::memcpy(&h, bytes.data() + 12, 4);
    std::memcpy(&c, bytes.data() + 16, 2);
    EXPECT_EQ(version, kSpsiVersion);
    EXPECT_EQ(w, 612u);
    EXPECT_EQ(h, 512u);
    EXPECT_EQ(c, 21u);
    float first_wl = 0;
    std::memcpy(&first_wl, bytes.data() + 21, 4);
    EXPECT_EQ(first_wl, 450.0f);
}

TEST(Spsi, DataIsChannelMajorThenComponentThenRowMajor) {
    StokesImage img(2, 3, 2);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t y = 0; y < 2; ++y)
                for (std::size_t x = 0; x < 3; ++x) img.at(y, x, c, k) = static_cast<double>(((c * 4 + k) * 2 + y) * 3 + x);
    const auto bytes = encode_spsi(img);
    const std::size_t base = 21 + 2 * 4;
    for (std::size_t i = 0; i < 48; ++i) {
        float v = 0;
        std::memcpy(&v, bytes.data() + base + 4 * i, 4);
        EXPECT_EQ(v, static_cast<float>(i));
    }
}

TEST(Spsi, TruncationBadMagicVersionAndTrailingBytes) {
    const auto bytes = encode_spsi(random_scene(4, 4, 2, 4));
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
        const std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        try {
            decode_stokes_cube(t);
            FAIL() << "truncated at " << cut;
        } catch (const FormatError& e) {
            EXPECT_EQ(e.reason(), FormatError::Reason::truncated);
            EXPECT_EQ(e.category(), ErrorCategory::io);
        }
    }
    auto bad = bytes;
    bad[0] = 'X';
    try {
        decode_stokes_cube(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.reason(), FormatError::Reason::bad_magic);
    }
    bad = bytes;
    bad[4] = 9;
    try {
        decode_stokes_cube(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.reason(), FormatError::Reason::version_mismatch);
    }
    bad = bytes;
    bad.push_back(0);
    try {
        decode_stokes_cube(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.reason(), FormatError::Reason::trailing_bytes);
    }
}

TEST(Spsi, TruncatedFileLeavesNoObject) {
    TempDir dir;
    auto bytes = encode_spsi(random_scene(4, 4, 1, 5));
    bytes.resize(bytes.size() / 2);
    atomic_write_file(dir.file("t.spsi"), bytes);
    EXPECT_THROW(read_stokes_cube(dir.file("t.spsi")), FormatError);
    EXPECT_THROW(read_stokes_cube(dir.file("missing.spsi")), IoError);
}

TEST(Spsi, KindMismatchAndWavelengthInvariant) {
    const auto cube = encode_spsi(random_scene(4, 4, 1, 5));
    try {
        decode_raw_capture(cube);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.reason(), FormatError::Reason::kind_mismatch);
    }
    const auto img = random_scene(4, 4, 2, 6, {500.0, 600.0});
    EXPECT_EQ(decode_stokes_cube(encode_spsi(img)).wavelengths(), img.wavelengths());
    EXPECT_TRUE(decode_stokes_cube(encode_spsi(random_scene(4, 4, 2, 6))).wavelengths().empty());
}

TEST(Spsi, RawCaptureRoundTrip) {
    const auto scene = float_exact_scene(8, 8, 21, 7);
    NoiseModel noise;
    noise.gaussian_sigma = 0.01;
    noise.black_level = 0.001;
    auto raw = simulate_hyperspectral(scene, default_qwp_angles(), 0.0, noise);
    EXPECT_EQ(decode_raw_capture(encode_spsi(raw, SpsiDtype::f64)), raw);
    for (auto& f : raw.frames)
        for (double& v : f.data.values()) v = static_cast<double>(static_cast<float>(v));
    EXPECT_EQ(decode_raw_capture(encode_spsi(raw)), raw);
}

TEST(Spsi, MosaicCaptureKeepsLayout) {
    const auto raw = simulate_trichromatic(random_scene(8, 8, 3, 8), default_mosaic_layout(), NoiseModel{});
    const RawCapture back = decode_raw_capture(encode_spsi(raw, SpsiDtype::f64));
    EXPECT_EQ(back, raw);
    ASSERT_TRUE(back.layout.has_value());
    EXPECT_EQ(*back.layout, default_mosaic_layout());
}

TEST(Spsi, PcaArtifactRoundTrip) {
    const auto img = random_scene(20, 20, 2, 9);
    const PcaCodebook cb = pca_fit(img, 4, 6);
    const PcaArtifact art{cb, pca_encode(img, cb)};
    const PcaArtifact back = decode_pca(encode_spsi(art, SpsiDtype::f64));
    EXPECT_EQ(back.codebook.basis, cb.basis);
    EXPECT_EQ(back.codebook.mean, cb.mean);
    EXPECT_EQ(back.codebook.sigma, cb.sigma);
    EXPECT_EQ(back.codebook.total_variance, cb.total_variance);
    ASSERT_TRUE(back.encoding.has_value());
    EXPECT_EQ(back.encoding->coefficients, art.encoding->coefficients);
    EXPECT_EQ(encode_spsi(back, SpsiDtype::f64), encode_spsi(art, SpsiDtype::f64));
    const PcaArtifact book_only = decode_pca(encode_spsi(PcaArtifact{cb, std::nullopt}));
    EXPECT_FALSE(book_only.encoding.has_value());
    EXPECT_EQ(book_only.codebook.components(), 6u);
}

TEST(Spsi, InrModelRoundTrip) {
    const InrModel m = inr_init(InrArchitecture{3, 8, 6, 3, 1}, 5, 7, 4, 11);
    std::vector<double> wl;
    const InrModel back = decode_inr(encode_spsi(m, {1, 2, 3, 4}, SpsiDtype::f64), &wl);
    EXPECT_EQ(back.flatten(), m.flatten());
    EXPECT_EQ(back.feature_dim, 6u);
    EXPECT_EQ(back.height, 5u);
    EXPECT_EQ(wl, (std::vector<double>{1, 2, 3, 4}));
    auto bytes = encode_spsi(m);
    bytes.pop_back();
    EXPECT_THROW(decode_inr(bytes), FormatError);
}

TEST(Spsi, NormalStackRoundTripAndValidation) {
    NormalMapStack s(2, 3, 2);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t y = 0; y < 2; ++y)
            for (std::size_t x = 0; x < 3; ++x) s.set(y, x, c, 0.0, 0.6, 0.8);
    const NormalMapStack back = decode_normal_stack(encode_spsi(s, SpsiDtype::f64));
    EXPECT_TRUE(std::equal(back.raw().begin(), back.raw().end(), s.raw().begin()));
    s.set(1, 1, 1, 0.0, 0.0, 2.0);
    try {
        decode_normal_stack(encode_spsi(s));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.reason(), FormatError::Reason::invariant);
    }
}

TEST(Spsi, GenericReaderDispatchesOnKind) {
    TempDir dir;
    write_spsi(dir.file("c.spsi"), random_scene(4, 4, 1, 1));
    write_spsi(dir.file("m.spsi"), inr_init(InrArchitecture{2, 4, 0, 1, 1}, 4, 4, 1, 1));
    EXPECT_TRUE(std::holds_alternative<StokesImage>(read_spsi(dir.file("c.spsi"))));
    EXPECT_TRUE(std::holds_alternative<InrModel>(read_spsi(dir.file("m.spsi"))));
    EXPECT_EQ(read_spsi_header(dir.file("m.spsi")).kind, SpsiKind::inr);
}

TEST(Labels, RoundTrip) {
    TempDir dir;
    const LabelSet l{Environment::outdoor, Illumination::sunlight, "2023-06-01T10:00:00", SceneType::scene};
    write_labels(dir.file("l.json"), l);
    EXPECT_EQ(read_labels(dir.file("l.json")), l);
    const LabelSidecar sc{{Environment::indoor, Illumination::incandescent, "2023-01-02", SceneType::object}, "desk", "rig A"};
    write_labels(dir.file("s.json"), sc);
    EXPECT_EQ(read_label_sidecar(dir.file("s.json")), sc);
}

TEST(Labels, UnknownEnumRejected) {
    nlohmann::json j = to_json(LabelSidecar{});
    j["capture_time"] = "2023-06-01T10:00:00";
    j["illumination"] = "laser";
    try {
        sidecar_from_json(j);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("laser"), std::string::npos);
    }
}

TEST(Labels, MissingFieldNamed) {
    nlohmann::json j = to_json(LabelSidecar{});
    j["capture_time"] = "2023-06-01T10:00:00";
    j.erase("scene_type");
    try {
        sidecar_from_json(j);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("scene_type"), std::string::npos);
    }
}

TEST(Labels, TimestampMustBeIso8601) {
    EXPECT_TRUE(is_iso8601("2023-06-01T10:00:00"));
    EXPECT_TRUE(is_iso8601("2023-06-01T10:00:00Z"));
    EXPECT_FALSE(is_iso8601("June 1st"));
    nlohmann::json j = to_json(LabelSidecar{});
    j["capture_time"] = "yesterday";
    EXPECT_THROW(sidecar_from_json(j), IoError);
}

TEST(Csv, HistogramHasHeaderPlusOneLinePerBin) {
    Histogram h(0.0, 3.0, 3);
    for (double v : {0.5, 1.5, 1.6, 2.9}) h.add(v);
    const auto lines = lines_of(histogram_csv(h).text());
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_EQ(split(lines[0])[3], "count[samples]");
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(std::stoull(split(lines[i + 1])[3]), h.count(i));
}

TEST(Csv, ReparseReproducesValues) {
    const double v = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_real(v)), v);
    EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
    TempDir dir;
    Histogram h(-1.0, 1.0, 7);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 500; ++i) h.add(u(rng));
    export_csv(h, dir.file("h.csv"));
    std::ifstream in(dir.file("h.csv"));
    std::string line;
    std::getline(in, line);
    for (std::size_t i = 0; std::getline(in, line); ++i) {
        const auto cells = split(line);
        EXPECT_EQ(std::stod(cells[0]), h.edge(i));
        EXPECT_EQ(std::stoull(cells[3]), h.count(i));
    }
}

TEST(Csv, DensityGridIsRowMajorWithCenters) {
    DensityGrid g(-1.0, 1.0, 3);
    g.add(0.9, -0.9);
    const auto lines = lines_of(density_csv(g, "s1", "s2").text());
    ASSERT_EQ(lines.size(), 10u);
    EXPECT_EQ(lines[0], "row[index],col[index],s2_center[1],s1_center[1],count[samples],normalized[1]");
    for (std::size_t i = 0; i < 9; ++i) {
        const auto c = split(lines[i + 1]);
        EXPECT_EQ(std::stoul(c[0]), i / 3);
        EXPECT_EQ(std::stoul(c[1]), i % 3);
        EXPECT_EQ(std::stod(c[2]), g.center(i / 3));
        EXPECT_EQ(std::stoull(c[4]), i == 2 ? 1u : 0u);
    }
}

TEST(Csv, CurvesAndDeterminism) {
    const std::vector<LossRecord> curve{{0, 1.0, 0.01}, {10, 0.5, 0.005}};
    EXPECT_EQ(lines_of(loss_curve_csv(curve).text()).size(), 3u);
    EXPECT_EQ(loss_curve_csv(curve).text(), loss_curve_csv(curve).text());
    EXPECT_THROW(CsvTable({"a", "b"}).add_row({"1"}), ConfigError);
}

TEST(AtomicFile, WriteLeavesNoTempFiles) {
    TempDir dir;
    atomic_write_file(dir.file("x.bin"), std::string_view("abc"));
    atomic_write_file(dir.file("x.bin"), std::string_view("defg"));
    EXPECT_EQ(read_file_bytes(dir.file("x.bin")).size(), 4u);
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(fs::path(dir.file("x.bin")).parent_path())) ++n;
    EXPECT_EQ(n, 1u);
    EXPECT_THROW(atomic_write_file(dir.file("no/such/dir/x.bin"), std::string_view("a")), IoError);
}
