#include <gtest/gtest.h>

#include <polarcube/analysis.hpp>
#include <polarcube/scenes.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace polarcube;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<LabeledImage> one(const StokesImage& img) { return {LabeledImage(img)}; }

std::size_t occupied_bins(const Histogram& h) {
    std::size_t n = 0;
    for (auto c : h.counts()) n += c != 0;
    return n;
}

} // namespace

TEST(Histogram, BinningAndOutOfRange) {
    Histogram h(0.0, 1.0, 4);
    for (double v : {0.0, 0.1, 0.25, 0.5, 0.99, 1.0, -0.1, 1.5, std::nan("")}) h.add(v);
    EXPECT_EQ(h.count(0), 2u);
    EXPECT_EQ(h.count(1), 1u);
    EXPECT_EQ(h.count(2), 1u);
    EXPECT_EQ(h.count(3), 2u);
    EXPECT_EQ(h.total(), 6u);
    EXPECT_EQ(h.out_of_range(), 3u);
    EXPECT_THROW(Histogram(1.0, 1.0, 3), ConfigError);
    EXPECT_THROW(Histogram(0.0, 1.0, 0), ConfigError);
}

TEST(Histogram, LogProbabilityIsNormalizedDensity) {
    Histogram h(-1.0, 1.0, 8);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) h.add(u(rng));
    const auto lp = h.log_probability();
    double integral = 0.0;
    for (double v : lp) integral += std::exp(v) * h.bin_width();
    EXPECT_NEAR(integral, 1.0, 1e-12);
    Histogram empty(0, 1, 3);
    empty.add(0.5);
    EXPECT_TRUE(std::isinf(empty.log_probability()[0]));
}

TEST(Histogram, MergeAddsCounts) {
    Histogram a(0, 1, 5), b(0, 1, 5);
    a.add(0.1);
    b.add(0.1);
    b.add(0.9);
    a.merge(b);
    EXPECT_EQ(a.count(0), 2u);
    EXPECT_EQ(a.total(), 3u);
    EXPECT_THROW(a.merge(Histogram(0, 2, 5)), ConfigError);
}

TEST(StokesHistogram, ConstantUnpolarizedImageHasSingleBinAtZero) {
    const auto img = constant_scene(8, 8, 2, {1, 0, 0, 0});
    for (Feature f : {Feature::s1, Feature::s2, Feature::s3}) {
        const Histogram h = stokes_histogram(one(img), f);
        EXPECT_EQ(occupied_bins(h), 1u);
        EXPECT_EQ(h.count(h.bin_of(0.0)), 128u);
        EXPECT_NEAR(h.center(h.bin_of(0.0)), 0.0, 1e-12);
    }
}

TEST(StokesHistogram, SymmetricSampleHasSmallSkewness) {
    StokesImage img(100, 100, 1);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.1);
    for (std::size_t y = 0; y < 100; ++y)
        for (std::size_t x = 0; x < 100; ++x) {
            const double s1 = n(rng);
            img.set_stokes(y, x, 0, {1.0, (x % 2 ? 1.0 : -1.0) * std::abs(s1), 0.0, 0.0});
        }
    EXPECT_LT(std::abs(stokes_histogram(one(img), Feature::s1).binned_skewness()), 0.05);
}

TEST(StokesHistogram, MaskedPixelsExcluded) {
    auto img = random_scene(10, 10, 3, 2);
    std::size_t invalid = 0;
    for (std::size_t y = 0; y < 10; y += 3)
        for (std::size_t x = 0; x < 10; x += 2, ++invalid) img.set_valid(y, x, 1, false);
    const Histogram h = stokes_histogram(one(img), Feature::s0);
    EXPECT_EQ(h.total(), img.valid_count());
    EXPECT_EQ(h.total(), 300u - invalid);
}

TEST(StokesHistogram, NormalizedElementsUseUnitRange) {
    const auto img = random_scene(10, 10, 1, 3);
    const Histogram h = stokes_histogram(one(img), Feature::ns2, 11);
    EXPECT_EQ(h.lo(), -1.0);
    EXPECT_EQ(h.hi(), 1.0);
    EXPECT_EQ(h.total(), 100u);
    EXPECT_THROW(stokes_histogram(one(img), Feature::dolp), ConfigError);
}

TEST(StokesHistogram, LabelFilterSelectsImages) {
    const auto a = constant_scene(4, 4, 1, {1, 0, 0, 0});
    const auto b = constant_scene(4, 4, 1, {2, 0, 0, 0});
    const LabelSet outdoor{Environment::outdoor, Illumination::sunlight, "2023-06-01T10:00:00", SceneType::scene};
    const LabelSet indoor{Environment::indoor, Illumination::white, "2023-06-01T10:00:00", SceneType::object};
    const std::vector<LabeledImage> imgs{LabeledImage(a, outdoor), LabeledImage(b, indoor), LabeledImage(b)};
    LabelFilter f;
    f.environments = {Environment::outdoor};
    EXPECT_EQ(stokes_histogram(imgs, Feature::s0, 10, f).mean(), 1.0);
    EXPECT_EQ(stokes_histogram(imgs, Feature::s0, 10).total(), 48u);
    f.environments = {Environment::indoor};
    f.illuminations = {Illumination::sunlight};
    EXPECT_THROW(stokes_histogram(imgs, Feature::s0, 10, f), ConfigError);
}

TEST(GradientField, ConstantAndRamp) {
    const auto g0 = gradient_field(Plane(5, 6, 0.7));
    for (double v : g0.gx.values()) EXPECT_EQ(v, 0.0);
    for (double v : g0.gy.values()) EXPECT_EQ(v, 0.0);
    Plane ramp(4, 7);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 7; ++x) ramp(y, x) = 0.25 * static_cast<double>(x);
    const auto g = gradient_field(ramp);
    EXPECT_EQ(g.gx.width(), 6u);
    EXPECT_EQ(g.gy.height(), 3u);
    for (double v : g.gx.values()) EXPECT_EQ(v, 0.25);
    for (double v : g.gy.values()) EXPECT_EQ(v, 0.0);
}

TEST(GradientField, MatchesNeighborDifferenceOracle) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    Plane p(9, 11);
    for (double& v : p.values()) v = u(rng);
    const auto g = gradient_field(p);
    const auto vals = p.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const std::size_t y = i / 11, x = i % 11;
        if (x + 1 < 11) {
            EXPECT_EQ(g.gx(y, x), vals[i + 1] - vals[i]);
        }
        if (y + 1 < 9) {
            EXPECT_EQ(g.gy(y, x), vals[i + 11] - vals[i]);
        }
    }
    EXPECT_THROW(gradient_field(Plane(1, 5)), ConfigError);
}

TEST(AolpGradient, WrapExamples) {
    EXPECT_NEAR(aolp_gradient(-kPi / 2 + 0.01, kPi / 2 - 0.01), -0.02, 1e-15);
    EXPECT_EQ(aolp_gradient(0.0, 0.3), 0.3);
    EXPECT_EQ(wrap_aolp_difference(kPi / 2), kPi / 2);
}

TEST(AolpGradient, OddUnderSwapAndBounded) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-kPi / 2, kPi / 2);
    for (int i = 0; i < 100000; ++i) {
        const double a = u(rng), b = u(rng);
        const double g = aolp_gradient(a, b);
        EXPECT_GE(g, -kPi / 2);
        EXPECT_LE(g, kPi / 2);
        if (std::abs(std::abs(b - a) - kPi / 2) > 1e-12) {
            EXPECT_EQ(aolp_gradient(b, a), -g);
        }
    }
}

TEST(AolpGradient, PlaneVersionChecksRange) {
    Plane p(2, 2, 0.0);
    p(0, 1) = kPi / 2 - 0.01;
    p(0, 0) = -kPi / 2 + 0.01;
    const auto g = aolp_gradient(p);
    EXPECT_NEAR(g.gx(0, 0), -0.02, 1e-15);
    p(1, 1) = 2.0;
    EXPECT_THROW(aolp_gradient(p), ConfigError);
}

TEST(FeatureGradients, ConstantFeatureGivesDeltaAtZero) {
    const auto img = constant_scene(6, 6, 2, stokes_from_ellipse(0.8, 0.5, 0.3, 0.1));
    for (Feature f : {Feature::s0, Feature::ns1, Feature::dolp, Feature::docp, Feature::aolp, Feature::cop}) {
        const Histogram h = feature_gradient_histogram(one(img), f);
        EXPECT_EQ(occupied_bins(h), 1u);
        EXPECT_EQ(h.total(), 2u * 2u * 6u * 5u);
        EXPECT_NEAR(h.center(h.bin_of(0.0)), 0.0, 1e-12);
    }
}

TEST(FeatureGradients, AolpSupportWithinHalfPi) {
    const auto img = random_scene(40, 40, 2, 12);
    const auto g = feature_gradients(one(img), Feature::aolp);
    ASSERT_FALSE(g.empty());
    for (double v : g) {
        EXPECT_GE(v, -kPi / 2);
        EXPECT_LE(v, kPi / 2);
    }
    const Histogram h = feature_gradient_histogram(one(img), Feature::aolp);
    EXPECT_EQ(h.out_of_range(), 0u);
    EXPECT_EQ(h.lo(), -kPi / 2);
}

TEST(FeatureGradients, SymmetricFieldHasNearZeroMean) {
    // A random field plus its point reflection: every gradient appears with both signs.
    const auto img = random_scene(64, 64, 1, 13);
    StokesImage flipped(64, 64, 1);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) flipped.set_stokes(63 - y, 63 - x, 0, img.stokes(y, x, 0));
    const std::vector<LabeledImage> pair{LabeledImage(img), LabeledImage(flipped)};
    for (Feature f : {Feature::s1, Feature::dolp, Feature::aolp, Feature::cop}) {
        const auto g = feature_gradients(pair, f);
        double m = 0.0;
        for (double v : g) m += v;
        EXPECT_LT(std::abs(m / static_cast<double>(g.size())), 1e-3);
    }
}

TEST(FeatureGradients, UndefinedAndInvalidEntriesSkipped) {
    auto img = constant_scene(3, 3, 1, {1, 0.5, 0, 0});
    img.set_stokes(1, 1, 0, {1, 0, 0, 0.3});
    const auto g = feature_gradients(one(img), Feature::aolp);
    EXPECT_EQ(g.size(), 12u - 4u);
    img.set_valid(0, 0, 0, false);
    EXPECT_EQ(feature_gradients(one(img), Feature::aolp).size(), 12u - 6u);
    EXPECT_EQ(feature_gradients(one(img), Feature::s0, GradientDirection::horizontal).size(), 6u - 1u);
}

TEST(FeatureGradients, CopUsesFiveUnitBins) {
    StokesImage img(2, 2, 1);
    img.set_stokes(0, 0, 0, {1, 0, 0, 0.5});
    img.set_stokes(0, 1, 0, {1, 0, 0, -0.5});
    img.set_stokes(1, 0, 0, {1, 0, 0, 0.5});
    img.set_stokes(1, 1, 0, {1, 0, 0, 0.5});
    const Histogram h = feature_gradient_histogram(one(img), Feature::cop);
    ASSERT_EQ(h.bins(), 5u);
    EXPECT_EQ(h.count(0), 1u);
    EXPECT_EQ(h.count(2), 2u);
    EXPECT_EQ(h.count(4), 1u);
}

TEST(PolUnpol, UnpolarizedAndFullyPolarizedExtremes) {
    const auto unpol = constant_scene(4, 4, 1, {0.7, 0, 0, 0});
    auto [p, u] = pol_unpol_histograms(one(unpol), 20);
    EXPECT_EQ(p.count(p.bin_of(0.0)), 16u);
    EXPECT_EQ(p.lo(), u.lo());
    EXPECT_EQ(p.hi(), u.hi());
    const auto pol = constant_scene(4, 4, 1, {0.7, 0.0, 0.7, 0.0});
    auto [p2, u2] = pol_unpol_histograms(one(pol), 20);
    EXPECT_EQ(u2.count(u2.bin_of(0.0)), 16u);
    EXPECT_EQ(p2.count(p2.bin_of(0.7)), 16u);
}

TEST(PolUnpol, ConservationOfMeans) {
    const auto img = random_scene(50, 50, 3, 14);
    const auto [p, u] = pol_unpol_histograms(one(img));
    const Histogram s0 = stokes_histogram(one(img), Feature::s0);
    EXPECT_EQ(p.total(), s0.total());
    EXPECT_NEAR(p.mean() + u.mean(), s0.mean(), 1e-9);
}

TEST(Poincare, SinglePointImages) {
    const auto lin = constant_scene(5, 5, 1, {1, 1, 0, 0});
    const DensityGrid g = poincare_density(one(lin), PoincarePlane::s1_s2, 21);
    EXPECT_EQ(g.count(10, 20), 25u);
    EXPECT_EQ(g.normalized(10, 20), 1.0);
    EXPECT_EQ(g.max_count(), 25u);
    const auto un = constant_scene(5, 5, 1, {1, 0, 0, 0});
    const DensityGrid o = poincare_density(one(un), PoincarePlane::s1_s3, 21);
    EXPECT_EQ(o.count(10, 10), 25u);
    EXPECT_NEAR(o.center(10), 0.0, 1e-15);
}

TEST(Poincare, NormalizedMaximumIsOne) {
    const auto img = random_scene(30, 30, 2, 15);
    const DensityGrid g = poincare_density(one(img), PoincarePlane::s1_s3, 31);
    double mx = 0.0;
    for (std::size_t r = 0; r < g.size(); ++r)
        for (std::size_t c = 0; c < g.size(); ++c) mx = std::max(mx, g.normalized(r, c));
    EXPECT_EQ(mx, 1.0);
    EXPECT_EQ(g.total(), 1800u);
}

TEST(Docp, ExtremesAndSupport) {
    const auto circ = constant_scene(3, 3, 1, {1, 0, 0, 1});
    const Histogram hc = docp_distribution(one(circ), 10);
    EXPECT_EQ(hc.count(9), 9u);
    const auto lin = constant_scene(3, 3, 1, {1, 0.3, 0.4, 0});
    const Histogram hl = docp_distribution(one(lin), 10);
    EXPECT_EQ(hl.count(0), 9u);
    const Histogram hr = docp_distribution(one(random_scene(20, 20, 1, 16)));
    EXPECT_EQ(hr.lo(), 0.0);
    EXPECT_EQ(hr.hi(), 1.0);
    EXPECT_EQ(hr.out_of_range(), 0u);
}

TEST(NormalStats, IdenticalChannelsHaveZeroSpread) {
    NormalMapStack s(3, 3, 4);
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 3; ++x) s.set(y, x, c, 0.6, 0.0, 0.8);
    const auto st = normal_spectral_stddev(s);
    for (const Plane* p : {&st.std_x, &st.std_y, &st.std_z, &st.std_azimuth, &st.std_elevation})
        for (double v : p->values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(NormalStats, TwoOrthogonalNormals) {
    NormalMapStack s(1, 1, 2);
    s.set(0, 0, 0, 1, 0, 0);
    s.set(0, 0, 1, 0, 1, 0);
    const auto st = normal_spectral_stddev(s);
    EXPECT_NEAR(st.std_x(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(st.std_y(0, 0), 0.5, 1e-15);
    EXPECT_EQ(st.std_z(0, 0), 0.0);
    EXPECT_NEAR(st.std_azimuth(0, 0), kPi / 4, 1e-15);
}

TEST(NormalStats, AzimuthWrapsAroundPi) {
    NormalMapStack s(1, 1, 2);
    const double a = 179.0 * kPi / 180.0;
    s.set(0, 0, 0, std::cos(-a), std::sin(-a), 0);
    s.set(0, 0, 1, std::cos(a), std::sin(a), 0);
    const auto st = normal_spectral_stddev(s);
    EXPECT_NEAR(st.std_azimuth(0, 0), kPi / 180.0, 1e-12);
}

TEST(NormalStats, CircularStddevOracle) {
    const std::vector<double> ang{-3.1, 3.1, 3.0};
    // Mean direction is pi; deviations wrap to {0.0416, -0.0416, -0.1416}.
    double s = 0.0;
    for (double v : ang) s += std::pow(wrap_pi(v - kPi), 2.0);
    double sx = 0, sy = 0;
    for (double v : ang) {
        sx += std::cos(v);
        sy += std::sin(v);
    }
    const double mean = std::atan2(sy, sx);
    double s2 = 0.0;
    for (double v : ang) s2 += std::pow(wrap_pi(v - mean), 2.0);
    EXPECT_NEAR(circular_stddev(ang), std::sqrt(s2 / 3.0), 1e-15);
    EXPECT_LT(std::abs(std::sqrt(s / 3.0) - circular_stddev(ang)), 0.05);
}

TEST(NormalStats, RejectsSingleChannelAndNonUnitNormals) {
    EXPECT_THROW(normal_spectral_stddev(NormalMapStack(2, 2, 1)), ConfigError);
    NormalMapStack s(1, 1, 2);
    s.set(0, 0, 0, 1, 1, 0);
    EXPECT_THROW(s.validate(), ConfigError);
}
