#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <numbers>
#include <random>
#include <set>

#include "oracles.hpp"
#include "radfuse/features.hpp"
#include "radfuse/imaging.hpp"
#include "radfuse/phantoms.hpp"
#include "radfuse/segmentation.hpp"

using namespace radfuse;

namespace {

Grid<double> random_grid(int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Grid<double> g(w, h);
    for (auto& v : g.data) v = u(rng);
    return g;
}

double energy(const Grid<double>& g) {
    double e = 0;
    for (double v : g.data) e += v * v;
    return e;
}

}  // namespace

TEST(FirstOrder, SymmetricSampleHasZeroSkew) {
    const FirstOrder fo = first_order_from_values({0.2, 0.4, 0.6, 0.8, 0.8, 0.6, 0.4, 0.2});
    EXPECT_NEAR(fo.skewness, 0.0, 1e-12);
    EXPECT_NEAR(fo.mean, 0.5, 1e-15);
    EXPECT_FALSE(fo.imputed);
}

TEST(FirstOrder, ConstantSampleIsImputed) {
    const FirstOrder fo = first_order_from_values({0.3, 0.3, 0.3});
    EXPECT_EQ(fo.stdev, 0.0);
    EXPECT_EQ(fo.entropy, 0.0);
    EXPECT_EQ(fo.skewness, 0.0);
    EXPECT_EQ(fo.kurtosis, 0.0);
    EXPECT_TRUE(fo.imputed);
    EXPECT_TRUE(first_order_from_values({}).imputed);
}

TEST(FirstOrder, TwoEqualMassesIsOneBit) {
    EXPECT_DOUBLE_EQ(first_order_from_values({0.0, 1.0, 0.0, 1.0}).entropy, 1.0);
}

TEST(FirstOrder, MomentsMatchDirectFormulas) {
    std::mt19937_64 rng(21);
    std::gamma_distribution<double> gamma(2.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(3 + trial * 7);
        for (auto& x : v) x = gamma(rng);
        const auto m = oracle::moments(v);
        const FirstOrder fo = first_order_from_values(v);
        EXPECT_NEAR(fo.mean, m.mean, 1e-12);
        EXPECT_NEAR(fo.stdev, std::sqrt(m.var), 1e-12);
        EXPECT_NEAR(fo.skewness, m.skew, 1e-10);
        EXPECT_NEAR(fo.kurtosis, m.exkurt, 1e-10);
    }
}

TEST(FirstOrder, PercentilesByLinearInterpolation) {
    const FirstOrder fo = first_order_from_values({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    EXPECT_DOUBLE_EQ(fo.p10, 2.0);
    EXPECT_DOUBLE_EQ(fo.p90, 10.0);
    EXPECT_DOUBLE_EQ(percentile_sorted({0.0, 1.0}, 0.25), 0.25);
}

TEST(FirstOrder, MaskingIgnoresOutsidePixels) {
    std::mt19937_64 rng(22);
    Grid<double> img = random_grid(10, 10, rng);
    Mask roi(10, 10);
    for (int y = 2; y < 7; ++y)
        for (int x = 3; x < 9; ++x) roi(x, y) = 1;
    const auto a = first_order_features(img, roi).values();
    for (std::size_t i = 0; i < img.size(); ++i)
        if (!roi.data[i]) img.data[i] = 100.0 + static_cast<double>(i);
    EXPECT_EQ(first_order_features(img, roi).values(), a);
}

TEST(Morphology, SquareAtTenthMillimeter) {
    Mask roi(20, 20);
    for (int y = 5; y < 15; ++y)
        for (int x = 5; x < 15; ++x) roi(x, y) = 1;
    const Morphology m = morphology_features(roi, 0.1);
    EXPECT_NEAR(m.area_mm2, 1.0, 1e-12);
    EXPECT_NEAR(m.perimeter_mm, 4.0, 1e-12);
    EXPECT_DOUBLE_EQ(m.extent, 1.0);
    EXPECT_NEAR(m.compactness, 4 * std::numbers::pi / 16.0, 1e-12);
    EXPECT_NEAR(m.elongation, 1.0, 1e-12);
}

TEST(Morphology, LineElongationMatchesCovarianceOracle) {
    Mask roi(30, 3);
    for (int x = 5; x < 25; ++x) roi(x, 1) = 1;
    const Morphology m = morphology_features(roi, 0.1);
    EXPECT_DOUBLE_EQ(m.extent, 1.0);
    // oracle: each pixel is a unit square sampled on a fine sub-grid; covariance
    // eigenvalues of all sample points
    std::vector<Eigen::Vector2d> pts;
    const int sub = 40;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 30; ++x)
            if (roi(x, y))
                for (int j = 0; j < sub; ++j)
                    for (int i = 0; i < sub; ++i) pts.emplace_back(x + (i + 0.5) / sub, y + (j + 0.5) / sub);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(pts.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const double expect = std::sqrt(es.eigenvalues()(1) / es.eigenvalues()(0));
    EXPECT_NEAR(m.elongation, expect, 1e-2 * expect);
    EXPECT_NEAR(m.elongation, 20.0, 0.05);
}

TEST(Morphology, EmptyRoiIsImputedZeros) {
    const Morphology m = morphology_features(Mask(5, 5), 0.1);
    EXPECT_TRUE(m.imputed);
    for (double v : m.values()) EXPECT_EQ(v, 0.0);
}

TEST(Glcm, TwoByTwoMatchesPairEnumeration) {
    const Grid<double> img = Image::from_rows({{0, 0}, {1, 1}});
    const Mask roi(2, 2, true);
    const GlcmMatrix g = glcm(img, roi, 2);
    const auto counts = oracle::brute_glcm_counts(quantize_roi(img, roi, 2), 2);
    const double total = static_cast<double>(counts[0] + counts[1] + counts[2] + counts[3]);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(g.p[i], counts[i] / total);
    // the enumeration gives 1/6 on the diagonal and 1/3 off it
    EXPECT_DOUBLE_EQ(g(0, 0), 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(g(1, 1), 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(g(0, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(g(1, 0), 1.0 / 3.0);
    EXPECT_NEAR(glcm_features(g).contrast, 2.0 / 3.0, 1e-15);
}

TEST(Glcm, ConstantRoiPutsAllMassAtOrigin) {
    const GlcmMatrix g = glcm(Grid<double>(5, 5, 0.4), Mask(5, 5, true), 8);
    EXPECT_EQ(g(0, 0), 1.0);
    const GlcmFeatures f = glcm_features(g);
    EXPECT_EQ(f.contrast, 0.0);
    EXPECT_EQ(f.energy, 1.0);
    EXPECT_EQ(f.homogeneity, 1.0);
    EXPECT_EQ(f.entropy, 0.0);
    EXPECT_EQ(f.correlation, 0.0);
}

TEST(Glcm, UniformTwoLevelFeatures) {
    GlcmMatrix g{2, {0.25, 0.25, 0.25, 0.25}, 4};
    const GlcmFeatures f = glcm_features(g);
    EXPECT_DOUBLE_EQ(f.energy, 0.25);
    EXPECT_DOUBLE_EQ(f.entropy, 2.0);
}

TEST(Glcm, RandomImagesSymmetricNormalizedAndMatchOracle) {
    std::mt19937_64 rng(23);
    std::bernoulli_distribution keep(0.8);
    for (int trial = 0; trial < 50; ++trial) {
        const int w = 2 + trial % 15, h = 2 + (trial * 7) % 15, levels = 2 + trial % 15;
        const Grid<double> img = random_grid(w, h, rng);
        Mask roi(w, h);
        for (auto& v : roi.data) v = keep(rng);
        if (!roi.any()) continue;
        const GlcmMatrix g = glcm(img, roi, levels);
        const auto counts = oracle::brute_glcm_counts(quantize_roi(img, roi, levels), levels);
        std::size_t total = 0;
        for (auto c : counts) total += c;
        ASSERT_EQ(g.pair_count, total);
        if (total == 0) continue;
        double sum = 0;
        for (int i = 0; i < levels; ++i)
            for (int j = 0; j < levels; ++j) {
                EXPECT_EQ(g(i, j), g(j, i));
                EXPECT_EQ(g(i, j), static_cast<double>(counts[i * levels + j]) / static_cast<double>(total));
                sum += g(i, j);
            }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Glcm, ScatteredPixelsHaveNoPairs) {
    Mask roi(5, 5);
    roi(0, 0) = roi(2, 2) = roi(4, 4) = 0;
    roi(0, 0) = 1;
    roi(2, 0) = 1;
    roi(4, 0) = 1;
    EXPECT_EQ(glcm(Grid<double>(5, 5, 0.5), roi, 4).pair_count, 0u);
    EXPECT_THROW(glcm(Grid<double>(5, 5, 0.5), roi, 1), Error);
}

TEST(Wavelet, ConstantImage) {
    const WaveletSubbands s = wavelet_decompose(Grid<double>(6, 4, 0.3));
    for (double v : s.approx.data) EXPECT_NEAR(v, 0.6, 1e-15);
    for (const auto* g : {&s.horiz, &s.vert, &s.diag})
        for (double v : g->data) EXPECT_EQ(v, 0.0);
}

TEST(Wavelet, VerticalStepEdge) {
    // columns 0 and 1 differ, so the edge sits inside each 2x2 block along x
    const Grid<double> img = Image::from_rows({{0, 1, 1, 1}, {0, 1, 1, 1}, {0, 1, 1, 1}, {0, 1, 1, 1}});
    const WaveletSubbands s = wavelet_decompose(img);
    // direct filter-bank oracle: rows low/high then columns low/high
    const double r = 1.0 / std::sqrt(2.0);
    for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx) {
            double lo[2], hi[2];
            for (int k = 0; k < 2; ++k) {
                lo[k] = r * (img(2 * cx, 2 * cy + k) + img(2 * cx + 1, 2 * cy + k));
                hi[k] = r * (img(2 * cx, 2 * cy + k) - img(2 * cx + 1, 2 * cy + k));
            }
            EXPECT_NEAR(s.approx(cx, cy), r * (lo[0] + lo[1]), 1e-15);
            EXPECT_NEAR(s.horiz(cx, cy), r * (hi[0] + hi[1]), 1e-15);
            EXPECT_NEAR(s.vert(cx, cy), r * (lo[0] - lo[1]), 1e-15);
            EXPECT_NEAR(s.diag(cx, cy), r * (hi[0] - hi[1]), 1e-15);
        }
    EXPECT_GT(energy(s.horiz), 0.0);
    EXPECT_EQ(energy(s.vert), 0.0);
    EXPECT_EQ(energy(s.diag), 0.0);
}

TEST(Wavelet, EnergyPreservedAndInvertible) {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 2 * (1 + trial % 8), h = 2 * (1 + (trial * 3) % 8);
        const Grid<double> img = random_grid(w, h, rng);
        const WaveletSubbands s = wavelet_decompose(img);
        const double e = energy(s.approx) + energy(s.horiz) + energy(s.vert) + energy(s.diag);
        EXPECT_NEAR(e, energy(img), 1e-9 * energy(img));
        const Grid<double> back = oracle::inverse_haar(s.approx, s.horiz, s.vert, s.diag);
        for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
    }
}

TEST(Wavelet, OddDimensionsUseExtendedImage) {
    std::mt19937_64 rng(25);
    const Grid<double> img = random_grid(7, 5, rng);
    const WaveletSubbands s = wavelet_decompose(img);
    EXPECT_EQ(s.approx.width, 4);
    EXPECT_EQ(s.approx.height, 3);
    Grid<double> ext(8, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) ext(x, y) = img(std::min(x, 6), std::min(y, 4));
    const double e = energy(s.approx) + energy(s.horiz) + energy(s.vert) + energy(s.diag);
    EXPECT_NEAR(e, energy(ext), 1e-12 * energy(ext));
    const Grid<double> back = oracle::inverse_haar(s.approx, s.horiz, s.vert, s.diag);
    for (std::size_t i = 0; i < ext.size(); ++i) EXPECT_NEAR(back.data[i], ext.data[i], 1e-12);
}

TEST(Wavelet, FeaturesOnFullRoiAndSinglePixel) {
    std::mt19937_64 rng(26);
    const Grid<double> img = random_grid(8, 8, rng);
    const auto bands = wavelet_features(wavelet_decompose(img), Mask(8, 8, true));
    double mean = 0;
    for (double v : img.data) mean += v;
    mean /= 64.0;
    EXPECT_NEAR(bands[0].mean, 2.0 * mean, 1e-9);

    Mask one(8, 8);
    one(5, 3) = 1;
    const Mask coarse = downsample_roi(one);
    EXPECT_EQ(coarse.count(), 1u);
    EXPECT_TRUE(coarse(2, 1));

    const auto flat = wavelet_features(wavelet_decompose(Grid<double>(8, 8, 0.5)), Mask(8, 8, true));
    for (int b = 1; b < 4; ++b) {
        EXPECT_TRUE(flat[b].imputed);
        for (double v : flat[b].values()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Schema, NinetyTwoUniqueNamesInGrammar) {
    const auto& names = feature_schema();
    ASSERT_EQ(names.size(), 92u);
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), 92u);
    EXPECT_EQ(names.front(), "dense_orig_morph_area_mm2");
    EXPECT_EQ(names[90], "meta_age");
    EXPECT_EQ(names[91], "meta_view_cc");
    for (std::size_t i = 0; i < 90; ++i) {
        const auto& n = names[i];
        EXPECT_TRUE(n.rfind("dense_", 0) == 0 || n.rfind("nondense_", 0) == 0) << n;
        EXPECT_TRUE(n.find("_orig_") != std::string::npos || n.find("_wavA_") != std::string::npos ||
                    n.find("_wavH_") != std::string::npos || n.find("_wavV_") != std::string::npos ||
                    n.find("_wavD_") != std::string::npos)
            << n;
        EXPECT_TRUE(n.find("_morph_") != std::string::npos || n.find("_fo_") != std::string::npos ||
                    n.find("_glcm_") != std::string::npos)
            << n;
    }
}

namespace {

Image phantom_view(bool lesion, std::uint64_t seed) {
    PhantomSpec spec;
    spec.count = 1;
    spec.positive_fraction = lesion ? 1.0 : 0.0;
    spec.seed = seed;
    const auto corpus = generate_phantom_corpus(spec);
    for (const auto& v : corpus.views)
        if (v.has_lesion == lesion) {
            Image img(v.pixels.width, v.pixels.height, v.record.pixel_spacing_mm);
            for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = v.pixels.data[i];
            return mirror_if_left(resample_to_spacing(normalize_intensities(img), 0.1), v.record.meta());
        }
    throw Error("no matching view");
}

}  // namespace

TEST(Extract, DeterministicAndFinite) {
    const Image img = phantom_view(false, 3);
    const RoiSet rois = build_roiset(img);
    const ViewMeta meta{Laterality::Right, ViewKind::CC, 51.5, 2018};
    const FeatureVector a = extract_view_features(img, rois, meta), b = extract_view_features(img, rois, meta);
    ASSERT_EQ(a.values.size(), 92u);
    EXPECT_EQ(a.values, b.values);
    for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(a.values[90], 51.5);
    EXPECT_EQ(a.values[91], 1.0);
}

TEST(Extract, LesionRaisesDenseMean) {
    // same patient stream with and without the lesion: the generator draws the
    // tissue identically, so only the lesion differs
    PhantomSpec spec;
    spec.count = 1;
    spec.positive_fraction = 1.0;
    spec.seed = 9;
    PhantomSpec clean = spec;
    clean.lesion_contrast = 0.0;
    const auto with = generate_phantom_corpus(spec), without = generate_phantom_corpus(clean);
    int compared = 0;
    for (std::size_t v = 0; v < with.views.size(); ++v) {
        if (!with.views[v].has_lesion) continue;
        auto to_image = [](const PhantomView& pv) {
            Image img(pv.pixels.width, pv.pixels.height, pv.record.pixel_spacing_mm);
            for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = pv.pixels.data[i];
            return img;
        };
        // raw intensities, normalized by the clean view's range so both share a scale
        Image a = to_image(with.views[v]), b = to_image(without.views[v]);
        const double top = *std::max_element(a.data.begin(), a.data.end());
        for (auto& x : a.data) x /= top;
        for (auto& x : b.data) x /= top;
        const RoiSet ra = build_roiset(a), rb = build_roiset(b);
        const double mean_a = first_order_features(a, ra.dense).mean, mean_b = first_order_features(b, rb.dense).mean;
        EXPECT_GT(mean_a, mean_b);
        ++compared;
    }
    EXPECT_GE(compared, 1);
}
