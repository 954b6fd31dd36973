#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "radfuse/core.hpp"
#include "radfuse/segmentation.hpp"

namespace radfuse {

inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr int kDefaultGlcmLevels = 32;
inline constexpr int kEntropyBins = 64;

// ---------------------------------------------------------------------------
// First-order statistics

inline const std::array<std::string, 7>& first_order_stat_names() {
    static const std::array<std::string, 7> names = {"mean", "stdev", "skewness", "kurtosis", "entropy", "p10", "p90"};
    return names;
}

struct FirstOrder {
    double mean = 0, stdev = 0, skewness = 0, kurtosis = 0, entropy = 0, p10 = 0, p90 = 0;
    bool imputed = false;  // empty or constant sample

    std::array<double, 7> values() const { return {mean, stdev, skewness, kurtosis, entropy, p10, p90}; }
};

// Linear interpolation between closest ranks on sorted data (numpy "linear").
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

// Population moments; skewness m3/m2^1.5, excess kurtosis m4/m2^2 - 3. Entropy in
// bits over 64 equal-width bins spanning the sample's own range.
inline FirstOrder first_order_from_values(std::vector<double> values) {
    FirstOrder fo;
    if (values.empty()) {
        fo.imputed = true;
        return fo;
    }
    const double n = static_cast<double>(values.size());
    double sum = 0;
    for (double v : values) sum += v;
    fo.mean = sum / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : values) {
        const double d = v - fo.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    fo.stdev = std::sqrt(m2);

    std::sort(values.begin(), values.end());
    fo.p10 = percentile_sorted(values, 0.10);
    fo.p90 = percentile_sorted(values, 0.90);
    const double lo = values.front(), hi = values.back();
    if (!(hi > lo) || m2 <= 0.0) {
        fo.imputed = true;
        return fo;  // skewness, kurtosis, entropy stay 0
    }
    fo.skewness = m3 / std::pow(m2, 1.5);
    fo.kurtosis = m4 / (m2 * m2) - 3.0;

    std::array<std::size_t, kEntropyBins> hist{};
    for (double v : values) {
        const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * kEntropyBins));
        ++hist[std::clamp(b, 0, kEntropyBins - 1)];
    }
    for (auto c : hist) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        fo.entropy -= p * std::log2(p);
    }
    return fo;
}

inline std::vector<double> masked_values(const Grid<double>& img, const Mask& roi) {
    if (!img.same_shape(roi)) throw Error("masked_values: image and mask differ in shape");
    std::vector<double> v;
    v.reserve(roi.count());
    for (std::size_t i = 0; i < img.size(); ++i)
        if (roi.data[i]) v.push_back(img.data[i]);
    return v;
}

inline FirstOrder first_order_features(const Grid<double>& img, const Mask& roi) {
    return first_order_from_values(masked_values(img, roi));
}

// ---------------------------------------------------------------------------
// Morphology

inline const std::array<std::string, 5>& morphology_stat_names() {
    static const std::array<std::string, 5> names = {"area_mm2", "perimeter_mm", "compactness", "elongation", "extent"};
    return names;
}

struct Morphology {
    double area_mm2 = 0, perimeter_mm = 0, compactness = 0, elongation = 0, extent = 0;
    bool imputed = false;

    std::array<double, 5> values() const { return {area_mm2, perimeter_mm, compactness, elongation, extent}; }
};

// Perimeter counts unit pixel edges separating roi from non-roi (the image border
// included). Elongation uses second moments of pixels treated as unit squares,
// so a one-pixel-wide line of length L has elongation L.
inline Morphology morphology_features(const Mask& roi, double spacing_mm) {
    Morphology m;
    const std::size_t count = roi.count();
    if (count == 0) {
        m.imputed = true;
        return m;
    }
    const int w = roi.width, h = roi.height;
    std::size_t edges = 0;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    int min_x = w, max_x = -1, min_y = h, max_y = -1;
    auto in = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && roi(x, y); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!roi(x, y)) continue;
            edges += !in(x - 1, y) + !in(x + 1, y) + !in(x, y - 1) + !in(x, y + 1);
            sx += x;
            sy += y;
            sxx += double(x) * x;
            syy += double(y) * y;
            sxy += double(x) * y;
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
        }
    const double n = static_cast<double>(count);
    m.area_mm2 = n * spacing_mm * spacing_mm;
    m.perimeter_mm = static_cast<double>(edges) * spacing_mm;
    m.compactness = 4.0 * std::numbers::pi * m.area_mm2 / (m.perimeter_mm * m.perimeter_mm);

    const double mx = sx / n, my = sy / n;
    const double cxx = sxx / n - mx * mx + 1.0 / 12.0;
    const double cyy = syy / n - my * my + 1.0 / 12.0;
    const double cxy = sxy / n - mx * my;
    const double tr = cxx + cyy;
    const double disc = std::sqrt(std::max(0.0, (cxx - cyy) * (cxx - cyy) / 4.0 + cxy * cxy));
    const double l1 = tr / 2.0 + disc;
    const double l2 = std::max(tr / 2.0 - disc, 1e-12);
    m.elongation = std::sqrt(l1 / l2);

    const double bbox = double(max_x - min_x + 1) * double(max_y - min_y + 1);
    m.extent = n / bbox;
    return m;
}

// ---------------------------------------------------------------------------
// Gray-level co-occurrence

struct GlcmMatrix {
    int levels = 0;
    std::vector<double> p;  // levels x levels, row-major
    std::size_t pair_count = 0;

    double operator()(int i, int j) const { return p[static_cast<std::size_t>(i) * levels + j]; }
};

// Offsets for 0, 45, 90 and 135 degrees at distance one (y grows downward).
inline constexpr std::array<std::pair<int, int>, 4> kGlcmOffsets = {{{1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

// Equal-width quantization of roi pixels over the roi's own range. Pixels outside
// the roi are -1.
inline Grid<int> quantize_roi(const Grid<double>& img, const Mask& roi, int levels) {
    Grid<int> q(img.width, img.height, -1);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < img.size(); ++i)
        if (roi.data[i]) {
            lo = std::min(lo, img.data[i]);
            hi = std::max(hi, img.data[i]);
        }
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!roi.data[i]) continue;
        if (!(hi > lo)) {
            q.data[i] = 0;
            continue;
        }
        const int b = static_cast<int>(std::floor((img.data[i] - lo) / (hi - lo) * levels));
        q.data[i] = std::clamp(b, 0, levels - 1);
    }
    return q;
}

// Symmetric GLCM pooled over the four offsets. pair_count == 0 means no two roi
// pixels are adjacent and the matrix is all zeros.
inline GlcmMatrix glcm(const Grid<double>& img, const Mask& roi, int levels = kDefaultGlcmLevels) {
    if (levels < 2) throw Error("glcm: levels must be >= 2");
    if (!img.same_shape(roi)) throw Error("glcm: image and mask differ in shape");
    const Grid<int> q = quantize_roi(img, roi, levels);
    std::vector<std::size_t> counts(static_cast<std::size_t>(levels) * levels, 0);
    std::size_t pairs = 0;
    for (int y = 0; y < q.height; ++y)
        for (int x = 0; x < q.width; ++x) {
            const int a = q(x, y);
            if (a < 0) continue;
            for (auto [dx, dy] : kGlcmOffsets) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= q.width || ny >= q.height) continue;
                const int b = q(nx, ny);
                if (b < 0) continue;
                ++counts[static_cast<std::size_t>(a) * levels + b];
                ++counts[static_cast<std::size_t>(b) * levels + a];
                pairs += 2;
            }
        }
    GlcmMatrix g{levels, std::vector<double>(counts.size(), 0.0), pairs};
    if (pairs == 0) return g;
    for (std::size_t i = 0; i < counts.size(); ++i) g.p[i] = static_cast<double>(counts[i]) / static_cast<double>(pairs);
    return g;
}

inline const std::array<std::string, 5>& glcm_stat_names() {
    static const std::array<std::string, 5> names = {"contrast", "correlation", "energy", "homogeneity", "entropy"};
    return names;
}

struct GlcmFeatures {
    double contrast = 0, correlation = 0, energy = 0, homogeneity = 0, entropy = 0;

    std::array<double, 5> values() const { return {contrast, correlation, energy, homogeneity, entropy}; }
};

inline GlcmFeatures glcm_features(const GlcmMatrix& g) {
    GlcmFeatures f;
    const int L = g.levels;
    // marginals of a symmetric matrix coincide, so one mean and variance suffice
    double mu = 0;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) mu += i * g(i, j);
    double var = 0;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) var += (i - mu) * (i - mu) * g(i, j);
    double cov = 0;
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
            const double p = g(i, j);
            if (p == 0.0) continue;
            const double d = i - j;
            f.contrast += p * d * d;
            cov += p * (i - mu) * (j - mu);
            f.energy += p * p;
            f.homogeneity += p / (1.0 + std::abs(d));
            f.entropy -= p * std::log2(p);
        }
    f.correlation = var > 1e-15 ? cov / var : 0.0;
    return f;
}

// ---------------------------------------------------------------------------
// Single-level orthonormal Haar transform

struct WaveletSubbands {
    Grid<double> approx;  // low-pass along both axes
    Grid<double> horiz;   // high-pass along x: responds to vertical edges
    Grid<double> vert;    // high-pass along y: responds to horizontal edges
    Grid<double> diag;
};

// Odd dimensions are extended by one half-sample symmetric sample (the last row
// or column repeated), so each subband is ceil(h/2) x ceil(w/2).
inline WaveletSubbands wavelet_decompose(const Grid<double>& img) {
    const int cw = (img.width + 1) / 2, ch = (img.height + 1) / 2;
    WaveletSubbands s{Grid<double>(cw, ch), Grid<double>(cw, ch), Grid<double>(cw, ch), Grid<double>(cw, ch)};
    auto at = [&](int x, int y) { return img(std::min(x, img.width - 1), std::min(y, img.height - 1)); };
    for (int cy = 0; cy < ch; ++cy)
        for (int cx = 0; cx < cw; ++cx) {
            const double a = at(2 * cx, 2 * cy), b = at(2 * cx + 1, 2 * cy);
            const double c = at(2 * cx, 2 * cy + 1), d = at(2 * cx + 1, 2 * cy + 1);
            s.approx(cx, cy) = (a + b + c + d) * 0.5;
            s.horiz(cx, cy) = (a - b + c - d) * 0.5;
            s.vert(cx, cy) = (a + b - c - d) * 0.5;
            s.diag(cx, cy) = (a - b - c + d) * 0.5;
        }
    return s;
}

// A coarse pixel belongs to the roi if any of its 2x2 fine pixels does.
inline Mask downsample_roi(const Mask& roi) {
    const int cw = (roi.width + 1) / 2, ch = (roi.height + 1) / 2;
    Mask out(cw, ch);
    for (int y = 0; y < roi.height; ++y)
        for (int x = 0; x < roi.width; ++x)
            if (roi(x, y)) out(x / 2, y / 2) = 1;
    return out;
}

inline const std::array<std::string, 4>& wavelet_band_names() {
    static const std::array<std::string, 4> names = {"wavA", "wavH", "wavV", "wavD"};
    return names;
}

inline std::array<FirstOrder, 4> wavelet_features(const WaveletSubbands& sub, const Mask& roi) {
    const Mask coarse = downsample_roi(roi);
    if (!sub.approx.same_shape(coarse)) throw Error("wavelet_features: roi does not match the decomposed image");
    return {first_order_features(sub.approx, coarse), first_order_features(sub.horiz, coarse),
            first_order_features(sub.vert, coarse), first_order_features(sub.diag, coarse)};
}

// ---------------------------------------------------------------------------
// Feature vector assembly

inline constexpr std::array<const char*, 2> kRoiNames = {"dense", "nondense"};

inline const std::vector<std::string>& feature_schema() {
    static const std::vector<std::string> schema = [] {
        std::vector<std::string> names;
        for (const char* roi : kRoiNames) {
            const std::string r(roi);
            for (const auto& s : morphology_stat_names()) names.push_back(r + "_orig_morph_" + s);
            for (const auto& s : first_order_stat_names()) names.push_back(r + "_orig_fo_" + s);
            for (const auto& s : glcm_stat_names()) names.push_back(r + "_orig_glcm_" + s);
            for (const auto& band : wavelet_band_names())
                for (const auto& s : first_order_stat_names()) names.push_back(r + "_" + band + "_fo_" + s);
        }
        names.push_back("meta_age");
        names.push_back("meta_view_cc");
        return names;
    }();
    return schema;
}

inline std::size_t feature_count() { return feature_schema().size(); }

struct FeatureVector {
    std::vector<double> values;       // aligned with feature_schema()
    std::vector<std::string> imputed; // which blocks fell back to zeros

    const std::vector<std::string>& names() const { return feature_schema(); }
};

struct FeatureOptions {
    int glcm_levels = kDefaultGlcmLevels;
};

inline FeatureVector extract_view_features(const Image& img, const RoiSet& rois, const ViewMeta& meta,
                                           const FeatureOptions& opts = {}) {
    FeatureVector fv;
    fv.values.reserve(feature_count());
    const WaveletSubbands sub = wavelet_decompose(img);
    for (const char* roi_name : kRoiNames) {
        const std::string r(roi_name);
        const Mask& roi = r == "dense" ? rois.dense : rois.nondense;

        const Morphology morph = morphology_features(roi, img.spacing_mm);
        if (morph.imputed) fv.imputed.push_back(r + "_orig_morph");
        for (double v : morph.values()) fv.values.push_back(v);

        const FirstOrder fo = first_order_features(img, roi);
        if (fo.imputed) fv.imputed.push_back(r + "_orig_fo");
        for (double v : fo.values()) fv.values.push_back(v);

        GlcmFeatures gf;
        if (roi.any()) {
            const GlcmMatrix g = glcm(img, roi, opts.glcm_levels);
            if (g.pair_count > 0) gf = glcm_features(g);
            else fv.imputed.push_back(r + "_orig_glcm");
        } else {
            fv.imputed.push_back(r + "_orig_glcm");
        }
        for (double v : gf.values()) fv.values.push_back(v);

        const auto bands = wavelet_features(sub, roi);
        for (std::size_t b = 0; b < bands.size(); ++b) {
            if (bands[b].imputed) fv.imputed.push_back(r + "_" + wavelet_band_names()[b] + "_fo");
            for (double v : bands[b].values()) fv.values.push_back(v);
        }
    }
    fv.values.push_back(meta.age_years);
    fv.values.push_back(meta.view_kind == ViewKind::CC ? 1.0 : 0.0);
    for (double& v : fv.values)
        if (!std::isfinite(v)) v = 0.0;
    return fv;
}

}  // namespace radfuse
