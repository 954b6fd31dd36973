#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "radfuse/core.hpp"

namespace radfuse {

inline constexpr int kDefaultBinCount = 1024;
inline constexpr double kTargetSpacingMm = 0.1;

// Cumulative intensity distribution over equal-width bins on [0,1].
struct ReferenceCdf {
    std::vector<double> cdf;

    int bin_count() const { return static_cast<int>(cdf.size()); }
    double bin_center(int i) const { return (i + 0.5) / bin_count(); }
    double bin_width() const { return 1.0 / bin_count(); }
};

inline int intensity_bin(double v, int bins) {
    const int b = static_cast<int>(std::floor(v * bins));
    return std::clamp(b, 0, bins - 1);
}

// Min-max scaling onto [0,1]. A constant image has no contrast to stretch: it
// maps to all zeros and the event is recorded in `log`.
inline Image normalize_intensities(const Image& img, RunLog* log = nullptr) {
    if (img.empty()) throw Error("normalize_intensities: empty image");
    const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
    const double lo = *lo_it, hi = *hi_it;
    Image out(img.width, img.height, img.spacing_mm, 0.0);
    if (!(hi > lo)) {
        if (log) log->add("degenerate: constant image normalized to zeros");
        return out;
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = std::clamp((img.data[i] - lo) / range, 0.0, 1.0);
    return out;
}

// Bilinear resampling to an isotropic target spacing. Sample positions align the
// first and last pixel centers of input and output; reads beyond the edge clamp.
inline Image resample_to_spacing(const Image& img, double target_spacing_mm) {
    if (!(target_spacing_mm > 0.0)) throw Error("resample_to_spacing: target spacing must be positive");
    if (!(img.spacing_mm > 0.0)) throw Error("resample_to_spacing: input spacing must be positive");
    if (img.spacing_mm == target_spacing_mm) return img;

    const double factor = img.spacing_mm / target_spacing_mm;
    const int out_w = std::max(1, static_cast<int>(std::lround(img.width * factor)));
    const int out_h = std::max(1, static_cast<int>(std::lround(img.height * factor)));
    Image out(out_w, out_h, target_spacing_mm);

    auto source_coord = [](int i, int out_n, int in_n) {
        if (out_n == 1) return (in_n - 1) / 2.0;
        return i * static_cast<double>(in_n - 1) / (out_n - 1);
    };

    for (int y = 0; y < out_h; ++y) {
        const double sy = source_coord(y, out_h, img.height);
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double fy = std::clamp(sy - y0, 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double sx = source_coord(x, out_w, img.width);
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double fx = std::clamp(sx - x0, 0.0, 1.0);
            const double top = img(x0, y0) * (1.0 - fx) + img(x1, y0) * fx;
            const double bottom = img(x0, y1) * (1.0 - fx) + img(x1, y1) * fx;
            out(x, y) = std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 1.0);
        }
    }
    return out;
}

inline Image mirror_if_left(const Image& img, const ViewMeta& meta) {
    if (meta.laterality != Laterality::Left) return img;
    Image out = img;
    for (int y = 0; y < img.height; ++y) {
        auto row = out.data.begin() + static_cast<std::ptrdiff_t>(y) * img.width;
        std::reverse(row, row + img.width);
    }
    return out;
}

namespace detail {

// Non-background (strictly positive) pixel counts per bin.
inline void accumulate_histogram(const Image& img, std::vector<std::size_t>& counts) {
    const int bins = static_cast<int>(counts.size());
    for (double v : img.data)
        if (v > 0.0) ++counts[intensity_bin(v, bins)];
}

inline std::vector<double> cumulative(const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    std::vector<double> cdf(counts.size(), 0.0);
    if (total == 0) return cdf;
    std::size_t running = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        running += counts[i];
        cdf[i] = static_cast<double>(running) / static_cast<double>(total);
    }
    return cdf;
}

}  // namespace detail

inline ReferenceCdf estimate_reference_cdf(const std::vector<Image>& images, int bin_count = kDefaultBinCount) {
    if (images.empty()) throw Error("estimate_reference_cdf: no images");
    if (bin_count < 2) throw Error("estimate_reference_cdf: bin_count must be >= 2");
    std::vector<std::size_t> counts(bin_count, 0);
    for (const auto& img : images) detail::accumulate_histogram(img, counts);
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw Error("estimate_reference_cdf: every pixel is background");
    return ReferenceCdf{detail::cumulative(counts)};
}

// Maps each tissue pixel to the first reference bin whose cumulative mass reaches
// the pixel's own cumulative mass. Exact zeros are background and pass through.
inline Image histogram_match(const Image& img, const ReferenceCdf& ref) {
    const int bins = ref.bin_count();
    if (bins < 2) throw Error("histogram_match: reference needs at least 2 bins");
    std::vector<std::size_t> counts(bins, 0);
    detail::accumulate_histogram(img, counts);
    const std::vector<double> source = detail::cumulative(counts);

    std::vector<double> lut(bins, 0.0);
    for (int b = 0, c = 0; b < bins; ++b) {
        // source is non-decreasing, so the search pointer only moves forward
        while (c < bins - 1 && ref.cdf[c] < source[b]) ++c;
        lut[b] = ref.bin_center(c);
    }

    Image out(img.width, img.height, img.spacing_mm, 0.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = img.data[i];
        out.data[i] = v > 0.0 ? lut[intensity_bin(v, bins)] : 0.0;
    }
    return out;
}

inline Image preprocess_view(const Image& raw, const ViewMeta& meta, const ReferenceCdf& ref, RunLog* log = nullptr,
                             double target_spacing_mm = kTargetSpacingMm) {
    Image img = normalize_intensities(raw, log);
    img = resample_to_spacing(img, target_spacing_mm);
    img = mirror_if_left(img, meta);
    return histogram_match(img, ref);
}

// Normalize, resample and mirror only; the reference CDF is estimated from these.
inline Image prepare_for_reference(const Image& raw, const ViewMeta& meta, RunLog* log = nullptr,
                                   double target_spacing_mm = kTargetSpacingMm) {
    return mirror_if_left(resample_to_spacing(normalize_intensities(raw, log), target_spacing_mm), meta);
}

inline void write_reference_cdf(const ReferenceCdf& ref, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write reference CDF to " + path);
    out << "bin_index,bin_center,cdf\n";
    char buf[96];
    for (int i = 0; i < ref.bin_count(); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", i, ref.bin_center(i), ref.cdf[i]);
        out << buf;
    }
    if (!out) throw Error("failed writing reference CDF to " + path);
}

inline ReferenceCdf read_reference_cdf(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open reference CDF " + path);
    std::string line;
    if (!std::getline(in, line) || line != "bin_index,bin_center,cdf")
        throw Error("reference CDF " + path + ": bad header");
    ReferenceCdf ref;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string idx, center, value;
        if (!std::getline(ss, idx, ',') || !std::getline(ss, center, ',') || !std::getline(ss, value))
            throw Error("reference CDF " + path + ": malformed line " + std::to_string(line_no));
        if (std::stoi(idx) != ref.bin_count())
            throw Error("reference CDF " + path + ": bin indices out of order at line " + std::to_string(line_no));
        ref.cdf.push_back(std::stod(value));
    }
    if (ref.bin_count() < 2) throw Error("reference CDF " + path + ": fewer than 2 bins");
    for (int i = 1; i < ref.bin_count(); ++i)
        if (ref.cdf[i] < ref.cdf[i - 1]) throw Error("reference CDF " + path + ": not monotone");
    if (std::abs(ref.cdf.back() - 1.0) > 1e-12) throw Error("reference CDF " + path + ": final value is not 1");
    return ref;
}

}  // namespace radfuse
