#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "radfuse/core.hpp"

namespace radfuse {

inline constexpr double kPeripheryBandMm = 2.0;

struct RoiSet {
    Mask background;
    Mask breast;
    Mask periphery;
    Mask dense;
    Mask nondense;
};

inline Mask background_mask(const Image& img) {
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) m.data[i] = img.data[i] == 0.0;
    return m;
}

// Largest 4-connected component of non-zero pixels. Equal-sized components
// resolve to the one reached first in raster order.
inline Mask breast_mask(const Image& img) {
    const int w = img.width, h = img.height;
    std::vector<int> label(img.size(), -1);
    std::vector<std::size_t> stack;
    int best_label = -1;
    std::size_t best_size = 0;
    int next_label = 0;
    for (std::size_t seed = 0; seed < img.size(); ++seed) {
        if (img.data[seed] == 0.0 || label[seed] >= 0) continue;
        const int lab = next_label++;
        std::size_t size = 0;
        label[seed] = lab;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++size;
            const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
            auto visit = [&](int nx, int ny) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
                const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                if (img.data[j] != 0.0 && label[j] < 0) {
                    label[j] = lab;
                    stack.push_back(j);
                }
            };
            visit(x - 1, y);
            visit(x + 1, y);
            visit(x, y - 1);
            visit(x, y + 1);
        }
        if (size > best_size) {
            best_size = size;
            best_label = lab;
        }
    }
    Mask m(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) m.data[i] = label[i] == best_label && best_label >= 0;
    return m;
}

namespace detail {

// Exact 1-D squared distance transform of a sampled function (lower envelope of
// parabolas). f and d have length n.
inline void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == inf) continue;
        if (f[v[k]] == inf) {
            v[k] = q;
            continue;
        }
        double s;
        for (;;) {
            const int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const int p = v[k];
        d[q] = f[p] == inf ? inf : double(q - p) * (q - p) + f[p];
    }
}

}  // namespace detail

// Euclidean distance (mm) from each breast pixel to the nearest non-breast pixel,
// with everything outside the image counting as non-breast. Non-breast pixels are 0.
inline DistanceMap distance_to_background(const Mask& breast, double spacing_mm) {
    if (!(spacing_mm > 0.0)) throw Error("distance_to_background: spacing must be positive");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // one-pixel background frame realizes the border-as-background rule
    const int w = breast.width + 2, h = breast.height + 2;
    std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < breast.height; ++y)
        for (int x = 0; x < breast.width; ++x)
            if (breast(x, y)) grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = inf;

    std::vector<int> v;
    std::vector<double> z;
    std::vector<double> in(std::max(w, h)), out(std::max(w, h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) in[y] = grid[static_cast<std::size_t>(y) * w + x];
        detail::edt_1d(in.data(), out.data(), h, v, z);
        for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = out[y];
    }
    for (int y = 0; y < h; ++y) {
        double* row = grid.data() + static_cast<std::size_t>(y) * w;
        std::copy(row, row + w, in.begin());
        detail::edt_1d(in.data(), row, w, v, z);
    }

    DistanceMap dist(breast.width, breast.height, 0.0);
    for (int y = 0; y < breast.height; ++y)
        for (int x = 0; x < breast.width; ++x)
            if (breast(x, y)) dist(x, y) = std::sqrt(grid[static_cast<std::size_t>(y + 1) * w + (x + 1)]) * spacing_mm;
    return dist;
}

inline Mask periphery_band(const Mask& breast, const DistanceMap& dist, double band_mm = kPeripheryBandMm) {
    if (!breast.same_shape(dist)) throw Error("periphery_band: mask and distance map differ in shape");
    Mask band(breast.width, breast.height);
    // tolerance absorbs k * spacing rounding at the band edge
    const double limit = band_mm + 1e-9;
    for (std::size_t i = 0; i < breast.size(); ++i) band.data[i] = breast.data[i] && dist.data[i] <= limit;
    return band;
}

// Lower median of the interior intensities; ties resolve toward nondense.
inline double interior_median(const Image& img, const Mask& interior) {
    std::vector<double> values;
    values.reserve(interior.count());
    for (std::size_t i = 0; i < interior.size(); ++i)
        if (interior.data[i]) values.push_back(img.data[i]);
    if (values.empty()) throw EmptyInteriorError("no interior tissue: view unusable");
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

struct DenseSplit {
    Mask dense;
    Mask nondense;
};

inline DenseSplit dense_nondense_split(const Image& img, const Mask& interior) {
    if (!img.same_shape(interior)) throw Error("dense_nondense_split: image and mask differ in shape");
    const double m = interior_median(img, interior);
    DenseSplit split{Mask(img.width, img.height), Mask(img.width, img.height)};
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (!interior.data[i]) continue;
        if (img.data[i] > m)
            split.dense.data[i] = 1;
        else
            split.nondense.data[i] = 1;
    }
    return split;
}

inline RoiSet build_roiset(const Image& img, double band_mm = kPeripheryBandMm) {
    RoiSet rois;
    rois.background = background_mask(img);
    rois.breast = breast_mask(img);
    const DistanceMap dist = distance_to_background(rois.breast, img.spacing_mm);
    rois.periphery = periphery_band(rois.breast, dist, band_mm);
    Mask interior(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) interior.data[i] = rois.breast.data[i] && !rois.periphery.data[i];
    auto split = dense_nondense_split(img, interior);
    rois.dense = std::move(split.dense);
    rois.nondense = std::move(split.nondense);
    return rois;
}

// 0 background/other, 1 periphery, 2 nondense, 3 dense, scaled by 85 so the
// classes are distinguishable when viewed.
inline Grid<std::uint8_t> roi_label_map(const RoiSet& rois, bool scale_for_viewing = false) {
    Grid<std::uint8_t> out(rois.breast.width, rois.breast.height, 0);
    const std::uint8_t k = scale_for_viewing ? 85 : 1;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (rois.periphery.data[i]) out.data[i] = 1 * k;
        else if (rois.nondense.data[i]) out.data[i] = static_cast<std::uint8_t>(2 * k);
        else if (rois.dense.data[i]) out.data[i] = static_cast<std::uint8_t>(3 * k);
    }
    return out;
}

}  // namespace radfuse
