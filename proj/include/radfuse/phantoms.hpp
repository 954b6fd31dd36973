#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "radfuse/core.hpp"
#include "radfuse/csv.hpp"
#include "radfuse/image_io.hpp"
#include "radfuse/manifest.hpp"

namespace radfuse {

// Synthetic screening corpus. Each patient gets four views of a half-ellipse
// breast against the chest wall; positives carry a bright lesion in one breast.
struct PhantomSpec {
    int count = 600;
    double positive_fraction = 0.1;
    std::vector<int> years = {2017, 2018, 2019};
    double lesion_contrast = 0.35;  // peak intensity added by a lesion, on the [0,1] tissue scale
    double lesion_radius_mm = 3.0;
    double texture_sigma = 0.06;    // std of the smoothed tissue texture
    int image_size = 100;           // pixels per side of the stored image
    double spacing_mm = 0.2;
    double dl_mu_negative = 0.0;    // DL logit mean for views without a lesion
    double dl_mu_positive = 1.6;    // ... and for views with one
    std::uint64_t seed = 7;

    void validate() const {
        if (count < 1) throw Error("phantoms: count must be >= 1");
        if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) throw Error("phantoms: positive_fraction must be in [0,1]");
        if (years.empty()) throw Error("phantoms: at least one year is required");
        if (image_size < 16) throw Error("phantoms: image_size must be >= 16");
        if (!(spacing_mm > 0)) throw Error("phantoms: spacing_mm must be positive");
        if (!(lesion_contrast >= 0)) throw Error("phantoms: lesion_contrast must be non-negative");
        if (!(texture_sigma >= 0)) throw Error("phantoms: texture_sigma must be non-negative");
    }
};

struct PhantomView {
    ExamRecord record;
    Grid<std::uint16_t> pixels;
    bool has_lesion = false;
    double dl_score = 0.0;
};

struct PhantomCorpus {
    std::vector<PhantomView> views;  // canonical order
};

inline constexpr int kPhantomMaxval = 4095;

namespace detail {

// Three box passes per axis approximate a Gaussian of the given radius.
inline void box_blur(Grid<double>& g, int radius) {
    if (radius < 1) return;
    std::vector<double> line;
    auto pass = [&](int n, auto&& at) {
        line.assign(static_cast<std::size_t>(n), 0.0);
        for (int rep = 0; rep < 3; ++rep) {
            for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = at(i);
            double sum = 0;
            for (int k = -radius; k <= radius; ++k) sum += line[static_cast<std::size_t>(std::clamp(k, 0, n - 1))];
            for (int i = 0; i < n; ++i) {
                at(i) = sum / (2 * radius + 1);
                sum += line[static_cast<std::size_t>(std::clamp(i + radius + 1, 0, n - 1))];
                sum -= line[static_cast<std::size_t>(std::clamp(i - radius, 0, n - 1))];
            }
        }
    };
    for (int y = 0; y < g.height; ++y) pass(g.width, [&](int i) -> double& { return g(i, y); });
    for (int x = 0; x < g.width; ++x) pass(g.height, [&](int i) -> double& { return g(x, i); });
}

inline Grid<double> smooth_noise(int w, int h, int radius, double sigma, std::mt19937_64& rng) {
    Grid<double> g(w, h);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& v : g.data) v = n01(rng);
    box_blur(g, radius);
    double mean = 0, sq = 0;
    for (double v : g.data) mean += v;
    mean /= static_cast<double>(g.size());
    for (double v : g.data) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(g.size()));
    for (auto& v : g.data) v = sd > 0 ? (v - mean) / sd * sigma : 0.0;
    return g;
}

struct BreastShape {
    double semi_x, semi_y, center_y;
    double density;  // patient-level fibroglandular fraction
};

struct Lesion {
    double cx, cy, radius_px;
};

// One right-oriented view: chest wall at x = 0, nipple toward +x.
inline Grid<double> render_view(int n, const BreastShape& shape, const Lesion* lesion, const PhantomSpec& spec,
                                std::mt19937_64& rng) {
    Grid<double> img(n, n, 0.0);
    const Grid<double> fine = smooth_noise(n, n, 1, spec.texture_sigma, rng);
    const Grid<double> coarse = smooth_noise(n, n, std::max(2, n / 12), 1.0, rng);
    const double edge = std::min(shape.semi_x, shape.semi_y);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double u = (x + 0.5) / shape.semi_x, v = (y + 0.5 - shape.center_y) / shape.semi_y;
            const double r = std::sqrt(u * u + v * v);
            // anti-aliased coverage across a one-pixel ramp at the skin line
            const double coverage = std::clamp(0.5 - (r - 1.0) * edge, 0.0, 1.0);
            if (coverage <= 0.0) continue;
            // fatty base brightening toward the chest wall plus fibroglandular patches
            const double glandular = coarse(x, y) > 0.6 - shape.density ? 0.22 : 0.0;
            double t = 0.32 + 0.18 * (1.0 - r) + glandular + fine(x, y);
            if (lesion) {
                const double d = std::hypot(x + 0.5 - lesion->cx, y + 0.5 - lesion->cy) / lesion->radius_px;
                if (d < 1.0) t += spec.lesion_contrast * 0.5 * (1.0 + std::cos(M_PI * d));
            }
            img(x, y) = coverage * std::clamp(t, 0.05, 1.0);
        }
    }
    return img;
}

inline Grid<std::uint16_t> quantize_phantom(const Grid<double>& img) {
    Grid<std::uint16_t> out(img.width, img.height, 0);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data[i], 0.0, 1.0) * kPhantomMaxval));
    return out;
}

}  // namespace detail

inline std::string phantom_patient_id(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "P%05d", i);
    return buf;
}

// Deterministic in spec.seed; every patient and view draws from its own
// derived stream, so the corpus does not depend on generation order.
inline PhantomCorpus generate_phantom_corpus(const PhantomSpec& spec, int jobs = 1) {
    spec.validate();
    const int n = spec.image_size;

    // exactly round(count * fraction) positives at seeded positions
    std::vector<int> order(static_cast<std::size_t>(spec.count));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 label_rng(derive_seed(spec.seed, "phantom-labels"));
    std::shuffle(order.begin(), order.end(), label_rng);
    const auto positives = static_cast<std::size_t>(std::lround(spec.count * spec.positive_fraction));
    std::vector<int> labels(static_cast<std::size_t>(spec.count), 0);
    for (std::size_t i = 0; i < positives; ++i) labels[static_cast<std::size_t>(order[i])] = 1;

    PhantomCorpus corpus;
    corpus.views.resize(static_cast<std::size_t>(spec.count) * 4);
    parallel_for(static_cast<std::size_t>(spec.count), jobs, [&](std::size_t p) {
        std::mt19937_64 rng(derive_seed(spec.seed, "phantom-patient", p));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> n01(0.0, 1.0);
        const int label = labels[p];
        const int year = spec.years[p % spec.years.size()];
        // age distributions follow the clinical cohort's reported moments
        const double age = std::clamp(label ? 50.26 + 9.93 * n01(rng) : 54.26 + 12.52 * n01(rng), 25.0, 95.0);
        const double density = 0.15 + 0.5 * unif(rng);
        const int lesion_side = unif(rng) < 0.5 ? 0 : 1;                     // 0 = L, 1 = R
        const int lesion_views = label ? (unif(rng) < 0.5 ? 1 : 2) : 0;       // CC only, or CC and MLO
        const int lesion_first = unif(rng) < 0.5 ? 0 : 1;                    // which view gets a lone lesion

        for (int v = 0; v < 4; ++v) {
            const Laterality lat = v < 2 ? Laterality::Left : Laterality::Right;
            const ViewKind kind = v % 2 == 0 ? ViewKind::CC : ViewKind::MLO;
            std::mt19937_64 vrng(derive_seed(spec.seed, "phantom-view", p * 4 + static_cast<std::size_t>(v)));
            std::uniform_real_distribution<double> vu(0.0, 1.0);
            const detail::BreastShape shape{n * (0.62 + 0.2 * vu(vrng)), n * (0.36 + 0.1 * vu(vrng)),
                                            n * (0.45 + 0.1 * vu(vrng)), density};
            const bool lesion_here = label && (lat == Laterality::Left ? 0 : 1) == lesion_side &&
                                     (lesion_views == 2 || (v % 2) == lesion_first);
            detail::Lesion lesion{};
            if (lesion_here) {
                const double margin = 2.0 / (spec.spacing_mm);  // stay clear of the skin band
                lesion.radius_px = spec.lesion_radius_mm * (0.8 + 0.4 * vu(vrng)) / spec.spacing_mm;
                lesion.cx = margin + (shape.semi_x * 0.6 - margin) * vu(vrng);
                lesion.cy = shape.center_y + shape.semi_y * 0.5 * (2.0 * vu(vrng) - 1.0);
            }
            Grid<double> img = detail::render_view(n, shape, lesion_here ? &lesion : nullptr, spec, vrng);
            if (lat == Laterality::Left) {
                for (int y = 0; y < n; ++y) {
                    auto row = img.data.begin() + static_cast<std::ptrdiff_t>(y) * n;
                    std::reverse(row, row + n);
                }
            }
            std::normal_distribution<double> vz(lesion_here ? spec.dl_mu_positive : spec.dl_mu_negative, 1.0);
            PhantomView& out = corpus.views[p * 4 + static_cast<std::size_t>(v)];
            out.record = ExamRecord{phantom_patient_id(static_cast<int>(p)), year, lat, kind, std::round(age * 100) / 100,
                                    label, spec.spacing_mm, ""};
            out.pixels = detail::quantize_phantom(img);
            out.has_lesion = lesion_here;
            out.dl_score = 1.0 / (1.0 + std::exp(-vz(vrng)));
        }
    });
    return corpus;
}

inline std::string phantom_image_name(const ExamRecord& r) {
    return "images/" + r.patient_id + "_" + to_char(r.laterality) + "_" + to_string(r.view_kind) + ".pgm";
}

struct PhantomFiles {
    std::string manifest;
    std::string dl_scores;
};

// Writes images/, manifest.csv and dl_scores.csv under `dir`.
inline PhantomFiles write_phantoms(const PhantomSpec& spec, const std::string& dir, int jobs = 1) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    if (ec) throw Error("phantoms: cannot create output directory " + dir + ": " + ec.message());
    const PhantomCorpus corpus = generate_phantom_corpus(spec, jobs);

    parallel_for(corpus.views.size(), jobs, [&](std::size_t i) {
        const auto& v = corpus.views[i];
        write_pgm((fs::path(dir) / phantom_image_name(v.record)).string(), v.pixels, kPhantomMaxval);
    });

    std::vector<std::string> manifest{csv::join(manifest_header())};
    std::vector<std::string> scores{"patient_id,year,laterality,view,dl_score"};
    for (const auto& v : corpus.views) {
        manifest.push_back(format_manifest_row(v.record, phantom_image_name(v.record)));
        scores.push_back(csv::join({v.record.patient_id, std::to_string(v.record.year),
                                    std::string(1, to_char(v.record.laterality)), to_string(v.record.view_kind),
                                    csv::format(v.dl_score)}));
    }
    PhantomFiles files{(fs::path(dir) / "manifest.csv").string(), (fs::path(dir) / "dl_scores.csv").string()};
    csv::write_lines(files.manifest, manifest);
    csv::write_lines(files.dl_scores, scores);
    return files;
}

}  // namespace radfuse
