#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "radfuse/calibration.hpp"
#include "radfuse/config.hpp"
#include "radfuse/csv.hpp"
#include "radfuse/evaluation.hpp"
#include "radfuse/features.hpp"
#include "radfuse/image_io.hpp"
#include "radfuse/imaging.hpp"
#include "radfuse/manifest.hpp"
#include "radfuse/phantoms.hpp"
#include "radfuse/segmentation.hpp"

namespace radfuse {

inline constexpr int kMetricsSchemaVersion = 1;

namespace fs = std::filesystem;

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// phantoms

inline PhantomFiles cmd_phantoms(const RunConfig& cfg, const std::string& out_dir, int jobs = 1) {
    PhantomSpec spec = cfg.phantoms;
    spec.seed = cfg.seed;
    return write_phantoms(spec, out_dir, jobs);
}

// ---------------------------------------------------------------------------
// refcdf

struct RefCdfSummary {
    std::size_t images_used = 0;
    std::vector<std::string> skipped;
};

// Pools tissue pixels of a seeded sample of manifest views (all views when
// cfg.reference_images is 0) after normalization, resampling and mirroring.
inline RefCdfSummary cmd_refcdf(const std::string& manifest_path, const std::string& out_path, const RunConfig& cfg,
                                int jobs = 1) {
    auto records = parse_manifest(manifest_path);
    sort_records(records);
    std::vector<std::size_t> picks(records.size());
    std::iota(picks.begin(), picks.end(), 0);
    if (cfg.reference_images > 0 && static_cast<std::size_t>(cfg.reference_images) < picks.size()) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "refcdf-sample"));
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(static_cast<std::size_t>(cfg.reference_images));
        std::sort(picks.begin(), picks.end());
    }
    std::vector<std::vector<std::size_t>> counts(picks.size());
    std::vector<std::string> failures(picks.size());
    parallel_for(picks.size(), jobs, [&](std::size_t i) {
        const auto& r = records[picks[i]];
        try {
            const Image img = prepare_for_reference(read_image(r.image_path, r.pixel_spacing_mm), r.meta(), nullptr,
                                                    cfg.target_spacing_mm);
            counts[i].assign(static_cast<std::size_t>(cfg.bin_count), 0);
            detail::accumulate_histogram(img, counts[i]);
        } catch (const Error& e) {
            failures[i] = describe(key_of(r)) + ": " + e.what();
        }
    });
    RefCdfSummary summary;
    std::vector<std::size_t> total(static_cast<std::size_t>(cfg.bin_count), 0);
    for (std::size_t i = 0; i < picks.size(); ++i) {
        if (!failures[i].empty()) {
            summary.skipped.push_back(failures[i]);
            continue;
        }
        ++summary.images_used;
        for (std::size_t b = 0; b < total.size(); ++b) total[b] += counts[i][b];
    }
    if (summary.images_used == 0) throw Error("refcdf: no readable images");
    if (std::accumulate(total.begin(), total.end(), std::size_t{0}) == 0) throw Error("refcdf: every pixel is background");
    write_reference_cdf(ReferenceCdf{detail::cumulative(total)}, out_path);
    return summary;
}

// ---------------------------------------------------------------------------
// extract

inline std::vector<std::string> cache_header() {
    std::vector<std::string> h = {"patient_id", "year", "laterality", "view", "label"};
    for (const auto& n : feature_schema()) h.push_back(n);
    return h;
}

struct ExtractSummary {
    std::size_t views = 0;
    std::size_t cached = 0;
    std::vector<std::string> exceptions;  // "<view>: <reason>"
    std::string cache_path, exceptions_path, imputed_path;
};

struct ExtractOptions {
    std::string roi_debug_dir;  // non-empty: write a PNG label map per view
};

inline std::string view_fields(const ExamRecord& r) {
    return csv::join({r.patient_id, std::to_string(r.year), std::string(1, to_char(r.laterality)), to_string(r.view_kind)});
}

// Per view: read, preprocess, segment, extract. Failing views go to the
// exceptions sidecar; more than cfg.max_failure_fraction of them aborts.
inline ExtractSummary cmd_extract(const std::string& manifest_path, const std::string& out_dir, const RunConfig& cfg,
                                  int jobs = 1, const ExtractOptions& opts = {}) {
    if (cfg.reference_cdf_path.empty()) throw Error("extract: imaging.reference_cdf is not set (run refcdf first)");
    const ReferenceCdf ref = read_reference_cdf(cfg.reference_cdf_path);
    auto records = parse_manifest(manifest_path);
    sort_records(records);
    ensure_directory(out_dir);
    if (!opts.roi_debug_dir.empty()) ensure_directory(opts.roi_debug_dir);

    struct Slot {
        std::optional<FeatureVector> features;
        std::string failure;
        std::vector<std::string> notes;
    };
    std::vector<Slot> slots(records.size());
    const FeatureOptions fopts{cfg.glcm_levels};
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        const auto& r = records[i];
        try {
            RunLog log;
            const Image img =
                preprocess_view(read_image(r.image_path, r.pixel_spacing_mm), r.meta(), ref, &log, cfg.target_spacing_mm);
            const RoiSet rois = build_roiset(img, cfg.periphery_mm);
            if (!opts.roi_debug_dir.empty()) {
                const std::string name = r.patient_id + "_" + to_char(r.laterality) + "_" + to_string(r.view_kind) + "_roi.png";
                write_png8((fs::path(opts.roi_debug_dir) / name).string(), roi_label_map(rois, true));
            }
            slots[i].features = extract_view_features(img, rois, r.meta(), fopts);
            slots[i].notes = log.entries();
        } catch (const Error& e) {
            slots[i].failure = e.what();
        }
    });

    ExtractSummary s;
    s.views = records.size();
    s.cache_path = (fs::path(out_dir) / "features.csv").string();
    s.exceptions_path = (fs::path(out_dir) / "exceptions.csv").string();
    s.imputed_path = (fs::path(out_dir) / "imputed.csv").string();

    std::vector<std::string> cache{csv::join(cache_header())};
    std::vector<std::string> exceptions{"patient_id,year,laterality,view,reason"};
    std::vector<std::string> imputed{"patient_id,year,laterality,view,blocks"};
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!slots[i].features) {
            std::string reason = slots[i].failure;
            std::replace(reason.begin(), reason.end(), ',', ';');
            std::replace(reason.begin(), reason.end(), '\n', ' ');
            exceptions.push_back(view_fields(r) + "," + reason);
            s.exceptions.push_back(describe(key_of(r)) + ": " + slots[i].failure);
            continue;
        }
        std::string row = view_fields(r) + "," + std::to_string(r.label);
        for (double v : slots[i].features->values) row += "," + csv::format(v);
        cache.push_back(std::move(row));
        ++s.cached;
        auto blocks = slots[i].features->imputed;
        for (const auto& n : slots[i].notes) blocks.push_back(n.find("degenerate") != std::string::npos ? "constant_image" : n);
        if (!blocks.empty()) {
            std::string joined;
            for (const auto& b : blocks) joined += (joined.empty() ? "" : ";") + b;
            imputed.push_back(view_fields(r) + "," + joined);
        }
    }
    csv::write_lines(s.exceptions_path, exceptions);
    const double failed = records.empty() ? 0.0 : static_cast<double>(s.exceptions.size()) / static_cast<double>(records.size());
    if (failed > cfg.max_failure_fraction) {
        std::ostringstream msg;
        msg << "extract: " << s.exceptions.size() << " of " << records.size() << " views failed (limit "
            << cfg.max_failure_fraction * 100 << "%), see " << s.exceptions_path;
        for (std::size_t i = 0; i < std::min<std::size_t>(5, s.exceptions.size()); ++i) msg << "\n  " << s.exceptions[i];
        throw Error(msg.str());
    }
    csv::write_lines(s.cache_path, cache);
    csv::write_lines(s.imputed_path, imputed);
    return s;
}

inline FeatureTable read_feature_cache(const std::string& path) {
    const csv::Table t = csv::read(path);
    csv::require_header(t, cache_header(), path);
    FeatureTable table;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& f = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        try {
            ViewKey k{f[0], parse_laterality(f[2]), parse_view_kind(f[3])};
            std::vector<double> v;
            v.reserve(f.size() - 5);
            for (std::size_t j = 5; j < f.size(); ++j) v.push_back(csv::parse_double(f[j], t.header[j]));
            if (!table.emplace(k, std::move(v)).second) throw Error("duplicate view " + describe(k));
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
    }
    return table;
}

inline DlTable read_dl_scores(const std::string& path) {
    const csv::Table t = csv::read(path);
    csv::require_header(t, {"patient_id", "year", "laterality", "view", "dl_score"}, path);
    DlTable table;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& f = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        try {
            ViewKey k{f[0], parse_laterality(f[2]), parse_view_kind(f[3])};
            const double s = csv::parse_double(f[4], "dl_score");
            if (!(s >= 0.0 && s <= 1.0)) throw Error("dl_score must be in [0,1]");
            if (!table.emplace(k, s).second) throw Error("duplicate view " + describe(k));
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    BranchMode mode = BranchMode::Both;
    bool allow_missing_dl = false;
    int jobs = 1;
};

namespace detail {

inline nlohmann::ordered_json metric_json(const Metric& m) { return m.defined ? nlohmann::ordered_json(m.value) : nullptr; }

inline nlohmann::ordered_json confusion_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

inline void add_summary(nlohmann::ordered_json& j, const ConfusionMatrix& cm) {
    const SummaryMetrics m = summary_metrics(cm);
    j["confusion"] = confusion_json(cm);
    j["tpr"] = metric_json(m.tpr);
    j["tnr"] = metric_json(m.tnr);
    j["accuracy"] = metric_json(m.accuracy);
    j["f1"] = metric_json(m.f1);
    j["ber"] = metric_json(m.ber);
    nlohmann::ordered_json undefined = nlohmann::ordered_json::array();
    for (auto [name, metric] : {std::pair{"tpr", m.tpr}, {"tnr", m.tnr}, {"accuracy", m.accuracy}, {"f1", m.f1}, {"ber", m.ber}})
        if (!metric.defined) undefined.push_back(name);
    j["undefined_metrics"] = undefined;
}

inline bool both_classes(std::span<const int> y) {
    std::size_t pos = 0;
    for (int v : y) pos += v == 1;
    return pos > 0 && pos < y.size();
}

inline std::string roc_csv(std::span<const double> scores, std::span<const int> labels) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& p : roc_curve(scores, labels))
        out += (std::isinf(p.threshold) ? std::string("inf") : csv::format(p.threshold)) + "," + csv::format(p.fpr) + "," +
               csv::format(p.tpr) + "\n";
    return out;
}

inline std::string opt_field(const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); }

}  // namespace detail

struct RunSummary {
    LoyoResult result;
    nlohmann::ordered_json metrics;
    std::string predictions_path, metrics_path, roc_path;
};

inline const char* mode_name(BranchMode m) {
    switch (m) {
        case BranchMode::RadOnly: return "rad-only";
        case BranchMode::DlOnly: return "dl-only";
        default: return "fused";
    }
}

inline nlohmann::ordered_json build_metrics(const LoyoResult& res, const RunConfig& cfg, BranchMode mode, int jobs = 1) {
    using json = nlohmann::ordered_json;
    std::vector<int> labels;
    for (const auto& p : res.patients) labels.push_back(p.label);

    json j;
    j["schema_version"] = kMetricsSchemaVersion;
    j["feature_schema_version"] = kFeatureSchemaVersion;
    j["seed"] = cfg.seed;
    j["mode"] = mode_name(mode);
    j["ci_method"] = cfg.ci == CiMethod::DeLong ? "delong" : "bootstrap";
    j["threshold_policy"] = cfg.threshold_policy;
    j["patients"] = res.patients.size();
    j["dropped"] = res.dropped;

    struct Branch {
        const char* name;
        bool available;
        std::function<std::optional<double>(const PatientScore&)> score;
        std::function<std::optional<double>(const FoldResult&)> threshold;
    };
    const std::vector<Branch> branches = {
        {"RAD", mode != BranchMode::DlOnly, [](const PatientScore& p) { return p.rad_cal; },
         [](const FoldResult& f) { return f.thresholds.rad; }},
        {"DL", mode != BranchMode::RadOnly, [](const PatientScore& p) { return p.dl_cal; },
         [](const FoldResult& f) { return f.thresholds.dl; }},
        {"ENS", true, [](const PatientScore& p) { return std::optional<double>(p.fused); },
         [](const FoldResult& f) { return f.thresholds.ens; }},
    };

    json models = json::array();
    json folds = json::array();
    for (const auto& f : res.folds) {
        json fj;
        fj["year"] = f.year;
        fj["train_patients"] = f.train_patients;
        fj["test_patients"] = f.test_patients;
        fj["models"] = json::array();
        folds.push_back(std::move(fj));
    }

    for (const auto& b : branches) {
        json m;
        m["name"] = b.name;
        m["available"] = b.available;
        if (!b.available || res.patients.empty()) {
            models.push_back(std::move(m));
            continue;
        }
        std::vector<double> scores;
        for (const auto& p : res.patients) scores.push_back(*b.score(p));
        if (detail::both_classes(labels)) {
            AucInterval ci = cfg.ci == CiMethod::DeLong
                                 ? auc_ci_delong(scores, labels)
                                 : auc_ci_bootstrap(scores, labels, derive_seed(cfg.seed, std::string("ci-") + b.name),
                                                    cfg.bootstrap_resamples, jobs);
            m["auc"] = ci.auc;
            m["ci"] = {ci.low, ci.high};
            m["ci_degenerate"] = ci.degenerate;
        } else {
            m["auc"] = nullptr;
            m["ci"] = nullptr;
            m["ci_degenerate"] = true;
        }
        // each fold's threshold applies to its own test patients
        ConfusionMatrix total;
        for (std::size_t fi = 0; fi < res.folds.size(); ++fi) {
            const FoldResult& f = res.folds[fi];
            std::vector<double> fs;
            std::vector<int> fy;
            for (const auto& p : res.patients)
                if (p.year == f.year) {
                    fs.push_back(*b.score(p));
                    fy.push_back(p.label);
                }
            const double t = *b.threshold(f);
            const ConfusionMatrix cm = confusion_at_threshold(fs, fy, t);
            total += cm;
            json fm;
            fm["name"] = b.name;
            fm["threshold"] = t;
            fm["auc"] = detail::both_classes(fy) ? json(auc(fs, fy)) : json(nullptr);
            detail::add_summary(fm, cm);
            folds[fi]["models"].push_back(std::move(fm));
        }
        detail::add_summary(m, total);
        models.push_back(std::move(m));
    }
    j["models"] = std::move(models);
    j["folds"] = std::move(folds);
    return j;
}

inline RunSummary cmd_run(const std::string& manifest_path, const std::string& cache_path, const std::string& dl_path,
                          const std::string& out_dir, const RunConfig& cfg, const RunOptions& opts = {}) {
    const bool use_rad = opts.mode != BranchMode::DlOnly;
    const bool use_dl = opts.mode != BranchMode::RadOnly;
    auto records = parse_manifest(manifest_path);
    FeatureTable features;
    DlTable dl;
    if (use_rad) {
        if (cache_path.empty()) throw Error("run: a feature cache is required unless --dl-only");
        features = read_feature_cache(cache_path);
    }
    if (use_dl) {
        if (dl_path.empty()) throw Error("run: a DL score file is required unless --rad-only");
        dl = read_dl_scores(dl_path);
    }
    LoyoOptions lo;
    lo.mode = opts.mode;
    lo.allow_missing_dl = opts.allow_missing_dl;
    lo.seed = cfg.seed;
    lo.learners = cfg.learners;
    lo.jobs = opts.jobs;
    lo.schema_version = kFeatureSchemaVersion;

    RunSummary s;
    s.result = run_loyo_pipeline(std::move(records), features, dl, lo);
    s.metrics = build_metrics(s.result, cfg, opts.mode, opts.jobs);

    ensure_directory(out_dir);
    ensure_directory((fs::path(out_dir) / "models").string());
    s.predictions_path = (fs::path(out_dir) / "predictions.csv").string();
    s.metrics_path = (fs::path(out_dir) / "metrics.json").string();
    s.roc_path = (fs::path(out_dir) / "roc.csv").string();

    std::vector<std::string> pred{"patient_id,year,label,rad_raw,rad_cal,dl_raw,dl_cal,fused"};
    std::vector<double> rad, dlv, ens;
    std::vector<int> labels;
    for (const auto& p : s.result.patients) {
        pred.push_back(csv::join({p.patient_id, std::to_string(p.year), std::to_string(p.label), detail::opt_field(p.rad_raw),
                                  detail::opt_field(p.rad_cal), detail::opt_field(p.dl_raw), detail::opt_field(p.dl_cal),
                                  csv::format(p.fused)}));
        labels.push_back(p.label);
        ens.push_back(p.fused);
        if (p.rad_cal) rad.push_back(*p.rad_cal);
        if (p.dl_cal) dlv.push_back(*p.dl_cal);
    }
    csv::write_lines(s.predictions_path, pred);
    csv::write_file(s.metrics_path, s.metrics.dump(2) + "\n");
    if (detail::both_classes(labels)) {
        csv::write_file(s.roc_path, detail::roc_csv(ens, labels));
        if (use_rad) csv::write_file((fs::path(out_dir) / "roc_rad.csv").string(), detail::roc_csv(rad, labels));
        if (use_dl) csv::write_file((fs::path(out_dir) / "roc_dl.csv").string(), detail::roc_csv(dlv, labels));
    }
    for (const auto& f : s.result.folds)
        csv::write_file((fs::path(out_dir) / "models" / ("fold_" + std::to_string(f.year) + ".bundle")).string(), f.bundle());
    return s;
}

// ---------------------------------------------------------------------------
// report

namespace detail {

inline std::string fixed3(const nlohmann::json& v) {
    if (!v.is_number()) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v.get<double>());
    return buf;
}

}  // namespace detail

// Fixed-width table, one row per model in RAD, DL, ENS order.
inline std::string render_report(const nlohmann::json& metrics) {
    if (!metrics.is_object() || !metrics.contains("models") || !metrics["models"].is_array())
        throw Error("report: metrics JSON has no 'models' array");
    if (!metrics.contains("folds") || !metrics["folds"].is_array() || metrics["folds"].empty()) throw Error("no folds");

    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-5s %-22s %-6s %-6s %-6s %-6s %-6s\n", "model", "AUC (95% CI)", "TPR", "TNR", "ACC",
                  "F1", "BER");
    out << line;
    for (const char* name : {"RAD", "DL", "ENS"}) {
        const nlohmann::json* m = nullptr;
        for (const auto& e : metrics["models"])
            if (e.value("name", "") == name) m = &e;
        std::string auc_text = "n/a";
        std::string cols[5] = {"n/a", "n/a", "n/a", "n/a", "n/a"};
        if (m && m->value("available", true)) {
            if (m->contains("auc") && (*m)["auc"].is_number()) {
                auc_text = detail::fixed3((*m)["auc"]);
                if (m->contains("ci") && (*m)["ci"].is_array() && (*m)["ci"].size() == 2)
                    auc_text += " (" + detail::fixed3((*m)["ci"][0]) + "-" + detail::fixed3((*m)["ci"][1]) + ")";
            }
            const char* keys[5] = {"tpr", "tnr", "accuracy", "f1", "ber"};
            for (int k = 0; k < 5; ++k)
                if (m->contains(keys[k])) cols[k] = detail::fixed3((*m)[keys[k]]);
        } else if (m) {
            auc_text = "not run";
        }
        std::snprintf(line, sizeof line, "%-5s %-22s %-6s %-6s %-6s %-6s %-6s\n", name, auc_text.c_str(), cols[0].c_str(),
                      cols[1].c_str(), cols[2].c_str(), cols[3].c_str(), cols[4].c_str());
        out << line;
    }
    return out.str();
}

inline std::string cmd_report(const std::string& metrics_path) {
    std::ifstream in(metrics_path);
    if (!in) throw Error("cannot open " + metrics_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("report: malformed JSON in " + metrics_path + ": " + e.what());
    }
    return render_report(j);
}

}  // namespace radfuse
