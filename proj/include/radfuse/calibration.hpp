#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "radfuse/evaluation.hpp"
#include "radfuse/learners/logistic.hpp"
#include "radfuse/learners/subensemble.hpp"
#include "radfuse/manifest.hpp"

namespace radfuse {

inline constexpr double kProbabilityClamp = 1e-6;

// ---------------------------------------------------------------------------
// Folds

struct YearFold {
    int held_out_year = 0;
    std::vector<std::string> train_patients;  // sorted
    std::vector<std::string> test_patients;   // sorted
};

using YearFolds = std::vector<YearFold>;

// One fold per distinct year; a fold tests on that year's patients and trains on
// everyone else.
inline YearFolds leave_one_year_out_folds(const std::vector<ExamRecord>& records) {
    std::map<std::string, std::pair<int, int>> patients;  // id -> (year, label)
    for (const auto& r : records) patients.emplace(r.patient_id, std::make_pair(r.year, r.label));
    std::set<int> years;
    for (const auto& [id, info] : patients) years.insert(info.first);
    if (years.size() < 2) throw Error("leave-one-year-out needs at least 2 distinct years");

    YearFolds folds;
    for (int year : years) {
        YearFold f{year, {}, {}};
        bool train_positive = false, train_negative = false;
        for (const auto& [id, info] : patients) {
            if (info.first == year) {
                f.test_patients.push_back(id);
            } else {
                f.train_patients.push_back(id);
                (info.second == 1 ? train_positive : train_negative) = true;
            }
        }
        if (!train_positive) throw Error("fold " + std::to_string(year) + ": training years contain no positive case");
        if (!train_negative) throw Error("fold " + std::to_string(year) + ": training years contain no negative case");
        folds.push_back(std::move(f));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Calibration and fusion

inline double aggregate_views_max(std::span<const double> view_probs) {
    if (view_probs.empty()) throw Error("aggregate_views_max: no view probabilities");
    return *std::max_element(view_probs.begin(), view_probs.end());
}

inline double logit_clamped(double p) {
    const double c = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return std::log(c / (1.0 - c));
}

// p' = sigmoid(a * logit(p) + b)
struct CalibrationModel {
    double a = 1.0;
    double b = 0.0;
};

// Logistic fit on logit scores with Platt's prior-corrected targets (damped
// Newton, tolerance 1e-10, at most 100 iterations).
inline CalibrationModel fit_platt(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("fit_platt: scores and labels differ in length");
    learners::require_both_classes(labels, "fit_platt");
    std::vector<double> x(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) x[i] = logit_clamped(scores[i]);
    const auto fit = learners::fit_logistic_1d(x, learners::platt_targets(labels), 100, 1e-10);
    if (!fit.converged) throw Error("fit_platt: Newton iterations did not converge");
    return CalibrationModel{fit.slope, fit.intercept};
}

inline double apply_calibration(const CalibrationModel& m, double p) {
    return learners::sigmoid(m.a * logit_clamped(p) + m.b);
}

inline double fuse_average(double rad_cal, double dl_cal) { return 0.5 * (rad_cal + dl_cal); }

// ---------------------------------------------------------------------------
// Leave-one-year-out pipeline

enum class BranchMode { Both, RadOnly, DlOnly };

struct PatientScore {
    std::string patient_id;
    int year = 0;
    int label = 0;
    std::optional<double> rad_raw, rad_cal, dl_raw, dl_cal;
    double fused = 0.0;
};

struct FoldThresholds {
    std::optional<double> rad, dl, ens;
};

struct FoldResult {
    int year = 0;
    std::size_t train_patients = 0;
    std::size_t test_patients = 0;
    std::optional<learners::SubEnsemble> model;
    std::optional<CalibrationModel> rad_platt, dl_platt;
    FoldThresholds thresholds;

    // Everything fitted for this fold, serialized exactly.
    std::string bundle() const {
        std::ostringstream out;
        learners::BundleWriter w(out);
        w.put_int("fold.year", year);
        w.put_int("fold.has_model", model.has_value());
        if (model) model->save(out);
        w.put_int("fold.has_rad_platt", rad_platt.has_value());
        if (rad_platt) {
            w.put("rad_platt.a", rad_platt->a);
            w.put("rad_platt.b", rad_platt->b);
        }
        w.put_int("fold.has_dl_platt", dl_platt.has_value());
        if (dl_platt) {
            w.put("dl_platt.a", dl_platt->a);
            w.put("dl_platt.b", dl_platt->b);
        }
        return out.str();
    }
};

struct LoyoOptions {
    BranchMode mode = BranchMode::Both;
    bool allow_missing_dl = false;
    std::uint64_t seed = 0;
    learners::LearnerConfig learners;
    int jobs = 1;
    int schema_version = 0;
    std::optional<int> only_year;  // evaluate a single fold; folds still come from every year
};

struct LoyoResult {
    std::vector<PatientScore> patients;  // sorted by patient id
    std::vector<FoldResult> folds;       // ascending year
    std::vector<std::string> dropped;    // patients excluded, with reasons
};

using FeatureTable = std::map<ViewKey, std::vector<double>>;
using DlTable = std::map<ViewKey, double>;

namespace detail {

struct PatientViews {
    std::string id;
    int year = 0;
    int label = 0;
    std::vector<ViewKey> views;  // canonical order
};

inline double max_over(const std::vector<double>& v) { return aggregate_views_max(v); }

}  // namespace detail

inline LoyoResult run_loyo_pipeline(std::vector<ExamRecord> records, const FeatureTable& features, const DlTable& dl,
                                    const LoyoOptions& opts, RunLog* log = nullptr) {
    sort_records(records);
    const bool use_rad = opts.mode != BranchMode::DlOnly;
    const bool use_dl = opts.mode != BranchMode::RadOnly;
    LoyoResult result;

    // patients and their usable views
    std::map<std::string, detail::PatientViews> patients;
    for (const auto& r : records) {
        auto& p = patients[r.patient_id];
        p.id = r.patient_id;
        p.year = r.year;
        p.label = r.label;
        p.views.push_back(key_of(r));
    }

    std::set<std::string> drop;
    if (use_dl) {
        std::vector<std::string> missing;
        for (const auto& r : records)
            if (!dl.count(key_of(r))) {
                missing.push_back(describe(key_of(r)));
                drop.insert(r.patient_id);
            }
        if (!missing.empty() && !opts.allow_missing_dl) {
            std::string msg = "missing DL scores for " + std::to_string(missing.size()) + " view(s):";
            for (const auto& m : missing) msg += " " + m;
            throw Error(msg);
        }
        for (const auto& id : drop) result.dropped.push_back(id + ": missing DL score");
    }
    if (use_rad) {
        for (const auto& [id, p] : patients) {
            if (drop.count(id)) continue;
            const bool any = std::any_of(p.views.begin(), p.views.end(), [&](const ViewKey& k) { return features.count(k) > 0; });
            if (!any) {
                drop.insert(id);
                result.dropped.push_back(id + ": no radiomics features");
            }
        }
    }
    std::vector<ExamRecord> kept;
    for (const auto& r : records)
        if (!drop.count(r.patient_id)) kept.push_back(r);
    for (const auto& id : drop) patients.erase(id);
    if (log)
        for (const auto& d : result.dropped) log->add("dropped " + d);

    const YearFolds folds = leave_one_year_out_folds(kept);
    result.folds.resize(folds.size());

    auto dl_raw_of = [&](const detail::PatientViews& p) {
        std::vector<double> v;
        for (const auto& k : p.views) v.push_back(dl.at(k));
        return detail::max_over(v);
    };

    std::vector<std::vector<PatientScore>> per_fold(folds.size());
    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
        const YearFold& fold = folds[fi];
        if (opts.only_year && fold.held_out_year != *opts.only_year) continue;
        FoldResult& out = result.folds[fi];
        out.year = fold.held_out_year;
        out.train_patients = fold.train_patients.size();
        out.test_patients = fold.test_patients.size();

        std::function<double(const detail::PatientViews&)> rad_raw_of;
        if (use_rad) {
            std::vector<const std::vector<double>*> rows;
            std::vector<int> labels;
            for (const auto& id : fold.train_patients) {
                const auto& p = patients.at(id);
                for (const auto& k : p.views) {
                    auto it = features.find(k);
                    if (it == features.end()) continue;
                    rows.push_back(&it->second);
                    labels.push_back(p.label);
                }
            }
            if (rows.empty()) throw Error("fold " + std::to_string(fold.held_out_year) + ": no training views");
            learners::Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front()->size()));
            for (std::size_t i = 0; i < rows.size(); ++i)
                x.row(static_cast<Eigen::Index>(i)) =
                    Eigen::Map<const learners::Vector>(rows[i]->data(), static_cast<Eigen::Index>(rows[i]->size())).transpose();
            out.model = learners::SubEnsemble::train(x, labels, derive_seed(opts.seed, "fold-model", static_cast<std::uint64_t>(fold.held_out_year)),
                                                     opts.learners, opts.jobs, opts.schema_version);
            const auto& model = *out.model;
            rad_raw_of = [&features, &model](const detail::PatientViews& p) {
                std::vector<double> v;
                for (const auto& k : p.views) {
                    auto it = features.find(k);
                    if (it == features.end()) continue;
                    v.push_back(model.predict_proba(
                        Eigen::Map<const learners::Vector>(it->second.data(), static_cast<Eigen::Index>(it->second.size()))));
                }
                return detail::max_over(v);
            };
        }

        // calibration on the training patients only
        std::vector<double> train_rad, train_dl;
        std::vector<int> train_labels;
        for (const auto& id : fold.train_patients) {
            const auto& p = patients.at(id);
            train_labels.push_back(p.label);
            if (use_rad) train_rad.push_back(rad_raw_of(p));
            if (use_dl) train_dl.push_back(dl_raw_of(p));
        }
        if (use_rad) out.rad_platt = fit_platt(train_rad, train_labels);
        if (use_dl) out.dl_platt = fit_platt(train_dl, train_labels);

        auto score = [&](const detail::PatientViews& p, std::optional<double> rad_raw, std::optional<double> dl_raw) {
            PatientScore s{p.id, p.year, p.label, rad_raw, std::nullopt, dl_raw, std::nullopt, 0.0};
            if (rad_raw) s.rad_cal = apply_calibration(*out.rad_platt, *rad_raw);
            if (dl_raw) s.dl_cal = apply_calibration(*out.dl_platt, *dl_raw);
            if (s.rad_cal && s.dl_cal) s.fused = fuse_average(*s.rad_cal, *s.dl_cal);
            else s.fused = s.rad_cal ? *s.rad_cal : *s.dl_cal;
            return s;
        };

        // operating points from the training patients' calibrated scores
        std::vector<double> tr_rad, tr_dl, tr_ens;
        for (std::size_t i = 0; i < fold.train_patients.size(); ++i) {
            const auto& p = patients.at(fold.train_patients[i]);
            const PatientScore s = score(p, use_rad ? std::optional(train_rad[i]) : std::nullopt,
                                         use_dl ? std::optional(train_dl[i]) : std::nullopt);
            if (s.rad_cal) tr_rad.push_back(*s.rad_cal);
            if (s.dl_cal) tr_dl.push_back(*s.dl_cal);
            tr_ens.push_back(s.fused);
        }
        if (use_rad) out.thresholds.rad = choose_threshold(tr_rad, train_labels);
        if (use_dl) out.thresholds.dl = choose_threshold(tr_dl, train_labels);
        out.thresholds.ens = choose_threshold(tr_ens, train_labels);

        for (const auto& id : fold.test_patients) {
            const auto& p = patients.at(id);
            per_fold[fi].push_back(score(p, use_rad ? std::optional(rad_raw_of(p)) : std::nullopt,
                                         use_dl ? std::optional(dl_raw_of(p)) : std::nullopt));
        }
    }
    if (opts.only_year) {
        std::erase_if(result.folds, [&](const FoldResult& f) { return f.year != *opts.only_year; });
        if (result.folds.empty()) throw Error("no fold for year " + std::to_string(*opts.only_year));
    }
    for (auto& v : per_fold)
        for (auto& s : v) result.patients.push_back(std::move(s));
    std::sort(result.patients.begin(), result.patients.end(),
              [](const PatientScore& a, const PatientScore& b) { return a.patient_id < b.patient_id; });
    return result;
}

}  // namespace radfuse
