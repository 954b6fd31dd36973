#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "radfuse/core.hpp"
#include "radfuse/csv.hpp"
#include "radfuse/features.hpp"
#include "radfuse/imaging.hpp"
#include "radfuse/learners/subensemble.hpp"
#include "radfuse/phantoms.hpp"
#include "radfuse/segmentation.hpp"

namespace radfuse {

enum class CiMethod { DeLong, Bootstrap };

struct RunConfig {
    std::uint64_t seed = 20240607;
    std::string reference_cdf_path;
    int bin_count = kDefaultBinCount;
    int reference_images = 100;  // views sampled for the reference CDF; 0 = all
    double target_spacing_mm = kTargetSpacingMm;
    double periphery_mm = kPeripheryBandMm;
    int glcm_levels = kDefaultGlcmLevels;
    learners::LearnerConfig learners;
    std::string threshold_policy = "youden";
    CiMethod ci = CiMethod::DeLong;
    int bootstrap_resamples = 2000;
    double max_failure_fraction = 0.10;
    std::string output_dir = "out";
    PhantomSpec phantoms;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(static_cast<int>(csv::parse_int(trim(tok), key)));
    if (out.empty()) throw Error(key + ": empty list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
    auto dbl = [](double RunConfig::*field) -> Setter {
        return [field](RunConfig& c, const std::string& v) { c.*field = csv::parse_double(v, "value"); };
    };
    auto integer = [](int RunConfig::*field) -> Setter {
        return [field](RunConfig& c, const std::string& v) { c.*field = static_cast<int>(csv::parse_int(v, "value")); };
    };
    auto num = [](auto get) -> Setter {
        return [get](RunConfig& c, const std::string& v) {
            auto& ref = get(c);
            using T = std::remove_reference_t<decltype(ref)>;
            if constexpr (std::is_integral_v<T>) ref = static_cast<T>(csv::parse_int(v, "value"));
            else ref = csv::parse_double(v, "value");
        };
    };
    static const std::map<std::string, Setter> setters = {
        {"seed", [](RunConfig& c, const std::string& v) {
             std::uint64_t s = 0;
             auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
             if (ec != std::errc() || p != v.data() + v.size()) throw Error("cannot parse seed '" + v + "'");
             c.seed = s;
         }},
        {"imaging.reference_cdf", [](RunConfig& c, const std::string& v) { c.reference_cdf_path = v; }},
        {"imaging.bin_count", integer(&RunConfig::bin_count)},
        {"imaging.reference_images", integer(&RunConfig::reference_images)},
        {"imaging.target_spacing_mm", dbl(&RunConfig::target_spacing_mm)},
        {"segmentation.periphery_mm", dbl(&RunConfig::periphery_mm)},
        {"glcm.levels", integer(&RunConfig::glcm_levels)},
        {"learners.knn.k", num([](RunConfig& c) -> auto& { return c.learners.knn.k; })},
        {"learners.svm.lambda", num([](RunConfig& c) -> auto& { return c.learners.svm.lambda; })},
        {"learners.svm.epochs", num([](RunConfig& c) -> auto& { return c.learners.svm.epochs; })},
        {"learners.lasso.lambda_min", num([](RunConfig& c) -> auto& { return c.learners.lasso.lambda_min; })},
        {"learners.lasso.lambda_max", num([](RunConfig& c) -> auto& { return c.learners.lasso.lambda_max; })},
        {"learners.lasso.grid_points", num([](RunConfig& c) -> auto& { return c.learners.lasso.grid_points; })},
        {"learners.lasso.inner_folds", num([](RunConfig& c) -> auto& { return c.learners.lasso.inner_folds; })},
        {"learners.lasso.max_iter", num([](RunConfig& c) -> auto& { return c.learners.lasso.max_iter; })},
        {"learners.lasso.tol", num([](RunConfig& c) -> auto& { return c.learners.lasso.tol; })},
        {"learners.bswims.bootstraps", num([](RunConfig& c) -> auto& { return c.learners.bswims.bootstraps; })},
        {"learners.bswims.z_threshold", num([](RunConfig& c) -> auto& { return c.learners.bswims.z_threshold; })},
        {"learners.bswims.max_size", num([](RunConfig& c) -> auto& { return c.learners.bswims.max_size; })},
        {"learners.bswims.ridge", num([](RunConfig& c) -> auto& { return c.learners.bswims.ridge; })},
        {"learners.lda.shrinkage", num([](RunConfig& c) -> auto& { return c.learners.lda.shrinkage; })},
        {"learners.nb.var_floor", num([](RunConfig& c) -> auto& { return c.learners.nb.var_floor; })},
        {"learners.rf.trees", num([](RunConfig& c) -> auto& { return c.learners.rf.trees; })},
        {"learners.rf.max_depth", num([](RunConfig& c) -> auto& { return c.learners.rf.max_depth; })},
        {"learners.rf.min_leaf", num([](RunConfig& c) -> auto& { return c.learners.rf.min_leaf; })},
        {"learners.rf.mtry", num([](RunConfig& c) -> auto& { return c.learners.rf.mtry; })},
        {"evaluation.threshold_policy", [](RunConfig& c, const std::string& v) {
             if (v != "youden") throw Error("unsupported threshold policy '" + v + "' (only youden)");
             c.threshold_policy = v;
         }},
        {"evaluation.ci", [](RunConfig& c, const std::string& v) {
             if (v == "delong") c.ci = CiMethod::DeLong;
             else if (v == "bootstrap") c.ci = CiMethod::Bootstrap;
             else throw Error("evaluation.ci must be delong or bootstrap, got '" + v + "'");
         }},
        {"evaluation.bootstrap_resamples", integer(&RunConfig::bootstrap_resamples)},
        {"extract.max_failure_fraction", dbl(&RunConfig::max_failure_fraction)},
        {"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
        {"phantoms.count", num([](RunConfig& c) -> auto& { return c.phantoms.count; })},
        {"phantoms.positive_fraction", num([](RunConfig& c) -> auto& { return c.phantoms.positive_fraction; })},
        {"phantoms.years", [](RunConfig& c, const std::string& v) { c.phantoms.years = parse_int_list(v, "phantoms.years"); }},
        {"phantoms.lesion_contrast", num([](RunConfig& c) -> auto& { return c.phantoms.lesion_contrast; })},
        {"phantoms.lesion_radius_mm", num([](RunConfig& c) -> auto& { return c.phantoms.lesion_radius_mm; })},
        {"phantoms.texture_sigma", num([](RunConfig& c) -> auto& { return c.phantoms.texture_sigma; })},
        {"phantoms.image_size", num([](RunConfig& c) -> auto& { return c.phantoms.image_size; })},
        {"phantoms.spacing_mm", num([](RunConfig& c) -> auto& { return c.phantoms.spacing_mm; })},
        {"phantoms.dl_mu_negative", num([](RunConfig& c) -> auto& { return c.phantoms.dl_mu_negative; })},
        {"phantoms.dl_mu_positive", num([](RunConfig& c) -> auto& { return c.phantoms.dl_mu_positive; })},
    };
    return setters;
}

}  // namespace detail

inline void validate_config(const RunConfig& c) {
    if (c.bin_count < 2) throw Error("config: imaging.bin_count must be >= 2");
    if (c.reference_images < 0) throw Error("config: imaging.reference_images must be >= 0");
    if (!(c.target_spacing_mm > 0)) throw Error("config: imaging.target_spacing_mm must be positive");
    if (!(c.periphery_mm >= 0)) throw Error("config: segmentation.periphery_mm must be non-negative");
    if (c.glcm_levels < 2) throw Error("config: glcm.levels must be >= 2");
    if (c.learners.knn.k < 1) throw Error("config: learners.knn.k must be >= 1");
    if (!(c.learners.svm.lambda > 0) || c.learners.svm.epochs < 1) throw Error("config: learners.svm settings out of range");
    if (!(c.learners.lasso.lambda_min > 0) || c.learners.lasso.lambda_max < c.learners.lasso.lambda_min ||
        c.learners.lasso.grid_points < 1 || c.learners.lasso.inner_folds < 2)
        throw Error("config: learners.lasso settings out of range");
    if (c.learners.bswims.bootstraps < 1 || c.learners.bswims.max_size < 1) throw Error("config: learners.bswims settings out of range");
    if (c.learners.rf.trees < 1 || c.learners.rf.max_depth < 1 || c.learners.rf.min_leaf < 1)
        throw Error("config: learners.rf settings out of range");
    if (c.bootstrap_resamples < 1) throw Error("config: evaluation.bootstrap_resamples must be >= 1");
    if (!(c.max_failure_fraction >= 0 && c.max_failure_fraction <= 1)) throw Error("config: extract.max_failure_fraction must be in [0,1]");
}

inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    const auto& setters = detail::config_setters();
    auto it = setters.find(key);
    if (it == setters.end()) throw Error("unknown config key '" + key + "'");
    it->second(c, value);
}

// Flat key=value text; '#' starts a comment line.
inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "config") {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        const std::string where = origin + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw Error(where + ": expected key=value");
        try {
            apply_config_entry(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(where + ": " + e.what());
        }
    }
    validate_config(c);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, v] : detail::config_setters()) keys.push_back(k);
    return keys;
}

}  // namespace radfuse
