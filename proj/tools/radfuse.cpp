// Command-line front end: phantoms, refcdf, extract, run, report.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "radfuse/radfuse.hpp"

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool rad_only = false;
    bool dl_only = false;
    bool allow_missing_dl = false;
};

radfuse::RunConfig load(const Globals& g) {
    radfuse::RunConfig cfg = g.config_path.empty() ? radfuse::RunConfig{} : radfuse::load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mammography radiomics and score-fusion engine"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed (overrides the config)");
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--rad-only", g.rad_only, "use the radiomics branch only");
    app.add_flag("--dl-only", g.dl_only, "use the DL branch only");
    app.add_flag("--allow-missing-dl", g.allow_missing_dl, "drop patients lacking DL scores instead of aborting");

    std::string out, manifest, reference, roi_dir, features, dl, metrics;

    auto* phantoms = app.add_subcommand("phantoms", "generate a synthetic corpus (images, manifest, DL scores)");
    phantoms->add_option("--out", out, "output directory")->required();

    auto* refcdf = app.add_subcommand("refcdf", "estimate the reference intensity CDF");
    refcdf->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    refcdf->add_option("--out", out, "output CSV path")->required();

    auto* extract = app.add_subcommand("extract", "preprocess, segment and extract features per view");
    extract->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    extract->add_option("--reference", reference, "reference CDF (overrides imaging.reference_cdf)");
    extract->add_option("--out", out, "output directory")->required();
    extract->add_option("--roi-dir", roi_dir, "write ROI label maps here");

    auto* run = app.add_subcommand("run", "leave-one-year-out training, calibration, fusion and metrics");
    run->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    run->add_option("--features", features, "feature cache CSV");
    run->add_option("--dl", dl, "DL score CSV");
    run->add_option("--out", out, "output directory")->required();

    auto* report = app.add_subcommand("report", "print a summary table from metrics.json");
    report->add_option("--metrics", metrics)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (g.rad_only && g.dl_only) throw radfuse::Error("--rad-only and --dl-only are mutually exclusive");
        const radfuse::RunConfig cfg = load(g);
        if (*phantoms) {
            const auto files = radfuse::cmd_phantoms(cfg, out, g.jobs);
            std::cout << "wrote " << files.manifest << " and " << files.dl_scores << "\n";
        } else if (*refcdf) {
            const auto s = radfuse::cmd_refcdf(manifest, out, cfg, g.jobs);
            std::cout << "reference CDF from " << s.images_used << " image(s) -> " << out << "\n";
            for (const auto& e : s.skipped) std::cerr << "skipped " << e << "\n";
        } else if (*extract) {
            radfuse::RunConfig c = cfg;
            if (!reference.empty()) c.reference_cdf_path = reference;
            const auto s = radfuse::cmd_extract(manifest, out, c, g.jobs, {roi_dir});
            std::cout << s.cached << " of " << s.views << " views cached -> " << s.cache_path << "\n";
            for (const auto& e : s.exceptions) std::cerr << "exception " << e << "\n";
        } else if (*run) {
            radfuse::RunOptions opts;
            opts.mode = g.rad_only ? radfuse::BranchMode::RadOnly
                                   : g.dl_only ? radfuse::BranchMode::DlOnly : radfuse::BranchMode::Both;
            opts.allow_missing_dl = g.allow_missing_dl;
            opts.jobs = g.jobs;
            const auto s = radfuse::cmd_run(manifest, features, dl, out, cfg, opts);
            for (const auto& d : s.result.dropped) std::cerr << "dropped " << d << "\n";
            std::cout << radfuse::render_report(s.metrics);
        } else if (*report) {
            std::cout << radfuse::cmd_report(metrics);
        }
    } catch (const std::exception& e) {
        std::cerr << "radfuse: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
