#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mstile/config.hpp"
#include "mstile/pipeline.hpp"
#include "mstile/stats.hpp"
#include "mstile/util/error.hpp"
#include "mstile/util/text.hpp"

namespace {

void apply_set_flags(mstile::ExperimentConfig& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            mstile::fail(mstile::Error::Kind::config_invalid,
                         "--set expects key=value, got '" + s + "'");
        mstile::apply_config_setting(cfg, mstile::trim(s.substr(0, eq)),
                                     mstile::trim(s.substr(eq + 1)));
    }
}

void print_report(const mstile::EvalReport& rep) {
    for (const auto& r : rep.runs) std::cout << mstile::format_run_summary(r) << "\n";
    for (const auto& c : rep.comparisons) std::cout << mstile::format_comparison(c) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-scale tile classification pipeline (synthetic pathology slides)"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_file;
    std::string workdir;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::vector<std::string> sets;
    app.add_option("--config", config_file, "experiment config file (key = value lines)");
    app.add_option("--workdir", workdir, "directory for all artifacts (overrides config)");
    app.add_option("--seed", seed, "base seed (overrides config)");
    app.add_option("--jobs", jobs, "worker-thread cap per stage (overrides config)");
    app.add_option("--set", sets, "override a config key, e.g. --set train.epochs=100")
        ->allow_extra_args(false);

    int cmb = -1, dn = -1;
    auto* sc_synth = app.add_subcommand("synth", "generate the synthetic cohort");
    sc_synth->add_option("--cmb", cmb, "CMB-like patient count (overrides config)");
    sc_synth->add_option("--dn", dn, "DN-like patient count (overrides config)");
    app.add_subcommand("tile", "extract tiles, downsample intermediates, write manifests");
    app.add_subcommand("plan-folds", "patient-stratified cross-validation folds");
    app.add_subcommand("train", "train one baseline model per config and fold");
    app.add_subcommand("predict", "score held-out tiles over ordered crop grids");
    app.add_subcommand("evaluate", "AUC + bootstrap CI per config, write report");
    app.add_subcommand("compare", "evaluate plus pairwise permutation tests");
    app.add_subcommand("run-all", "synth, tile, plan-folds, train, predict, compare");

    CLI11_PARSE(app, argc, argv);

    std::string stage = app.get_subcommands().front()->get_name();
    try {
        mstile::ExperimentConfig cfg;
        if (!config_file.empty()) cfg = mstile::load_experiment_config(config_file);
        apply_set_flags(cfg, sets);
        if (app.count("--seed")) cfg.seed = seed;
        if (app.count("--jobs")) cfg.jobs = jobs;
        if (app.count("--workdir")) cfg.workdir = workdir;
        if (cmb >= 0) cfg.n_cmb = cmb;
        if (dn >= 0) cfg.n_dn = dn;
        if (cfg.workdir.empty())
            mstile::fail(mstile::Error::Kind::config_invalid,
                         "no workdir: pass --workdir or set it in the config");
        mstile::validate_experiment_config(cfg); // reject bad configs before any work

        if (stage == "synth") {
            mstile::run_synth(cfg);
        } else if (stage == "tile") {
            mstile::run_tile(cfg);
        } else if (stage == "plan-folds") {
            mstile::run_plan_folds(cfg);
        } else if (stage == "train") {
            mstile::run_train(cfg);
        } else if (stage == "predict") {
            mstile::run_predict(cfg);
        } else if (stage == "evaluate") {
            print_report(mstile::run_evaluate(cfg));
        } else if (stage == "compare") {
            print_report(mstile::run_compare(cfg));
        } else { // run-all, with progress on stderr; stdout carries the summary
            using StageFn = std::function<void(const mstile::ExperimentConfig&)>;
            const std::pair<const char*, StageFn> stages[] = {
                {"synth", mstile::run_synth},          {"tile", mstile::run_tile},
                {"plan-folds", mstile::run_plan_folds}, {"train", mstile::run_train},
                {"predict", mstile::run_predict},
            };
            for (const auto& [name, fn] : stages) {
                stage = name;
                std::cerr << "[mstile] " << name << "\n";
                fn(cfg);
            }
            stage = "compare";
            std::cerr << "[mstile] compare\n";
            print_report(mstile::run_compare(cfg));
        }
    } catch (const std::exception& e) {
        std::cerr << "mstile: stage " << stage << " failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
