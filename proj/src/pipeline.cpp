#include "mstile/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mstile/classifier.hpp"
#include "mstile/cohort.hpp"
#include "mstile/crop.hpp"
#include "mstile/raster.hpp"
#include "mstile/synth.hpp"
#include "mstile/tiler.hpp"
#include "mstile/util/error.hpp"
#include "mstile/util/fsio.hpp"
#include "mstile/util/parallel.hpp"
#include "mstile/util/rng.hpp"
#include "mstile/util/text.hpp"

namespace mstile {

namespace fs = std::filesystem;

namespace {

std::string provenance_line(const ExperimentConfig& cfg) {
    return "config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed);
}

fs::path cohort_dir(const ExperimentConfig& cfg) { return cfg.workdir / "cohort"; }
fs::path cohort_csv(const ExperimentConfig& cfg) { return cohort_dir(cfg) / "cohort.csv"; }
fs::path tiles_dir(const ExperimentConfig& cfg, const ConfigTriple& t) {
    return cfg.workdir / "tiles" / t.dir_name();
}
fs::path manifest_path(const ExperimentConfig& cfg, const ConfigTriple& t) {
    return tiles_dir(cfg, t) / "manifest.csv";
}
fs::path folds_csv(const ExperimentConfig& cfg) { return cfg.workdir / "folds" / "folds.csv"; }
fs::path model_path(const ExperimentConfig& cfg, const ConfigTriple& t, int fold) {
    return cfg.workdir / "models" / (t.dir_name() + "_fold" + std::to_string(fold) + ".json");
}
fs::path predictions_csv(const ExperimentConfig& cfg, const ConfigTriple& t) {
    return cfg.workdir / "predictions" / (t.dir_name() + ".csv");
}
fs::path crop_scores_csv(const ExperimentConfig& cfg, const ConfigTriple& t) {
    return cfg.workdir / "predictions" / (t.dir_name() + "_crops.csv");
}
fs::path report_path(const ExperimentConfig& cfg) { return cfg.workdir / "reports" / "report.json"; }

void check_stage_config(const ExperimentConfig& cfg) {
    if (cfg.workdir.empty()) fail(Error::Kind::config_invalid, "workdir is not set");
    validate_experiment_config(cfg);
}

// Appends one JSON line per finished stage to workdir/run_log.jsonl. Only the
// index artifacts (CSV / JSON) are hashed; bulk rasters are covered by the
// manifests that name them. Durations are wall-clock and naturally vary
// between runs; everything else in the log is deterministic.
class StageLog {
public:
    StageLog(const ExperimentConfig& cfg, std::string stage)
        : cfg_(cfg), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

    void input(const fs::path& p) { add(inputs_, p); }
    void output(const fs::path& p) { add(outputs_, p); }

    void finish() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        nlohmann::json j;
        j["stage"] = stage_;
        j["config_hash"] = config_hash(cfg_);
        j["seed"] = cfg_.seed;
        j["duration_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        j["inputs"] = refs_json(inputs_);
        j["outputs"] = refs_json(outputs_);
        std::ofstream out(cfg_.workdir / "run_log.jsonl", std::ios::app);
        out << j.dump() << "\n";
        if (!out) fail(Error::Kind::io_failure, "cannot append to run_log.jsonl");
    }

private:
    struct Ref {
        std::string path;
        std::string hash;
    };

    void add(std::vector<Ref>& v, const fs::path& p) {
        std::error_code ec;
        fs::path rel = fs::relative(p, cfg_.workdir, ec);
        v.push_back({ec ? p.generic_string() : rel.generic_string(), file_content_hash(p)});
    }

    static nlohmann::json refs_json(const std::vector<Ref>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : v) arr.push_back({{"path", r.path}, {"hash", r.hash}});
        return arr;
    }

    const ExperimentConfig& cfg_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
    std::vector<Ref> inputs_;
    std::vector<Ref> outputs_;
};

std::string tile_id_for(const PatientRecord& pat, std::size_t annot_index) {
    return pat.patient_id + "-a" + std::to_string(annot_index);
}

Raster load_intermediate(const ExperimentConfig& cfg, const ConfigTriple& triple,
                         const ManifestRow& row) {
    Raster r = load_raster(tiles_dir(cfg, triple) / row.path);
    if (r.width != triple.intermediate || r.height != triple.intermediate)
        fail(Error::Kind::corrupt_data,
             "intermediate " + row.path + " is " + std::to_string(r.width) + "x" +
                 std::to_string(r.height) + ", expected " + std::to_string(triple.intermediate));
    return r;
}

} // namespace

void run_synth(const ExperimentConfig& cfg) {
    check_stage_config(cfg);
    StageLog log(cfg, "synth");
    fs::create_directories(cfg.workdir);
    generate_cohort(cfg.n_cmb, cfg.n_dn, cfg.synth, cfg.seed, cohort_dir(cfg), cfg.jobs,
                    provenance_line(cfg));
    log.output(cohort_csv(cfg));
    log.finish();
}

void run_tile(const ExperimentConfig& cfg) {
    check_stage_config(cfg);
    StageLog log(cfg, "tile");
    const auto patients = read_cohort(cohort_csv(cfg));
    log.input(cohort_csv(cfg));
    const auto triples = resolve_triples(cfg);

    // one flat job per annotation; the slot index keys every output row so
    // scheduling order never shows in the artifacts
    std::vector<std::size_t> first_slot(patients.size() + 1, 0);
    for (std::size_t i = 0; i < patients.size(); ++i)
        first_slot[i + 1] = first_slot[i] + patients[i].annotations.size();
    const std::size_t n_slots = first_slot.back();

    std::vector<int> tile_sizes;
    for (const auto& t : triples) tile_sizes.push_back(t.tile);
    std::sort(tile_sizes.begin(), tile_sizes.end());
    tile_sizes.erase(std::unique(tile_sizes.begin(), tile_sizes.end()), tile_sizes.end());

    for (const auto& t : triples) fs::create_directories(tiles_dir(cfg, t));

    std::vector<std::vector<ManifestRow>> rows(triples.size(),
                                               std::vector<ManifestRow>(n_slots));
    const std::string prov = provenance_line(cfg);

    // one WSI decode per patient serves every scale and every triple
    parallel_for(patients.size(), static_cast<unsigned>(cfg.jobs), [&](std::size_t pi) {
        const PatientRecord& pat = patients[pi];
        std::map<std::string, Raster> slides;
        for (std::size_t ai = 0; ai < pat.annotations.size(); ++ai) {
            const Annotation& ann = pat.annotations[ai];
            auto it = slides.find(ann.wsi_path);
            if (it == slides.end())
                it = slides.emplace(ann.wsi_path, load_raster(cohort_dir(cfg) / ann.wsi_path))
                         .first;
            const Raster& wsi = it->second;

            std::map<int, TileRecord> by_size;
            for (int s : tile_sizes)
                by_size.emplace(s, extract_centered(wsi, ann.center_x, ann.center_y, s));

            const std::string id = tile_id_for(pat, ai);
            for (std::size_t ti = 0; ti < triples.size(); ++ti) {
                const ConfigTriple& triple = triples[ti];
                const TileRecord& tile = by_size.at(triple.tile);
                IntermediateTile inter = make_intermediate(tile, triple.intermediate);
                const std::string file = id + ".png";
                save_raster(inter.pixels, tiles_dir(cfg, triple) / file, prov);
                ManifestRow& row = rows[ti][first_slot[pi] + ai];
                row.tile_id = id;
                row.patient_id = pat.patient_id;
                row.label = to_string(pat.label);
                row.center_x = ann.center_x;
                row.center_y = ann.center_y;
                row.tile_size = triple.tile;
                row.pad_fraction = tile.pad_fraction;
                row.path = file;
            }
        }
    });

    for (std::size_t ti = 0; ti < triples.size(); ++ti) {
        TileManifest m;
        m.provenance = prov + " config=" + triples[ti].name();
        m.rows = std::move(rows[ti]);
        write_manifest(m, manifest_path(cfg, triples[ti]));
        log.output(manifest_path(cfg, triples[ti]));
    }
    log.finish();
}

void run_plan_folds(const ExperimentConfig& cfg) {
    check_stage_config(cfg);
    StageLog log(cfg, "plan-folds");
    const auto patients = read_cohort(cohort_csv(cfg));
    log.input(cohort_csv(cfg));
    FoldPlan plan = make_folds(patients, cfg.folds_k, cfg.test_quota, cfg.val_quota, cfg.seed);
    fs::create_directories(cfg.workdir / "folds");
    write_fold_plan(plan, folds_csv(cfg), provenance_line(cfg));
    log.output(folds_csv(cfg));
    log.finish();
}

void run_train(const ExperimentConfig& cfg) {
    check_stage_config(cfg);
    StageLog log(cfg, "train");
    const FoldPlan plan = read_fold_plan(folds_csv(cfg));
    log.input(folds_csv(cfg));
    const auto triples = resolve_triples(cfg);
    fs::create_directories(cfg.workdir / "models");
    const std::string prov = provenance_line(cfg);

    for (const ConfigTriple& triple : triples) {
        const TileManifest manifest = read_manifest(manifest_path(cfg, triple));
        validate_manifest(manifest, manifest_path(cfg, triple));
        log.input(manifest_path(cfg, triple));
        const auto& rows = manifest.rows;
        const std::uint64_t cfg_h = fnv1a64(triple.name());
        const InputResolution res{triple.input, triple.input};

        // crop features are a function of (tile, crop index) alone, so they
        // are computed once here and shared by every fold's training set
        std::vector<std::vector<FeatureVector>> feats(
            rows.size(), std::vector<FeatureVector>(
                             static_cast<std::size_t>(cfg.crops_per_tile)));
        parallel_for(rows.size(), static_cast<unsigned>(cfg.jobs), [&](std::size_t i) {
            const Raster inter = load_intermediate(cfg, triple, rows[i]);
            const std::uint64_t tid_h = fnv1a64(rows[i].tile_id);
            for (int k = 0; k < cfg.crops_per_tile; ++k) {
                const auto ku = static_cast<std::uint64_t>(k);
                Raster crop = random_crop(inter, res,
                                          derive_seed(cfg.seed, "train-crop", {cfg_h, tid_h, ku}));
                crop = augment(crop, cfg.augment,
                               derive_seed(cfg.seed, "train-aug", {cfg_h, tid_h, ku}));
                feats[i][static_cast<std::size_t>(k)] = featurize(crop);
            }
        });

        for (int f = 0; f < plan.k; ++f) {
            const FoldAssignment& fold = plan.folds[static_cast<std::size_t>(f)];
            const std::set<std::string> train_set(fold.train.begin(), fold.train.end());
            std::vector<FeatureVector> x;
            std::vector<int> y;
            std::int64_t tiles_cmb = 0, tiles_dn = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (!train_set.count(rows[i].patient_id)) continue;
                const int positive = parse_label(rows[i].label) == Label::dn ? 1 : 0;
                (positive ? tiles_dn : tiles_cmb) += 1;
                for (const FeatureVector& fv : feats[i]) {
                    x.push_back(fv);
                    y.push_back(positive);
                }
            }
            TrainConfig tc = cfg.train;
            tc.class_weights = class_weights(tiles_cmb, tiles_dn);
            tc.seed = derive_seed(cfg.seed, "train", {cfg_h, static_cast<std::uint64_t>(f)});
            const TrainResult result = train_logistic(x, y, tc);
            save_model(result.model, model_path(cfg, triple, f), prov);
            log.output(model_path(cfg, triple, f));
        }
    }
    log.finish();
}

void run_predict(const ExperimentConfig& cfg) {
    check_stage_config(cfg);
    StageLog log(cfg, "predict");
    const FoldPlan plan = read_fold_plan(folds_csv(cfg));
    log.input(folds_csv(cfg));
    const auto triples = resolve_triples(cfg);
    fs::create_directories(cfg.workdir / "predictions");
    const std::string prov = provenance_line(cfg);

    // each patient is scored by the model of the single fold holding it out
    std::map<std::string, int> test_fold;
    for (int f = 0; f < plan.k; ++f)
        for (const std::string& pid : plan.folds[static_cast<std::size_t>(f)].test)
            if (!test_fold.emplace(pid, f).second)
                fail(Error::Kind::corrupt_data,
                     "patient " + pid + " appears in the test set of more than one fold");

    const bool external = !cfg.scorer_command.empty();

    for (const ConfigTriple& triple : triples) {
        const TileManifest manifest = read_manifest(manifest_path(cfg, triple));
        validate_manifest(manifest, manifest_path(cfg, triple));
        log.input(manifest_path(cfg, triple));

        std::vector<BaselineModel> models;
        if (!external) {
            for (int f = 0; f < plan.k; ++f) {
                models.push_back(load_model(model_path(cfg, triple, f)));
                log.input(model_path(cfg, triple, f));
            }
        }

        std::vector<std::size_t> held_out;
        for (std::size_t i = 0; i < manifest.rows.size(); ++i)
            if (test_fold.count(manifest.rows[i].patient_id)) held_out.push_back(i);

        const fs::path scratch_root = cfg.workdir / "predictions" / ("scratch_" + triple.dir_name());
        std::vector<PredictionRecord> records(held_out.size());
        // external scoring runs one subprocess at a time
        const unsigned par = external ? 1u : static_cast<unsigned>(cfg.jobs);
        parallel_for(held_out.size(), par, [&](std::size_t j) {
            const ManifestRow& row = manifest.rows[held_out[j]];
            const Raster inter = load_intermediate(cfg, triple, row);
            const CropPlan grid = ordered_crop_grid(inter.width, triple.input);
            const InputResolution res{triple.input, triple.input};
            std::vector<double> scores;
            scores.reserve(static_cast<std::size_t>(grid.n));
            if (external) {
                const fs::path dir = scratch_root / row.tile_id;
                fs::create_directories(dir);
                std::vector<fs::path> files;
                for (std::size_t c = 0; c < grid.positions.size(); ++c) {
                    const auto [cx, cy] = grid.positions[c];
                    fs::path file = dir / ("crop_" + std::to_string(c) + ".png");
                    save_raster(crop_at(inter, cx, cy, res), file, prov);
                    files.push_back(file);
                }
                scores = score_external(files, cfg.scorer_command);
                fs::remove_all(dir);
            } else {
                const BaselineModel& model =
                    models[static_cast<std::size_t>(test_fold.at(row.patient_id))];
                for (const auto& [cx, cy] : grid.positions)
                    scores.push_back(predict(model, crop_at(inter, cx, cy, res)));
            }
            records[j] = make_prediction(row.tile_id, row.patient_id, parse_label(row.label),
                                         std::move(scores));
        });
        if (external) fs::remove_all(scratch_root);

        write_predictions(records, triple.name(), predictions_csv(cfg, triple), prov);
        write_crop_scores(records, triple.name(), crop_scores_csv(cfg, triple), prov);
        log.output(predictions_csv(cfg, triple));
        log.output(crop_scores_csv(cfg, triple));
    }
    log.finish();
}

namespace {

EvalReport evaluate_impl(const ExperimentConfig& cfg, bool with_comparisons,
                         const char* stage_name) {
    check_stage_config(cfg);
    StageLog log(cfg, stage_name);
    const auto triples = resolve_triples(cfg);

    std::vector<RunInput> runs;
    for (const ConfigTriple& triple : triples) {
        RunInput run;
        run.config = triple.name();
        run.tiles = read_predictions(predictions_csv(cfg, triple));
        log.input(predictions_csv(cfg, triple));
        runs.push_back(std::move(run));
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    if (with_comparisons)
        for (std::size_t i = 0; i < runs.size(); ++i)
            for (std::size_t j = i + 1; j < runs.size(); ++j)
                pairs.emplace_back(runs[i].config, runs[j].config);

    StatsConfig sc = cfg.stats;
    sc.seed = cfg.seed; // per-run / per-pair streams are derived inside
    EvalReport report = build_report(runs, pairs, sc, cfg.stats_unit);
    report.config_hash = config_hash(cfg);
    report.seed = cfg.seed;

    fs::create_directories(cfg.workdir / "reports");
    write_report(report, report_path(cfg));
    log.output(report_path(cfg));
    log.finish();
    return report;
}

} // namespace

EvalReport run_evaluate(const ExperimentConfig& cfg) { return evaluate_impl(cfg, false, "evaluate"); }

EvalReport run_compare(const ExperimentConfig& cfg) { return evaluate_impl(cfg, true, "compare"); }

EvalReport run_all(const ExperimentConfig& cfg) {
    run_synth(cfg);
    run_tile(cfg);
    run_plan_folds(cfg);
    run_train(cfg);
    run_predict(cfg);
    return run_compare(cfg);
}

} // namespace mstile
