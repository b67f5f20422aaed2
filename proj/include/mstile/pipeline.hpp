#pragma once

#include "mstile/config.hpp"
#include "mstile/stats.hpp"

namespace mstile {

// Pipeline stages over a fixed workdir layout:
//   cohort/       cohort.csv + wsi/*.png            (run_synth)
//   tiles/<cfg>/  manifest.csv + intermediate PNGs   (run_tile)
//   folds/        folds.csv                          (run_plan_folds)
//   models/       <cfg>_fold<k>.json                 (run_train)
//   predictions/  <cfg>.csv, <cfg>_crops.csv         (run_predict)
//   reports/      report.json                        (run_evaluate / run_compare)
//   run_log.jsonl one JSON object per completed stage
//
// Every stage validates the config before touching the filesystem, writes
// final artifacts atomically, and derives all randomness from (seed, stage,
// item), so outputs are byte-identical for any --jobs value and workdir
// location. Artifacts embed config_hash + seed in a provenance comment or
// field.

void run_synth(const ExperimentConfig& cfg);
void run_tile(const ExperimentConfig& cfg);
void run_plan_folds(const ExperimentConfig& cfg);
void run_train(const ExperimentConfig& cfg);
void run_predict(const ExperimentConfig& cfg);

// evaluate = per-config AUC + CI only; compare = evaluate + pairwise
// permutation tests over all config pairs. Both write reports/report.json.
EvalReport run_evaluate(const ExperimentConfig& cfg);
EvalReport run_compare(const ExperimentConfig& cfg);

// synth -> tile -> plan-folds -> train -> predict -> compare.
EvalReport run_all(const ExperimentConfig& cfg);

} // namespace mstile
