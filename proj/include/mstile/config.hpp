#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mstile/classifier.hpp"
#include "mstile/cohort.hpp"
#include "mstile/crop.hpp"
#include "mstile/stats.hpp"
#include "mstile/synth.hpp"

namespace mstile {

// One evaluated pipeline configuration: native tile size -> intermediate
// downsample -> classifier input resolution.
struct ConfigTriple {
    int tile = 0;
    int intermediate = 0;
    int input = 0;

    // label used in configs=, predictions and reports, e.g. "t4000:i2000:r456"
    std::string name() const;
    // filesystem-safe variant for directories, e.g. "t4000_i2000_r456"
    std::string dir_name() const;
};

ConfigTriple parse_config_triple(std::string_view s);

// Declarative experiment description, parsed from a key = value text file
// ('#' comments). Defaults below are the documented schema defaults; any
// unknown key is an error. `workdir` and `jobs` never enter the config hash,
// so runs are relocatable and job-count independent.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    int jobs = 1;
    std::filesystem::path workdir;

    int n_cmb = 60;
    int n_dn = 40;
    SynthParams synth;

    // grid mode: every (tile, intermediate, input) combination satisfying
    // input <= intermediate <= tile
    std::vector<int> tile_sizes{2000, 4000, 8000};
    std::vector<int> intermediate_sizes{456, 1000, 2000};
    int input_resolution = 224;
    // explicit mode: exact triples; overrides the grid when non-empty
    std::vector<ConfigTriple> configs;

    int folds_k = 5;
    FoldQuota test_quota{12, 8};
    FoldQuota val_quota{0, 0};

    int crops_per_tile = 6;
    TrainConfig train; // seed is derived per fold at use
    AugmentParams augment;
    StatsConfig stats; // seed is derived at use
    ResampleUnit stats_unit = ResampleUnit::tile;

    std::string scorer_command; // empty = built-in baseline
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Applies one `key=value` override (the --set flag reuses the file schema).
void apply_config_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// The evaluated triples: explicit list, or the validated grid expansion.
std::vector<ConfigTriple> resolve_triples(const ExperimentConfig& cfg);

// Structural validation beyond per-field parsing: triple constraints, fold
// feasibility against the cohort counts, synth params, tile-vs-slide fit.
void validate_experiment_config(const ExperimentConfig& cfg);

// Canonical text form (fixed key order, shortest round-trip doubles) of every
// hashed field; basis of config_hash and embedded in the run log.
std::string render_config(const ExperimentConfig& cfg);

// FNV-1a of render_config, hex. Artifact provenance lines carry this.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace mstile
