#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mstile/cohort.hpp"

namespace mstile {

// Arithmetic mean of crop scores (the MIL-style pooling step). Inputs are
// sorted before summation so the result is bit-identical under permutation,
// and clamped into [min,max] so the bound property is exact.
double aggregate(std::vector<double> crop_scores);

// Exact pair counts behind the Mann-Whitney AUC; exposed so tests can check
// tie symmetry in integers.
struct AucCounts {
    std::uint64_t wins = 0; // positive strictly outscores negative
    std::uint64_t ties = 0;
    std::uint64_t pairs = 0; // n_pos * n_neg
};

AucCounts auc_counts(const std::vector<int>& labels, const std::vector<double>& scores);

// Mann-Whitney AUC with ties half-counted. labels are 0/1 with 1 = positive
// (DN). Branches on which side of 0.5 the exact ratio falls so that
// auc(labels) + auc(1-labels) == 1.0 holds exactly in doubles.
double auc_roc(const std::vector<int>& labels, const std::vector<double>& scores);

double normal_cdf(double x);
// Inverse standard normal CDF (rational approximation, |err| < 1e-10 over
// (0,1); see README for test vectors).
double normal_quantile(double p);

struct StatsConfig {
    int n_ci = 10000;  // bootstrap replicates
    int n_p = 10000;   // permutation samples
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
};

// Generic BCa engine. `stat` evaluates the statistic on an index multiset
// into the original n data points; `valid` rejects degenerate resamples
// (e.g. single-class), which are redrawn with a fresh derived stream up to a
// retry cap. Replicate b, attempt t draws n indices from
// Rng(derive_seed(seed, "bootstrap", {b, t})).
BootstrapCi bca_ci_stat(std::size_t n,
                        const std::function<double(const std::vector<std::size_t>&)>& stat,
                        const std::function<bool(const std::vector<std::size_t>&)>& valid,
                        const StatsConfig& cfg);

// BCa interval for the AUC, resampling at tile level.
BootstrapCi bca_ci(const std::vector<int>& labels, const std::vector<double>& scores,
                   const StatsConfig& cfg);

// Same, but resampling whole groups (patients): groups[i] is a dense group
// index for tile i.
BootstrapCi bca_ci_grouped(const std::vector<int>& labels, const std::vector<double>& scores,
                           const std::vector<int>& groups, const StatsConfig& cfg);

// Paired sign-flip permutation test on |auc(A) - auc(B)|; per sample each
// tile's (A,B) pair is swapped with probability 1/2. Add-one estimator:
// p = (1 + #{T* >= T}) / (1 + n_p).
double permutation_test(const std::vector<int>& labels, const std::vector<double>& scores_a,
                        const std::vector<double>& scores_b, const StatsConfig& cfg);

// Paired permutation test flipping all tiles of a group together.
double permutation_test_grouped(const std::vector<int>& labels,
                                const std::vector<double>& scores_a,
                                const std::vector<double>& scores_b,
                                const std::vector<int>& groups, const StatsConfig& cfg);

struct PredictionRecord {
    std::string tile_id;
    std::string patient_id;
    Label label = Label::cmb;
    std::vector<double> crop_scores; // non-empty
    double y = 0.0;                  // == aggregate(crop_scores)
};

PredictionRecord make_prediction(std::string tile_id, std::string patient_id, Label label,
                                 std::vector<double> crop_scores);

// Row of a predictions CSV: config,tile_id,patient_id,label,y.
struct TileScore {
    std::string config;
    std::string tile_id;
    std::string patient_id;
    Label label = Label::cmb;
    double y = 0.0;
};

void write_predictions(const std::vector<PredictionRecord>& records, const std::string& config,
                       const std::filesystem::path& path, const std::string& provenance = {});
std::vector<TileScore> read_predictions(const std::filesystem::path& path);

// Optional per-crop companion file: config,tile_id,crop_index,score.
void write_crop_scores(const std::vector<PredictionRecord>& records, const std::string& config,
                       const std::filesystem::path& path, const std::string& provenance = {});

enum class ResampleUnit { tile, patient };

inline const char* to_string(ResampleUnit u) { return u == ResampleUnit::tile ? "tile" : "patient"; }

struct RunSummary {
    std::string config;
    double auc = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::int64_t n = 0; // tiles evaluated
};

struct ComparisonRow {
    std::string a;
    std::string b;
    double delta_auc = 0.0; // auc(a) - auc(b)
    double p = 1.0;
    bool significant = false;
};

struct EvalReport {
    std::string config_hash; // filled by the pipeline
    std::uint64_t seed = 0;
    std::vector<RunSummary> runs;
    std::vector<ComparisonRow> comparisons;
};

struct RunInput {
    std::string config;
    std::vector<TileScore> tiles;
};

// AUC + BCa CI per run, permutation p per requested (a,b) config pair;
// comparison pairs must reference run configs with identical tile sets.
// Per-run and per-pair RNG streams are salted with the config names so
// results don't depend on run order.
EvalReport build_report(const std::vector<RunInput>& runs,
                        const std::vector<std::pair<std::string, std::string>>& comparisons,
                        const StatsConfig& cfg, ResampleUnit unit);

void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

// Table-1-style one-line rendering, AUC and CI scaled to percent with two
// decimals (for stdout; the JSON keeps full precision).
std::string format_run_summary(const RunSummary& r);
std::string format_comparison(const ComparisonRow& c);

} // namespace mstile
