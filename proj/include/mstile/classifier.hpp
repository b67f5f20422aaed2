#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mstile/cohort.hpp"
#include "mstile/raster.hpp"

namespace mstile {

// 16-dim hand-crafted texture features standing in for CNN embeddings:
//   [0..2]  per-channel mean (R,G,B)
//   [3..5]  per-channel population std
//   [6..13] 8-bin histogram of gradient magnitude |dx|+|dy| of Rec.601
//           luminance, central differences without the 1/2 factor (range
//           [0,510], clamped borders), normalized to sum 1
//   [14]    texture share: mean local luminance variance over all
//           fully-contained 8x8 windows divided by the whole-crop luminance
//           variance (0 if the crop has no 8x8 window or zero variance)
//   [15]    texture-void fraction: share of 8x8 windows whose variance is
//           below half the median window variance (0 if no window fits)
//
// [14] and [15] are dimensionless on purpose: rescaling a crop's intensity
// range leaves them unchanged, so they respond to texture *structure*
// (locally missing texture) rather than to staining or exposure spread.
// Every feature is computed from integer accumulators, so a crop and any of
// its flips produce bit-identical vectors.
inline constexpr int kFeatureDim = 16;
using FeatureVector = std::array<double, kFeatureDim>;

FeatureVector featurize(const Raster& crop);

struct Standardization {
    std::array<double, kFeatureDim> mean{};
    std::array<double, kFeatureDim> std{}; // zero-variance dims get 1

    FeatureVector apply(const FeatureVector& f) const {
        FeatureVector out;
        for (int i = 0; i < kFeatureDim; ++i) out[i] = (f[i] - mean[i]) / std[i];
        return out;
    }
};

Standardization fit_standardization(const std::vector<FeatureVector>& features);

struct BaselineModel {
    std::array<double, kFeatureDim> weights{};
    double bias = 0.0;
    Standardization standardization;
};

struct TrainConfig {
    int epochs = 300;
    int batch_size = 15;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    ClassWeights class_weights{1.0, 1.0};
};

struct TrainResult {
    BaselineModel model;
    std::vector<double> epoch_loss; // full-set weighted loss after each epoch
};

// labels[i] = 1 for the positive class (DN), 0 otherwise; weight of example i
// is class_weights.dn or .cmb accordingly. Mini-batch gradient descent with a
// seeded per-epoch shuffle; fully deterministic.
TrainResult train_logistic(const std::vector<FeatureVector>& features,
                           const std::vector<int>& labels, const TrainConfig& cfg);

// Convenience wrapper: featurize + train.
TrainResult train_baseline(const std::vector<Raster>& crops, const std::vector<int>& labels,
                           const TrainConfig& cfg);

double predict_features(const BaselineModel& model, const FeatureVector& f);
double predict(const BaselineModel& model, const Raster& crop);

// Weighted logistic loss and its gradient over the given index subset.
// Exposed so tests can check the gradient against finite differences.
double logistic_loss(const BaselineModel& model, const std::vector<FeatureVector>& features,
                     const std::vector<int>& labels, const ClassWeights& cw,
                     const std::vector<std::size_t>& idx);
void logistic_gradient(const BaselineModel& model, const std::vector<FeatureVector>& features,
                       const std::vector<int>& labels, const ClassWeights& cw,
                       const std::vector<std::size_t>& idx,
                       std::array<double, kFeatureDim>& grad_w, double& grad_b);

// provenance (config hash + seed) is stored verbatim and ignored on load.
void save_model(const BaselineModel& model, const std::filesystem::path& path,
                const std::string& provenance = {});
BaselineModel load_model(const std::filesystem::path& path);

// Runs `command` (via /bin/sh -c), writes one absolute PNG path per line to
// its stdin, expects one decimal score in [0,1] per line on stdout, same
// order and count, exit code 0.
std::vector<double> score_external(const std::vector<std::filesystem::path>& crop_files,
                                   const std::string& command);

} // namespace mstile
