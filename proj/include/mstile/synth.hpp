#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mstile/cohort.hpp"
#include "mstile/raster.hpp"

namespace mstile {

// Synthetic H&E-like slides. Both classes share four luminance-only
// structures: a fine value-noise field (cellular texture), a periodic micro
// grating (glandular micro-architecture), a mid-scale value-noise decoy, and
// a slow base field whose drift defeats naive per-tile mean features.
// DN-like slides additionally get sparse smooth dark nodules that suppress
// the fine texture inside them (cell density saturates toward the core); the
// grating runs through nodules unchanged.
//
// The defaults are tuned so that classification quality depends on the view
// geometry in the intended way. The discriminative cue is the fine-texture
// void inside nodules, read through local-variance statistics:
//   - in a mildly downsampled close-up view (~2x), a small analysis window
//     spans only a fraction of a grating period, so its variance is almost
//     pure fine texture and the in-nodule void is crisp;
//   - in a whole-tile view at >=4x, the same window packs a full grating
//     period: the grating contributes a label-independent variance floor in
//     every window that swamps the suppression contrast, even though the
//     fine texture itself survives the downsample;
//   - at ~36x (whole 8000 px tile into 224 px) both fine texture and grating
//     average away, and the mid field's cells match the nodules in size and
//     depth, so nodules and ordinary staining blotches look alike to the
//     amplitude statistics that remain.
// Both classes additionally carry a handful of texture-dead patches
// (slide-processing artifacts) where texture amplitude collapses. Their
// void mass is view-independent and Poisson-lumpy per patient, so every
// texture-void statistic sits on a patient-level noise floor that a real
// nodule signal has to clear.
// Nodules are also sparse (~20 per slide, Poisson), so per-patient nodule
// mass varies and single small views may contain none at all.
// With nodule_contrast = 0 the two classes are pixel-identical for equal
// seeds.
struct SynthParams {
    int wsi_size = 10000;
    double nodule_density = 0.2; // nodules per megapixel (DN only)
    int nodule_radius_min = 150;
    int nodule_radius_max = 400;
    double nodule_contrast = 25.0; // gray levels; also scales texture suppression
    int fine_texture_scale = 6;
    double noise_std = 12.0; // fine texture amplitude (nominal std)
    std::array<int, 3> base_color{225, 180, 200};
    // product-sinusoid grating, period micro_texture_scale px, std
    // micro_texture_std, random per-patient phase; not suppressed by nodules
    int micro_texture_scale = 36;
    double micro_texture_std = 8.7;
    // nuisance structure present in both classes; the mid field's std is
    // chosen so its darkest cells reach nodule depth (-25) and nodules don't
    // stand out to amplitude features in heavily downsampled views
    int mid_texture_scale = 700;
    double mid_texture_std = 18.0;
    // texture-dead patches (processing artifacts), in both classes: disks
    // where fine texture and grating amplitude drop to (1 - dead_strength);
    // they put a patient-lumpy noise floor under any texture-void statistic
    double dead_density = 0.02; // patches per megapixel
    int dead_radius_min = 120;
    int dead_radius_max = 220;
    double dead_strength = 0.7;
    int base_field_scale = 3000;
    double base_field_std = 20.0;
    // per-patient multiplicative jitter half-range on the texture stds (the
    // grating rides on the fine multiplier), so global texture statistics
    // overlap between patients
    double texture_jitter = 0.25;
};

void validate_synth_params(const SynthParams& p);

struct Nodule {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
};

// Nodule count is Poisson(area_megapixels * density) drawn by summing unit
// exponential gaps; centers uniform over the slide, radii uniform in range.
// Deterministic in (params, patient_seed).
std::vector<Nodule> draw_nodules(const SynthParams& p, std::uint64_t patient_seed);

// Texture-dead patches use the same disk model with their own streams; they
// are drawn for every patient regardless of label.
std::vector<Nodule> draw_dead_patches(const SynthParams& p, std::uint64_t patient_seed);

struct GeneratedPatient {
    Raster raster;
    int center_x = 0; // annotation, uniform over the central half of the slide
    int center_y = 0;
};

GeneratedPatient generate_patient(Label label, const SynthParams& p, std::uint64_t seed);

// Writes out_dir/wsi/<patient>.png (uncompressed PNG; these are bulk data)
// plus out_dir/cohort.csv, and returns the records. Patient seeds are derived
// from (seed, patient index); generation is parallel over patients.
std::vector<PatientRecord> generate_cohort(int n_cmb, int n_dn, const SynthParams& p,
                                           std::uint64_t seed,
                                           const std::filesystem::path& out_dir, int jobs,
                                           const std::string& provenance = {});

} // namespace mstile
