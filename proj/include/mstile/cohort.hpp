#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mstile/util/error.hpp"

namespace mstile {

// The two histological subtypes this pipeline classifies. DN is the positive
// class for scores and AUC.
enum class Label { cmb, dn };

inline const char* to_string(Label l) { return l == Label::cmb ? "CMB" : "DN"; }

inline Label parse_label(std::string_view s) {
    if (s == "CMB") return Label::cmb;
    if (s == "DN") return Label::dn;
    fail(Error::Kind::corrupt_data, "unknown label '" + std::string(s) + "' (expected CMB or DN)");
}

struct Annotation {
    std::string wsi_path; // relative to the cohort file directory
    int center_x = 0;
    int center_y = 0;
};

struct PatientRecord {
    std::string patient_id;
    Label label = Label::cmb;
    std::vector<Annotation> annotations; // >= 1
};

struct ClassWeights {
    double cmb = 1.0;
    double dn = 1.0;

    double of(Label l) const { return l == Label::cmb ? cmb : dn; }
};

// weight_c = N / (C * n_c): inverse-frequency weights normalized so the
// average per-sample weight is 1.
ClassWeights class_weights(std::int64_t n_cmb, std::int64_t n_dn);

struct FoldAssignment {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<FoldAssignment> folds;
};

struct FoldQuota {
    int cmb = 0;
    int dn = 0;
};

// Patient-level stratified folds: per class, a seeded shuffle; the first
// k*quota patients are dealt round-robin into pairwise-disjoint test sets;
// each fold then takes its validation quota from its own non-test patients in
// shuffle order; everyone else trains. Pure in (patients, k, quotas, seed).
FoldPlan make_folds(const std::vector<PatientRecord>& patients, int k, FoldQuota test_quota,
                    FoldQuota val_quota, std::uint64_t seed);

// Cohort CSV: patient_id,label,wsi_path,center_x,center_y (one row per
// annotation). The provenance comment goes above the header.
void write_cohort(const std::vector<PatientRecord>& patients, const std::filesystem::path& path,
                  const std::string& provenance = {});
std::vector<PatientRecord> read_cohort(const std::filesystem::path& path);

// Fold CSV: fold,role,patient_id with role in {train,val,test}.
void write_fold_plan(const FoldPlan& plan, const std::filesystem::path& path,
                     const std::string& provenance = {});
FoldPlan read_fold_plan(const std::filesystem::path& path);

} // namespace mstile
