#include "mstile/cohort.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "mstile/util/csv.hpp"
#include "mstile/util/fsio.hpp"
#include "mstile/util/rng.hpp"
#include "mstile/util/text.hpp"

namespace fs = std::filesystem;

namespace mstile {

ClassWeights class_weights(std::int64_t n_cmb, std::int64_t n_dn) {
    if (n_cmb < 1 || n_dn < 1)
        fail(Error::Kind::invalid_argument, "class weights need at least one sample per class");
    const double total = static_cast<double>(n_cmb + n_dn);
    ClassWeights w;
    w.cmb = total / (2.0 * static_cast<double>(n_cmb));
    w.dn = total / (2.0 * static_cast<double>(n_dn));
    return w;
}

namespace {

std::vector<std::string> class_ids_shuffled(const std::vector<PatientRecord>& patients, Label label,
                                            std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& p : patients)
        if (p.label == label) ids.push_back(p.patient_id);
    std::sort(ids.begin(), ids.end()); // input order must not matter
    Rng rng(derive_seed(seed, "fold-shuffle", {label == Label::cmb ? 0ull : 1ull}));
    rng.shuffle(ids);
    return ids;
}

int quota_of(FoldQuota q, Label l) { return l == Label::cmb ? q.cmb : q.dn; }

} // namespace

FoldPlan make_folds(const std::vector<PatientRecord>& patients, int k, FoldQuota test_quota,
                    FoldQuota val_quota, std::uint64_t seed) {
    if (k < 1) fail(Error::Kind::invalid_argument, "fold count must be >= 1");
    {
        std::set<std::string> ids;
        for (const auto& p : patients)
            if (!ids.insert(p.patient_id).second)
                fail(Error::Kind::invalid_argument, "duplicate patient_id " + p.patient_id);
    }

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.folds.resize(static_cast<std::size_t>(k));

    std::vector<std::set<std::string>> test_sets(static_cast<std::size_t>(k));
    std::vector<std::set<std::string>> val_sets(static_cast<std::size_t>(k));

    for (Label label : {Label::cmb, Label::dn}) {
        const auto ids = class_ids_shuffled(patients, label, seed);
        const int n = static_cast<int>(ids.size());
        const int tq = quota_of(test_quota, label);
        const int vq = quota_of(val_quota, label);
        if (tq < 0 || vq < 0) fail(Error::Kind::invalid_argument, "negative quota");
        if (static_cast<std::int64_t>(k) * tq > n)
            fail(Error::Kind::infeasible,
                 std::string("test quota infeasible for class ") + to_string(label) + ": k*" +
                     std::to_string(tq) + " > " + std::to_string(n));
        if (n - tq < vq)
            fail(Error::Kind::infeasible,
                 std::string("validation quota infeasible for class ") + to_string(label));

        // disjoint test sets: deal the first k*tq shuffled patients round-robin
        for (int i = 0; i < k * tq; ++i)
            test_sets[static_cast<std::size_t>(i % k)].insert(ids[static_cast<std::size_t>(i)]);

        // per fold, validation = first vq non-test patients in shuffle order
        for (int f = 0; f < k; ++f) {
            int taken = 0;
            for (const auto& id : ids) {
                if (taken == vq) break;
                if (test_sets[static_cast<std::size_t>(f)].count(id)) continue;
                val_sets[static_cast<std::size_t>(f)].insert(id);
                ++taken;
            }
        }
    }

    std::vector<std::string> all_ids;
    for (const auto& p : patients) all_ids.push_back(p.patient_id);
    std::sort(all_ids.begin(), all_ids.end());

    for (int f = 0; f < k; ++f) {
        auto& fold = plan.folds[static_cast<std::size_t>(f)];
        for (const auto& id : all_ids) {
            if (test_sets[static_cast<std::size_t>(f)].count(id))
                fold.test.push_back(id);
            else if (val_sets[static_cast<std::size_t>(f)].count(id))
                fold.validation.push_back(id);
            else
                fold.train.push_back(id);
        }
    }
    return plan;
}

static const std::vector<std::string> kCohortHeader = {"patient_id", "label", "wsi_path",
                                                       "center_x", "center_y"};

void write_cohort(const std::vector<PatientRecord>& patients, const fs::path& path,
                  const std::string& provenance) {
    CsvTable t;
    if (!provenance.empty()) t.comments.push_back(provenance);
    t.header = kCohortHeader;
    std::vector<const PatientRecord*> sorted;
    for (const auto& p : patients) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const PatientRecord* a, const PatientRecord* b) {
                  return a->patient_id < b->patient_id;
              });
    for (const auto* p : sorted) {
        if (p->annotations.empty())
            fail(Error::Kind::invalid_argument, "patient " + p->patient_id + " has no annotations");
        for (const auto& a : p->annotations)
            t.rows.push_back({p->patient_id, to_string(p->label), a.wsi_path,
                              std::to_string(a.center_x), std::to_string(a.center_y)});
    }
    atomic_write_file(path, csv_render(t));
}

std::vector<PatientRecord> read_cohort(const fs::path& path) {
    CsvTable t = csv_read_file(path, kCohortHeader.size());
    if (t.header != kCohortHeader)
        fail(Error::Kind::corrupt_data, "unexpected cohort header in " + path.string());
    std::map<std::string, PatientRecord> by_id;
    std::vector<std::string> order;
    for (const auto& row : t.rows) {
        const std::string& pid = row[0];
        Label label = parse_label(row[1]);
        auto it = by_id.find(pid);
        if (it == by_id.end()) {
            PatientRecord rec;
            rec.patient_id = pid;
            rec.label = label;
            by_id.emplace(pid, std::move(rec));
            order.push_back(pid);
        } else if (it->second.label != label) {
            fail(Error::Kind::corrupt_data, "patient " + pid + " has conflicting labels");
        }
        Annotation a;
        a.wsi_path = row[2];
        a.center_x = static_cast<int>(parse_int(row[3], "center_x"));
        a.center_y = static_cast<int>(parse_int(row[4], "center_y"));
        by_id[pid].annotations.push_back(std::move(a));
    }
    std::vector<PatientRecord> out;
    out.reserve(order.size());
    for (const auto& pid : order) out.push_back(std::move(by_id[pid]));
    return out;
}

static const std::vector<std::string> kFoldHeader = {"fold", "role", "patient_id"};

void write_fold_plan(const FoldPlan& plan, const fs::path& path, const std::string& provenance) {
    CsvTable t;
    if (!provenance.empty()) t.comments.push_back(provenance);
    t.header = kFoldHeader;
    for (int f = 0; f < plan.k; ++f) {
        const auto& fold = plan.folds[static_cast<std::size_t>(f)];
        for (const auto& id : fold.train) t.rows.push_back({std::to_string(f), "train", id});
        for (const auto& id : fold.validation) t.rows.push_back({std::to_string(f), "val", id});
        for (const auto& id : fold.test) t.rows.push_back({std::to_string(f), "test", id});
    }
    atomic_write_file(path, csv_render(t));
}

FoldPlan read_fold_plan(const fs::path& path) {
    CsvTable t = csv_read_file(path, kFoldHeader.size());
    if (t.header != kFoldHeader)
        fail(Error::Kind::corrupt_data, "unexpected fold header in " + path.string());
    FoldPlan plan;
    for (const auto& row : t.rows) {
        const int f = static_cast<int>(parse_int(row[0], "fold"));
        if (f < 0) fail(Error::Kind::corrupt_data, "negative fold index");
        if (f >= plan.k) {
            plan.k = f + 1;
            plan.folds.resize(static_cast<std::size_t>(plan.k));
        }
        auto& fold = plan.folds[static_cast<std::size_t>(f)];
        if (row[1] == "train")
            fold.train.push_back(row[2]);
        else if (row[1] == "val")
            fold.validation.push_back(row[2]);
        else if (row[1] == "test")
            fold.test.push_back(row[2]);
        else
            fail(Error::Kind::corrupt_data, "unknown fold role '" + row[1] + "'");
    }
    return plan;
}

} // namespace mstile
