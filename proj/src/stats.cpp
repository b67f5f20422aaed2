#include "mstile/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mstile/util/csv.hpp"
#include "mstile/util/fsio.hpp"
#include "mstile/util/rng.hpp"
#include "mstile/util/text.hpp"

namespace fs = std::filesystem;

namespace mstile {

double aggregate(std::vector<double> crop_scores) {
    if (crop_scores.empty())
        fail(Error::Kind::invalid_argument, "aggregate over an empty crop score list");
    std::sort(crop_scores.begin(), crop_scores.end());
    long double sum = 0.0L;
    for (double v : crop_scores) sum += v;
    const double mean = static_cast<double>(sum / static_cast<long double>(crop_scores.size()));
    return std::clamp(mean, crop_scores.front(), crop_scores.back());
}

AucCounts auc_counts(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size())
        fail(Error::Kind::invalid_argument, "auc: label/score count mismatch");
    std::uint64_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            fail(Error::Kind::invalid_argument, "auc: labels must be 0 or 1");
        if (std::isnan(scores[i]))
            fail(Error::Kind::invalid_argument, "auc: NaN score");
        (labels[i] ? n_pos : n_neg)++;
    }
    if (n_pos == 0 || n_neg == 0)
        fail(Error::Kind::single_class, "auc needs both classes present");

    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    AucCounts c;
    c.pairs = n_pos * n_neg;
    std::uint64_t neg_below = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::uint64_t pos_here = 0, neg_here = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] ? pos_here : neg_here)++;
            ++j;
        }
        c.wins += pos_here * neg_below;
        c.ties += pos_here * neg_here;
        neg_below += neg_here;
        i = j;
    }
    return c;
}

double auc_roc(const std::vector<int>& labels, const std::vector<double>& scores) {
    const AucCounts c = auc_counts(labels, scores);
    const std::uint64_t num2 = 2 * c.wins + c.ties; // 2 * (wins + ties/2), exact
    const std::uint64_t den2 = 2 * c.pairs;
    // Divide on the small side of 0.5 and reflect, so that flipping the labels
    // (num2 -> den2 - num2) gives exactly 1 - auc in doubles.
    if (num2 <= c.pairs) return static_cast<double>(num2) / static_cast<double>(den2);
    return 1.0 - static_cast<double>(den2 - num2) / static_cast<double>(den2);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865476); }

// Wichura's PPND16 rational approximation (Applied Statistics algorithm 241),
// |error| < 1e-15 over the full open interval.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        fail(Error::Kind::invalid_argument, "normal_quantile requires p in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return q < 0 ? -val : val;
}

namespace {

void check_stats_config(const StatsConfig& cfg) {
    if (cfg.n_ci < 1) fail(Error::Kind::config_invalid, "n_ci must be >= 1");
    if (cfg.n_p < 1) fail(Error::Kind::config_invalid, "n_p must be >= 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        fail(Error::Kind::config_invalid, "alpha must be in (0,1)");
}

// BCa tail transform: Phi(z0 + (z0+z)/(1 - a(z0+z))), guarded against a
// non-positive denominator (extreme acceleration).
double bca_percentile(double z0, double accel, double z) {
    const double t = z0 + z;
    const double den = 1.0 - accel * t;
    if (!(den > 0.0)) return t >= 0.0 ? 1.0 : 0.0;
    return normal_cdf(z0 + t / den);
}

// Shared tail: bias correction from the replicate distribution, acceleration
// from jackknife values, percentile pick at ceil(q*B) (1-based).
BootstrapCi bca_finish(double theta_hat, std::vector<double> thetas,
                       const std::vector<double>& jackknife, double alpha) {
    const auto [mn, mx] = std::minmax_element(thetas.begin(), thetas.end());
    if (*mn == *mx) return {theta_hat, theta_hat}; // zero-variance short-circuit

    const double B = static_cast<double>(thetas.size());
    std::uint64_t below = 0, equal = 0;
    for (double t : thetas) {
        if (t < theta_hat) ++below;
        else if (t == theta_hat) ++equal;
    }
    double prop = (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) / B;
    prop = std::clamp(prop, 1.0 / (B + 1.0), B / (B + 1.0));
    const double z0 = normal_quantile(prop);

    double accel = 0.0;
    {
        long double mean = 0.0L;
        for (double j : jackknife) mean += j;
        mean /= static_cast<long double>(jackknife.size());
        long double sum2 = 0.0L, sum3 = 0.0L;
        for (double j : jackknife) {
            const long double d = mean - static_cast<long double>(j);
            sum2 += d * d;
            sum3 += d * d * d;
        }
        if (sum2 > 0.0L) accel = static_cast<double>(sum3 / (6.0L * sum2 * std::sqrt(sum2)));
    }

    const double a1 = bca_percentile(z0, accel, normal_quantile(alpha / 2.0));
    const double a2 = bca_percentile(z0, accel, normal_quantile(1.0 - alpha / 2.0));
    std::sort(thetas.begin(), thetas.end());
    auto pick = [&](double q) {
        auto ix = static_cast<std::int64_t>(std::ceil(q * B));
        ix = std::clamp<std::int64_t>(ix, 1, static_cast<std::int64_t>(thetas.size()));
        return thetas[static_cast<std::size_t>(ix - 1)];
    };
    BootstrapCi ci{pick(a1), pick(a2)};
    if (ci.lo > ci.hi) std::swap(ci.lo, ci.hi);
    // the report invariant is lo <= theta_hat <= hi; widen if the percentile
    // pick landed past the point estimate (possible at extreme bias)
    ci.lo = std::min(ci.lo, theta_hat);
    ci.hi = std::max(ci.hi, theta_hat);
    return ci;
}

constexpr int kBootstrapRetryCap = 1000;

} // namespace

BootstrapCi bca_ci_stat(std::size_t n,
                        const std::function<double(const std::vector<std::size_t>&)>& stat,
                        const std::function<bool(const std::vector<std::size_t>&)>& valid,
                        const StatsConfig& cfg) {
    check_stats_config(cfg);
    if (n < 2) fail(Error::Kind::invalid_argument, "bca_ci needs n >= 2");

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double theta_hat = stat(all);

    std::vector<double> thetas(static_cast<std::size_t>(cfg.n_ci));
    std::vector<std::size_t> draw(n);
    for (int b = 0; b < cfg.n_ci; ++b) {
        bool ok = false;
        for (int attempt = 0; attempt < kBootstrapRetryCap; ++attempt) {
            Rng rng(derive_seed(cfg.seed, "bootstrap",
                                {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(attempt)}));
            for (std::size_t i = 0; i < n; ++i) draw[i] = rng.below(n);
            if (valid(draw)) {
                ok = true;
                break;
            }
        }
        if (!ok)
            fail(Error::Kind::infeasible,
                 "bootstrap redraw cap exhausted; sample too small or too one-sided");
        thetas[static_cast<std::size_t>(b)] = stat(draw);
    }

    std::vector<double> jack(n);
    std::vector<std::size_t> loo(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        loo.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) loo.push_back(j);
        jack[i] = stat(loo);
    }
    return bca_finish(theta_hat, std::move(thetas), jack, cfg.alpha);
}

namespace {

// AUC over an index multiset, with validity = both classes present.
struct AucOnIndices {
    const std::vector<int>* labels;
    const std::vector<double>* scores;

    bool valid(const std::vector<std::size_t>& idx) const {
        bool pos = false, neg = false;
        for (std::size_t i : idx) {
            ((*labels)[i] ? pos : neg) = true;
            if (pos && neg) return true;
        }
        return false;
    }
    double operator()(const std::vector<std::size_t>& idx) const {
        std::vector<int> l;
        std::vector<double> s;
        l.reserve(idx.size());
        s.reserve(idx.size());
        for (std::size_t i : idx) {
            l.push_back((*labels)[i]);
            s.push_back((*scores)[i]);
        }
        return auc_roc(l, s);
    }
};

} // namespace

BootstrapCi bca_ci(const std::vector<int>& labels, const std::vector<double>& scores,
                   const StatsConfig& cfg) {
    if (labels.size() != scores.size())
        fail(Error::Kind::invalid_argument, "bca_ci: label/score count mismatch");
    AucOnIndices auc{&labels, &scores};
    if (!auc.valid([&] {
            std::vector<std::size_t> all(labels.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            return all;
        }()))
        fail(Error::Kind::single_class, "bca_ci needs both classes present");
    // the jackknife removes one tile at a time, so each class needs a spare
    const auto n_pos = std::count(labels.begin(), labels.end(), 1);
    if (n_pos < 2 || static_cast<std::size_t>(n_pos) + 2 > labels.size())
        fail(Error::Kind::infeasible,
             "bca_ci needs at least 2 tiles per class for the jackknife");
    return bca_ci_stat(
        labels.size(), [&](const std::vector<std::size_t>& idx) { return auc(idx); },
        [&](const std::vector<std::size_t>& idx) { return auc.valid(idx); }, cfg);
}

BootstrapCi bca_ci_grouped(const std::vector<int>& labels, const std::vector<double>& scores,
                           const std::vector<int>& groups, const StatsConfig& cfg) {
    check_stats_config(cfg);
    if (labels.size() != scores.size() || labels.size() != groups.size())
        fail(Error::Kind::invalid_argument, "bca_ci_grouped: input length mismatch");
    int n_groups = 0;
    for (int g : groups) {
        if (g < 0) fail(Error::Kind::invalid_argument, "group indices must be >= 0");
        n_groups = std::max(n_groups, g + 1);
    }
    if (n_groups < 2) fail(Error::Kind::invalid_argument, "bca_ci_grouped needs >= 2 groups");

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_groups));
    for (std::size_t i = 0; i < groups.size(); ++i)
        members[static_cast<std::size_t>(groups[i])].push_back(i);
    for (int g = 0; g < n_groups; ++g)
        if (members[static_cast<std::size_t>(g)].empty())
            fail(Error::Kind::invalid_argument, "group indices must be dense");

    // leave-one-group-out must keep both classes present
    std::set<int> pos_groups, neg_groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? pos_groups : neg_groups).insert(groups[i]);
    if (pos_groups.empty() || neg_groups.empty())
        fail(Error::Kind::single_class, "bca_ci_grouped needs both classes present");
    if (pos_groups.size() < 2 || neg_groups.size() < 2)
        fail(Error::Kind::infeasible,
             "bca_ci_grouped needs each class spread over >= 2 groups for the jackknife");

    AucOnIndices auc{&labels, &scores};
    auto expand = [&](const std::vector<std::size_t>& group_idx) {
        std::vector<std::size_t> tiles;
        for (std::size_t g : group_idx)
            for (std::size_t t : members[g]) tiles.push_back(t);
        return tiles;
    };
    return bca_ci_stat(
        static_cast<std::size_t>(n_groups),
        [&](const std::vector<std::size_t>& gi) { return auc(expand(gi)); },
        [&](const std::vector<std::size_t>& gi) { return auc.valid(expand(gi)); }, cfg);
}

namespace {

double permutation_test_impl(const std::vector<int>& labels, const std::vector<double>& a,
                             const std::vector<double>& b,
                             const std::vector<std::vector<std::size_t>>& flip_units,
                             const StatsConfig& cfg) {
    const double t_obs = std::abs(auc_roc(labels, a) - auc_roc(labels, b));
    std::vector<double> pa(a), pb(b);
    std::uint64_t count = 0;
    for (int s = 0; s < cfg.n_p; ++s) {
        Rng rng(derive_seed(cfg.seed, "permutation", {static_cast<std::uint64_t>(s)}));
        pa = a;
        pb = b;
        for (const auto& unit : flip_units) {
            if (rng.next() & 1u)
                for (std::size_t i : unit) std::swap(pa[i], pb[i]);
        }
        const double t = std::abs(auc_roc(labels, pa) - auc_roc(labels, pb));
        if (t >= t_obs) ++count;
    }
    return (1.0 + static_cast<double>(count)) / (1.0 + static_cast<double>(cfg.n_p));
}

} // namespace

double permutation_test(const std::vector<int>& labels, const std::vector<double>& scores_a,
                        const std::vector<double>& scores_b, const StatsConfig& cfg) {
    check_stats_config(cfg);
    if (labels.size() != scores_a.size() || labels.size() != scores_b.size())
        fail(Error::Kind::invalid_argument, "permutation_test: input length mismatch");
    std::vector<std::vector<std::size_t>> units(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) units[i] = {i};
    return permutation_test_impl(labels, scores_a, scores_b, units, cfg);
}

double permutation_test_grouped(const std::vector<int>& labels,
                                const std::vector<double>& scores_a,
                                const std::vector<double>& scores_b,
                                const std::vector<int>& groups, const StatsConfig& cfg) {
    check_stats_config(cfg);
    if (labels.size() != scores_a.size() || labels.size() != scores_b.size() ||
        labels.size() != groups.size())
        fail(Error::Kind::invalid_argument, "permutation_test_grouped: input length mismatch");
    int n_groups = 0;
    for (int g : groups) {
        if (g < 0) fail(Error::Kind::invalid_argument, "group indices must be >= 0");
        n_groups = std::max(n_groups, g + 1);
    }
    std::vector<std::vector<std::size_t>> units(static_cast<std::size_t>(n_groups));
    for (std::size_t i = 0; i < groups.size(); ++i)
        units[static_cast<std::size_t>(groups[i])].push_back(i);
    for (const auto& u : units)
        if (u.empty()) fail(Error::Kind::invalid_argument, "group indices must be dense");
    return permutation_test_impl(labels, scores_a, scores_b, units, cfg);
}

PredictionRecord make_prediction(std::string tile_id, std::string patient_id, Label label,
                                 std::vector<double> crop_scores) {
    PredictionRecord r;
    r.tile_id = std::move(tile_id);
    r.patient_id = std::move(patient_id);
    r.label = label;
    r.y = aggregate(crop_scores);
    r.crop_scores = std::move(crop_scores);
    return r;
}

static const std::vector<std::string> kPredHeader = {"config", "tile_id", "patient_id", "label",
                                                     "y"};

void write_predictions(const std::vector<PredictionRecord>& records, const std::string& config,
                       const fs::path& path, const std::string& provenance) {
    CsvTable t;
    if (!provenance.empty()) t.comments.push_back(provenance);
    t.header = kPredHeader;
    std::vector<const PredictionRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const PredictionRecord* a, const PredictionRecord* b) {
        return a->tile_id < b->tile_id;
    });
    for (const auto* r : sorted)
        t.rows.push_back({config, r->tile_id, r->patient_id, to_string(r->label),
                          format_double(r->y)});
    atomic_write_file(path, csv_render(t));
}

std::vector<TileScore> read_predictions(const fs::path& path) {
    const CsvTable t = csv_read_file(path, kPredHeader.size());
    if (t.header != kPredHeader)
        fail(Error::Kind::corrupt_data, "unexpected predictions header in " + path.string());
    std::vector<TileScore> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        TileScore s;
        s.config = row[0];
        s.tile_id = row[1];
        s.patient_id = row[2];
        s.label = parse_label(row[3]);
        s.y = parse_double(row[4], "prediction y");
        if (!(s.y >= 0.0 && s.y <= 1.0))
            fail(Error::Kind::corrupt_data, "prediction out of [0,1] for tile " + s.tile_id);
        out.push_back(std::move(s));
    }
    return out;
}

void write_crop_scores(const std::vector<PredictionRecord>& records, const std::string& config,
                       const fs::path& path, const std::string& provenance) {
    CsvTable t;
    if (!provenance.empty()) t.comments.push_back(provenance);
    t.header = {"config", "tile_id", "crop_index", "score"};
    std::vector<const PredictionRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const PredictionRecord* a, const PredictionRecord* b) {
        return a->tile_id < b->tile_id;
    });
    for (const auto* r : sorted)
        for (std::size_t k = 0; k < r->crop_scores.size(); ++k)
            t.rows.push_back(
                {config, r->tile_id, std::to_string(k), format_double(r->crop_scores[k])});
    atomic_write_file(path, csv_render(t));
}

namespace {

struct AlignedPair {
    std::vector<int> labels;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<int> groups; // dense patient index per tile
};

std::vector<TileScore> sorted_by_tile(const std::vector<TileScore>& tiles) {
    std::vector<TileScore> s(tiles);
    std::sort(s.begin(), s.end(),
              [](const TileScore& x, const TileScore& y) { return x.tile_id < y.tile_id; });
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i].tile_id == s[i - 1].tile_id)
            fail(Error::Kind::corrupt_data, "duplicate tile_id in run: " + s[i].tile_id);
    return s;
}

AlignedPair align_runs(const RunInput& ra, const RunInput& rb) {
    const auto sa = sorted_by_tile(ra.tiles);
    const auto sb = sorted_by_tile(rb.tiles);
    if (sa.size() != sb.size())
        fail(Error::Kind::invalid_argument,
             "comparison runs '" + ra.config + "' and '" + rb.config + "' cover different tiles");
    AlignedPair out;
    std::map<std::string, int> patient_index;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (sa[i].tile_id != sb[i].tile_id || sa[i].label != sb[i].label ||
            sa[i].patient_id != sb[i].patient_id)
            fail(Error::Kind::invalid_argument,
                 "comparison runs '" + ra.config + "' and '" + rb.config +
                     "' disagree on tile " + sa[i].tile_id);
        out.labels.push_back(sa[i].label == Label::dn ? 1 : 0);
        out.a.push_back(sa[i].y);
        out.b.push_back(sb[i].y);
        auto [it, fresh] = patient_index.emplace(sa[i].patient_id,
                                                 static_cast<int>(patient_index.size()));
        (void)fresh;
        out.groups.push_back(it->second);
    }
    return out;
}

} // namespace

EvalReport build_report(const std::vector<RunInput>& runs,
                        const std::vector<std::pair<std::string, std::string>>& comparisons,
                        const StatsConfig& cfg, ResampleUnit unit) {
    check_stats_config(cfg);
    EvalReport report;
    report.seed = cfg.seed;

    std::map<std::string, const RunInput*> by_config;
    for (const auto& run : runs) {
        if (!by_config.emplace(run.config, &run).second)
            fail(Error::Kind::invalid_argument, "duplicate run config '" + run.config + "'");
    }

    for (const auto& run : runs) {
        const auto tiles = sorted_by_tile(run.tiles);
        std::vector<int> labels;
        std::vector<double> scores;
        std::vector<int> groups;
        std::map<std::string, int> patient_index;
        for (const auto& t : tiles) {
            labels.push_back(t.label == Label::dn ? 1 : 0);
            scores.push_back(t.y);
            auto [it, fresh] =
                patient_index.emplace(t.patient_id, static_cast<int>(patient_index.size()));
            (void)fresh;
            groups.push_back(it->second);
        }
        StatsConfig run_cfg = cfg;
        run_cfg.seed = derive_seed(cfg.seed, "run-ci", {fnv1a64(run.config)});
        RunSummary s;
        s.config = run.config;
        s.auc = auc_roc(labels, scores);
        const BootstrapCi ci = unit == ResampleUnit::tile
                                   ? bca_ci(labels, scores, run_cfg)
                                   : bca_ci_grouped(labels, scores, groups, run_cfg);
        s.ci_lo = ci.lo;
        s.ci_hi = ci.hi;
        s.n = static_cast<std::int64_t>(labels.size());
        report.runs.push_back(std::move(s));
    }

    for (const auto& [name_a, name_b] : comparisons) {
        auto ia = by_config.find(name_a);
        auto ib = by_config.find(name_b);
        if (ia == by_config.end() || ib == by_config.end())
            fail(Error::Kind::invalid_argument,
                 "comparison references unknown config '" + (ia == by_config.end() ? name_a : name_b) + "'");
        const AlignedPair pair = align_runs(*ia->second, *ib->second);
        StatsConfig cmp_cfg = cfg;
        cmp_cfg.seed = derive_seed(cfg.seed, "run-cmp", {fnv1a64(name_a), fnv1a64(name_b)});
        ComparisonRow row;
        row.a = name_a;
        row.b = name_b;
        row.delta_auc = auc_roc(pair.labels, pair.a) - auc_roc(pair.labels, pair.b);
        row.p = unit == ResampleUnit::tile
                    ? permutation_test(pair.labels, pair.a, pair.b, cmp_cfg)
                    : permutation_test_grouped(pair.labels, pair.a, pair.b, pair.groups, cmp_cfg);
        row.significant = row.p < cfg.alpha;
        report.comparisons.push_back(std::move(row));
    }
    return report;
}

void write_report(const EvalReport& report, const fs::path& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config_hash"] = report.config_hash;
    j["seed"] = report.seed;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : report.runs)
        j["runs"].push_back({{"config", r.config},
                             {"auc", r.auc},
                             {"ci_lo", r.ci_lo},
                             {"ci_hi", r.ci_hi},
                             {"n", r.n}});
    j["comparisons"] = nlohmann::json::array();
    for (const auto& c : report.comparisons)
        j["comparisons"].push_back({{"a", c.a},
                                    {"b", c.b},
                                    {"delta_auc", c.delta_auc},
                                    {"p", c.p},
                                    {"significant", c.significant}});
    atomic_write_file(path, j.dump(2) + "\n");
}

EvalReport read_report(const fs::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        fail(Error::Kind::corrupt_data, "report is not valid JSON: " + path.string());
    if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
        j["format_version"].get<int>() != 1)
        fail(Error::Kind::unsupported_format, "unsupported report format_version: " + path.string());
    EvalReport r;
    r.config_hash = j.value("config_hash", std::string{});
    r.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("runs") || !j["runs"].is_array())
        fail(Error::Kind::corrupt_data, "report missing runs array: " + path.string());
    for (const auto& e : j["runs"]) {
        RunSummary s;
        s.config = e.at("config").get<std::string>();
        s.auc = e.at("auc").get<double>();
        s.ci_lo = e.at("ci_lo").get<double>();
        s.ci_hi = e.at("ci_hi").get<double>();
        s.n = e.at("n").get<std::int64_t>();
        if (!(s.ci_lo <= s.auc && s.auc <= s.ci_hi))
            fail(Error::Kind::corrupt_data, "report CI does not bracket AUC for " + s.config);
        r.runs.push_back(std::move(s));
    }
    for (const auto& e : j.value("comparisons", nlohmann::json::array())) {
        ComparisonRow c;
        c.a = e.at("a").get<std::string>();
        c.b = e.at("b").get<std::string>();
        c.delta_auc = e.at("delta_auc").get<double>();
        c.p = e.at("p").get<double>();
        c.significant = e.at("significant").get<bool>();
        if (!(c.p >= 0.0 && c.p <= 1.0))
            fail(Error::Kind::corrupt_data, "report p-value out of range for " + c.a + " vs " + c.b);
        r.comparisons.push_back(std::move(c));
    }
    return r;
}

std::string format_run_summary(const RunSummary& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s AUC %6.2f (%.2f-%.2f)  n=%lld", r.config.c_str(),
                  100.0 * r.auc, 100.0 * r.ci_lo, 100.0 * r.ci_hi,
                  static_cast<long long>(r.n));
    return buf;
}

std::string format_comparison(const ComparisonRow& c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s vs %s: dAUC %+.2f  p=%.4f%s", c.a.c_str(), c.b.c_str(),
                  100.0 * c.delta_auc, c.p, c.significant ? "  (significant)" : "");
    return buf;
}

} // namespace mstile
