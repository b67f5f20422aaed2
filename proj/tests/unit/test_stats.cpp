#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "mstile/stats.hpp"
#include "mstile/util/error.hpp"
#include "mstile/util/fsio.hpp"
#include "mstile/util/rng.hpp"

using namespace mstile;
namespace fs = std::filesystem;

namespace {

// ---- independent reference implementations ----

// AUC by direct pairwise counting (ties half-counted).
double brute_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    long double num = 0.0L;
    long long pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) num += 1.0L;
            else if (scores[i] == scores[j]) num += 0.5L;
        }
    }
    REQUIRE(pairs > 0);
    return static_cast<double>(num / static_cast<long double>(pairs));
}

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// inverse normal CDF by bisection, independent of the library's rational
// approximation
double phi_inv(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// BCa interval for the sample mean, written from the standard formulas
// (bias-correction constant from the replicate distribution, acceleration
// from the jackknife). Resamples replay the documented replicate streams:
// replicate b, attempt t uses Rng(derive_seed(seed, "bootstrap", {b, t})),
// drawing n indices in order; the mean is valid on every resample, so t = 0.
BootstrapCi bca_mean_oracle(const std::vector<double>& x, int n_boot, double alpha,
                            std::uint64_t seed) {
    const std::size_t n = x.size();
    auto mean_of = [&](const std::vector<std::size_t>& idx) {
        long double s = 0.0L;
        for (std::size_t i : idx) s += x[i];
        return static_cast<double>(s / static_cast<long double>(idx.size()));
    };
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double theta = mean_of(all);

    std::vector<double> thetas(static_cast<std::size_t>(n_boot));
    std::vector<std::size_t> idx(n);
    for (int b = 0; b < n_boot; ++b) {
        Rng rng(derive_seed(seed, "bootstrap", {static_cast<std::uint64_t>(b), 0}));
        for (std::size_t i = 0; i < n; ++i) idx[i] = rng.below(n);
        thetas[static_cast<std::size_t>(b)] = mean_of(idx);
    }

    double below = 0, equal = 0;
    for (double t : thetas) {
        if (t < theta) ++below;
        else if (t == theta) ++equal;
    }
    double p0 = (below + 0.5 * equal) / n_boot;
    p0 = std::clamp(p0, 1.0 / (n_boot + 1.0), n_boot / (n_boot + 1.0));
    const double z0 = phi_inv(p0);

    std::vector<double> jack(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double s = 0.0L;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) s += x[j];
        jack[i] = static_cast<double>(s / static_cast<long double>(n - 1));
    }
    long double jm = 0.0L;
    for (double j : jack) jm += j;
    jm /= static_cast<long double>(n);
    long double s2 = 0.0L, s3 = 0.0L;
    for (double j : jack) {
        const long double d = jm - static_cast<long double>(j);
        s2 += d * d;
        s3 += d * d * d;
    }
    const double a = s2 > 0 ? static_cast<double>(s3 / (6.0L * s2 * std::sqrt(s2))) : 0.0;

    auto tail = [&](double z) {
        const double t = z0 + z;
        const double den = 1.0 - a * t;
        if (!(den > 0.0)) return t >= 0.0 ? 1.0 : 0.0;
        return phi(z0 + t / den);
    };
    const double a1 = tail(phi_inv(alpha / 2.0));
    const double a2 = tail(phi_inv(1.0 - alpha / 2.0));

    std::sort(thetas.begin(), thetas.end());
    auto pick = [&](double q) {
        auto k = static_cast<std::int64_t>(std::ceil(q * n_boot));
        k = std::clamp<std::int64_t>(k, 1, n_boot);
        return thetas[static_cast<std::size_t>(k - 1)];
    };
    BootstrapCi ci{pick(a1), pick(a2)};
    if (ci.lo > ci.hi) std::swap(ci.lo, ci.hi);
    ci.lo = std::min(ci.lo, theta);
    ci.hi = std::max(ci.hi, theta);
    return ci;
}

// 2 * (wins + ties/2) for one score vector, as an exact integer.
std::uint64_t num2_of(const std::vector<int>& labels, const std::vector<double>& scores) {
    std::uint64_t wins = 0, ties = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) ++wins;
            else if (scores[i] == scores[j]) ++ties;
        }
    }
    return 2 * wins + ties;
}

// Exhaustive paired sign-flip null over all 2^n swap patterns, compared in
// exact integer pair counts. The AUC difference of two patterns is ordered
// in doubles exactly as the integer |num2_a - num2_b| whenever the integers
// differ, but patterns whose integer difference exactly equals the observed
// one may round an ulp either way unless their count pair is identical to
// the observed one. So the exact p is bracketed: lo counts only strict
// exceedances plus bitwise-guaranteed ties, hi counts every exact tie.
struct PermBracket {
    double lo = 0.0;
    double hi = 0.0;
};

PermBracket exhaustive_permutation_bracket(const std::vector<int>& labels,
                                           const std::vector<double>& a,
                                           const std::vector<double>& b) {
    const std::size_t n = a.size();
    REQUIRE(n <= 16);
    const std::uint64_t na0 = num2_of(labels, a);
    const std::uint64_t nb0 = num2_of(labels, b);
    const std::uint64_t d_obs = na0 > nb0 ? na0 - nb0 : nb0 - na0;

    std::vector<double> pa(n), pb(n);
    long long strict = 0, tie_bitwise = 0, tie_other = 0;
    const long long total = 1LL << n;
    for (long long mask = 0; mask < total; ++mask) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool swap = (mask >> i) & 1;
            pa[i] = swap ? b[i] : a[i];
            pb[i] = swap ? a[i] : b[i];
        }
        const std::uint64_t na = num2_of(labels, pa);
        const std::uint64_t nb = num2_of(labels, pb);
        const std::uint64_t d = na > nb ? na - nb : nb - na;
        if (d > d_obs) ++strict;
        else if (d == d_obs) {
            if ((na == na0 && nb == nb0) || (na == nb0 && nb == na0)) ++tie_bitwise;
            else ++tie_other;
        }
    }
    PermBracket pb_out;
    pb_out.lo = static_cast<double>(strict + tie_bitwise) / static_cast<double>(total);
    pb_out.hi = static_cast<double>(strict + tie_bitwise + tie_other) / static_cast<double>(total);
    return pb_out;
}

std::vector<TileScore> make_tiles(const std::string& config, const std::vector<int>& labels,
                                  const std::vector<double>& ys) {
    std::vector<TileScore> tiles;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        TileScore t;
        t.config = config;
        t.tile_id = "t" + std::to_string(100 + i);
        t.patient_id = "p" + std::to_string(100 + i / 2); // two tiles per patient
        t.label = labels[i] ? Label::dn : Label::cmb;
        t.y = ys[i];
        tiles.push_back(t);
    }
    return tiles;
}

} // namespace

// ---- aggregation ----

TEST_CASE("aggregate: documented example, bounds, permutation invariance") {
    CHECK(aggregate({0.2, 0.4, 0.9}) == 0.5);
    CHECK(aggregate({0.7}) == 0.7);
    std::vector<double> v = {0.11, 0.93, 0.5, 0.02, 0.77, 0.31};
    const double base = aggregate(v);
    CHECK(base >= 0.02);
    CHECK(base <= 0.93);
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        rng.shuffle(v);
        REQUIRE(aggregate(v) == base); // bit-identical under permutation
    }
    CHECK_THROWS_AS(aggregate({}), Error);
}

// ---- AUC ----

TEST_CASE("auc matches brute-force pairwise counting on 200 random instances") {
    Rng rng(2718);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = 2 + rng.below(11); // up to 12
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(2));
            // coarse grid forces ties
            scores[i] = static_cast<double>(rng.below(8)) / 7.0;
            (labels[i] ? pos : neg) = true;
        }
        if (!pos) labels[0] = 1;
        if (!neg) labels[n - 1] = 0;
        const double got = auc_roc(labels, scores);
        const double want = brute_auc(labels, scores);
        REQUIRE(std::fabs(got - want) <= 1e-12);

        // exact complement symmetry, in doubles
        std::vector<int> flipped(labels);
        for (auto& l : flipped) l = 1 - l;
        REQUIRE(auc_roc(flipped, scores) + got == 1.0);

        // integer tie bookkeeping
        AucCounts c = auc_counts(labels, scores);
        AucCounts cf = auc_counts(flipped, scores);
        REQUIRE(c.pairs == cf.pairs);
        REQUIRE(c.ties == cf.ties);
        REQUIRE(cf.wins == c.pairs - c.wins - c.ties);
    }
}

TEST_CASE("auc handles degenerate and invalid inputs") {
    CHECK(auc_roc({1, 0}, {0.9, 0.1}) == 1.0);
    CHECK(auc_roc({1, 0}, {0.1, 0.9}) == 0.0);
    CHECK(auc_roc({1, 0}, {0.5, 0.5}) == 0.5);
    try {
        auc_roc({1, 1}, {0.5, 0.6});
        FAIL("expected single_class");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::single_class);
    }
    CHECK_THROWS_AS(auc_roc({1, 0}, {0.5}), Error);
    CHECK_THROWS_AS(auc_roc({1, 0}, {0.5, std::nan("")}), Error);
}

// ---- normal distribution helpers ----

TEST_CASE("normal_cdf known values") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-12));
    CHECK(normal_cdf(8.0) == doctest::Approx(1.0));
}

TEST_CASE("normal_quantile agrees with bisection of the cdf") {
    for (double p : {0.001, 0.01, 0.025, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.975, 0.999}) {
        CAPTURE(p);
        REQUIRE(normal_quantile(p) == doctest::Approx(phi_inv(p)).epsilon(1e-9));
        REQUIRE(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
    }
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
    CHECK_THROWS_AS(normal_quantile(0.0), Error);
    CHECK_THROWS_AS(normal_quantile(1.0), Error);
    CHECK_THROWS_AS(normal_quantile(-0.1), Error);
}

// ---- BCa bootstrap ----

TEST_CASE("bca interval for the sample mean matches the textbook oracle") {
    const std::vector<double> x = {2.1, 3.7, 1.2, 5.5, 4.8, 2.9, 6.3, 3.1, 4.0, 2.2};
    auto mean_stat = [&](const std::vector<std::size_t>& idx) {
        long double s = 0.0L;
        for (std::size_t i : idx) s += x[i];
        return static_cast<double>(s / static_cast<long double>(idx.size()));
    };
    auto always = [](const std::vector<std::size_t>&) { return true; };

    StatsConfig cfg;
    cfg.n_ci = 2000;
    cfg.alpha = 0.05;
    cfg.seed = 1;
    BootstrapCi got = bca_ci_stat(x.size(), mean_stat, always, cfg);
    BootstrapCi want = bca_mean_oracle(x, 2000, 0.05, 1);
    CHECK(got.lo == doctest::Approx(want.lo).epsilon(1e-9));
    CHECK(got.hi == doctest::Approx(want.hi).epsilon(1e-9));

    // second configuration: different B, alpha, seed
    cfg.n_ci = 999;
    cfg.alpha = 0.10;
    cfg.seed = 7;
    got = bca_ci_stat(x.size(), mean_stat, always, cfg);
    want = bca_mean_oracle(x, 999, 0.10, 7);
    CHECK(got.lo == doctest::Approx(want.lo).epsilon(1e-9));
    CHECK(got.hi == doctest::Approx(want.hi).epsilon(1e-9));
}

TEST_CASE("bca interval: zero-variance data degenerates to a point") {
    const std::vector<double> x(8, 3.25);
    auto mean_stat = [&](const std::vector<std::size_t>& idx) {
        double s = 0;
        for (std::size_t i : idx) s += x[i];
        return s / static_cast<double>(idx.size());
    };
    StatsConfig cfg;
    cfg.n_ci = 200;
    BootstrapCi ci = bca_ci_stat(x.size(), mean_stat, [](const auto&) { return true; }, cfg);
    CHECK(ci.lo == 3.25);
    CHECK(ci.hi == 3.25);
}

TEST_CASE("bca interval always contains the point estimate") {
    Rng rng(99);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t n = 20 + rng.below(30);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(2));
            scores[i] = rng.next_unit() + 0.3 * labels[i];
        }
        if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
        if (std::count(labels.begin(), labels.end(), 0) == 0) labels[0] = 0;
        StatsConfig cfg;
        cfg.n_ci = 300;
        cfg.seed = static_cast<std::uint64_t>(iter);
        const double auc = auc_roc(labels, scores);
        BootstrapCi ci = bca_ci(labels, scores, cfg);
        REQUIRE(ci.lo <= auc);
        REQUIRE(ci.hi >= auc);
        REQUIRE(ci.lo >= 0.0);
        REQUIRE(ci.hi <= 1.0);
    }
}

TEST_CASE("bootstrap intervals narrow as the sample grows") {
    auto median_width = [](std::size_t n, std::uint64_t seed_base) {
        std::vector<double> widths;
        for (int s = 0; s < 12; ++s) {
            Rng rng(seed_base + static_cast<std::uint64_t>(s));
            std::vector<int> labels(n);
            std::vector<double> scores(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = i % 2 == 0;
                scores[i] = rng.next_unit() + 0.5 * labels[i];
            }
            StatsConfig cfg;
            cfg.n_ci = 400;
            cfg.seed = static_cast<std::uint64_t>(s);
            BootstrapCi ci = bca_ci(labels, scores, cfg);
            widths.push_back(ci.hi - ci.lo);
        }
        std::sort(widths.begin(), widths.end());
        return widths[widths.size() / 2];
    };
    CHECK(median_width(400, 1000) < median_width(100, 2000));
}

TEST_CASE("bootstrap redraws degenerate resamples deterministically") {
    // 2 positives among 12: ~11% of resamples miss both and are redrawn;
    // the result must still be deterministic and contain the estimate
    std::vector<int> labels(12, 0);
    labels[3] = 1;
    labels[7] = 1;
    std::vector<double> scores;
    for (int i = 0; i < 12; ++i) scores.push_back(0.1 + 0.07 * i);
    StatsConfig cfg;
    cfg.n_ci = 500;
    cfg.seed = 5;
    BootstrapCi a = bca_ci(labels, scores, cfg);
    BootstrapCi b = bca_ci(labels, scores, cfg);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    const double auc = auc_roc(labels, scores);
    CHECK(a.lo <= auc);
    CHECK(a.hi >= auc);
}

TEST_CASE("bootstrap retry cap is an error, not a hang") {
    StatsConfig cfg;
    cfg.n_ci = 3;
    try {
        bca_ci_stat(4, [](const auto&) { return 0.0; }, [](const auto&) { return false; }, cfg);
        FAIL("expected infeasible");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::infeasible);
    }
}

TEST_CASE("grouped bootstrap with singleton groups equals the tile-level one") {
    Rng rng(17);
    std::vector<int> labels;
    std::vector<double> scores;
    std::vector<int> groups;
    for (int i = 0; i < 24; ++i) {
        labels.push_back(i % 2);
        scores.push_back(rng.next_unit() + 0.4 * (i % 2));
        groups.push_back(i);
    }
    StatsConfig cfg;
    cfg.n_ci = 400;
    cfg.seed = 11;
    BootstrapCi tile = bca_ci(labels, scores, cfg);
    BootstrapCi grouped = bca_ci_grouped(labels, scores, groups, cfg);
    CHECK(tile.lo == grouped.lo);
    CHECK(tile.hi == grouped.hi);
}

TEST_CASE("a class with no spare member makes the jackknife infeasible") {
    // one tile per class: leave-one-out would be single-class
    StatsConfig cfg;
    cfg.n_ci = 50;
    try {
        bca_ci({1, 0}, {0.9, 0.1}, cfg);
        FAIL("expected infeasible");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::infeasible);
        CHECK(std::string(e.what()).find("jackknife") != std::string::npos);
    }
    // grouped: all positives inside a single group
    std::vector<int> labels = {1, 1, 0, 0, 0, 0};
    std::vector<double> scores = {0.9, 0.8, 0.2, 0.3, 0.1, 0.4};
    std::vector<int> groups = {0, 0, 1, 1, 2, 2};
    try {
        bca_ci_grouped(labels, scores, groups, cfg);
        FAIL("expected infeasible");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::infeasible);
    }
}

TEST_CASE("grouped bootstrap validates group indices") {
    std::vector<int> labels = {0, 1, 0, 1};
    std::vector<double> scores = {0.1, 0.9, 0.2, 0.8};
    StatsConfig cfg;
    cfg.n_ci = 50;
    CHECK_THROWS_AS(bca_ci_grouped(labels, scores, {0, 1, 3, 3}, cfg), Error); // gap at 2
    CHECK_THROWS_AS(bca_ci_grouped(labels, scores, {0, -1, 1, 1}, cfg), Error);
    CHECK_THROWS_AS(bca_ci_grouped(labels, scores, {0, 0, 0, 0}, cfg), Error); // one group
}

// ---- permutation test ----

TEST_CASE("permutation p within 4 SE of the exhaustive enumeration") {
    Rng rng(424242);
    for (int iter = 0; iter < 20; ++iter) {
        const std::size_t n = 4 + rng.below(7); // 4..10
        std::vector<int> labels(n);
        std::vector<double> a(n), b(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(2));
            (labels[i] ? pos : neg) = true;
            // occasional exact ties between methods
            a[i] = static_cast<double>(rng.below(10)) / 9.0;
            b[i] = rng.below(3) == 0 ? a[i] : static_cast<double>(rng.below(10)) / 9.0;
        }
        if (!pos) labels[0] = 1;
        if (!neg) labels[n - 1] = 0;

        const PermBracket ex = exhaustive_permutation_bracket(labels, a, b);
        StatsConfig cfg;
        cfg.n_p = 10000;
        cfg.seed = static_cast<std::uint64_t>(1000 + iter);
        const double p_mc = permutation_test(labels, a, b, cfg);

        // add-one estimator converges to p + (1-p)/(1+n_p), monotone in p
        auto target = [&](double p) { return p + (1.0 - p) / (1.0 + cfg.n_p); };
        // widest sampling SE over the bracket
        const double pm = std::clamp(0.5, ex.lo, ex.hi);
        const double se = std::sqrt(pm * (1.0 - pm) / cfg.n_p);
        CAPTURE(iter);
        CAPTURE(ex.lo);
        CAPTURE(ex.hi);
        CAPTURE(p_mc);
        REQUIRE(p_mc >= target(ex.lo) - 4.0 * se - 1e-12);
        REQUIRE(p_mc <= target(ex.hi) + 4.0 * se + 1e-12);
    }
}

TEST_CASE("permutation test of a method against itself is exactly 1") {
    std::vector<int> labels = {1, 0, 1, 0, 1, 0};
    std::vector<double> s = {0.9, 0.2, 0.7, 0.4, 0.6, 0.5};
    StatsConfig cfg;
    cfg.n_p = 500;
    CHECK(permutation_test(labels, s, s, cfg) == 1.0);
}

TEST_CASE("permutation test is deterministic and flags a clear difference") {
    Rng rng(5150);
    const std::size_t n = 60;
    std::vector<int> labels(n);
    std::vector<double> strong(n), noise(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = i % 2 == 0;
        strong[i] = 0.2 * rng.next_unit() + 0.7 * labels[i];
        noise[i] = rng.next_unit();
    }
    StatsConfig cfg;
    cfg.n_p = 2000;
    cfg.seed = 31;
    const double p1 = permutation_test(labels, strong, noise, cfg);
    const double p2 = permutation_test(labels, strong, noise, cfg);
    CHECK(p1 == p2);
    CHECK(p1 < 0.01);
}

TEST_CASE("grouped permutation with singleton groups equals the tile-level one") {
    Rng rng(18);
    std::vector<int> labels;
    std::vector<double> a, b;
    std::vector<int> groups;
    for (int i = 0; i < 20; ++i) {
        labels.push_back(i % 2);
        a.push_back(rng.next_unit() + 0.3 * (i % 2));
        b.push_back(rng.next_unit());
        groups.push_back(i);
    }
    StatsConfig cfg;
    cfg.n_p = 1500;
    cfg.seed = 8;
    CHECK(permutation_test(labels, a, b, cfg) ==
          permutation_test_grouped(labels, a, b, groups, cfg));
}

// ---- prediction records and CSV ----

TEST_CASE("make_prediction pools crop scores by their mean") {
    PredictionRecord r = make_prediction("t1", "p1", Label::dn, {0.2, 0.4, 0.9});
    CHECK(r.y == 0.5);
    CHECK(r.y == aggregate(r.crop_scores));
    CHECK(r.label == Label::dn);
    CHECK_THROWS_AS(make_prediction("t1", "p1", Label::dn, {}), Error);
}

TEST_CASE("predictions csv round trip keeps full precision") {
    fs::path d = fs::temp_directory_path() / "mstile_pred_test";
    fs::remove_all(d);
    fs::create_directories(d);

    std::vector<PredictionRecord> recs;
    recs.push_back(make_prediction("t2", "p1", Label::dn, {0.123456789012345678, 0.5}));
    recs.push_back(make_prediction("t1", "p2", Label::cmb, {1.0 / 3.0}));
    write_predictions(recs, "t2000:i456:r456", d / "p.csv", "config_hash=aa seed=2");

    auto tiles = read_predictions(d / "p.csv");
    REQUIRE(tiles.size() == 2);
    CHECK(tiles[0].tile_id == "t1"); // sorted by tile id
    CHECK(tiles[0].y == 1.0 / 3.0);  // exact double round trip
    CHECK(tiles[0].label == Label::cmb);
    CHECK(tiles[1].y == aggregate({0.123456789012345678, 0.5}));
    CHECK(tiles[1].config == "t2000:i456:r456");

    write_crop_scores(recs, "t2000:i456:r456", d / "c.csv", "config_hash=aa seed=2");
    const std::string crops = read_file(d / "c.csv");
    CHECK(crops.find("t2,0,") != std::string::npos);
    CHECK(crops.find("t2,1,0.5") != std::string::npos);

    atomic_write_file(d / "bad.csv",
                      "config,tile_id,patient_id,label,y\nc,t1,p1,DN,1.5\n");
    CHECK_THROWS_AS(read_predictions(d / "bad.csv"), Error);
    fs::remove_all(d);
}

// ---- reports ----

TEST_CASE("build_report: summaries, comparisons, and run-order independence") {
    Rng rng(7);
    const std::size_t n = 40;
    std::vector<int> labels(n);
    std::vector<double> ya(n), yb(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = i < n / 2 ? 0 : 1;
        ya[i] = 0.25 * rng.next_unit() + 0.6 * labels[i];
        yb[i] = rng.next_unit() * 0.9 + 0.1 * labels[i];
    }
    RunInput run_a{"cfgA", make_tiles("cfgA", labels, ya)};
    RunInput run_b{"cfgB", make_tiles("cfgB", labels, yb)};

    StatsConfig cfg;
    cfg.n_ci = 500;
    cfg.n_p = 2000;
    cfg.seed = 21;
    EvalReport rep = build_report({run_a, run_b}, {{"cfgA", "cfgB"}}, cfg, ResampleUnit::tile);
    REQUIRE(rep.runs.size() == 2);
    REQUIRE(rep.comparisons.size() == 1);
    CHECK(rep.runs[0].config == "cfgA");
    CHECK(rep.runs[0].auc == auc_roc(labels, ya));
    CHECK(rep.runs[0].n == static_cast<std::int64_t>(n));
    CHECK(rep.runs[0].ci_lo <= rep.runs[0].auc);
    CHECK(rep.runs[0].ci_hi >= rep.runs[0].auc);
    CHECK(rep.comparisons[0].delta_auc ==
          doctest::Approx(rep.runs[0].auc - rep.runs[1].auc).epsilon(1e-15));
    CHECK(rep.comparisons[0].significant == (rep.comparisons[0].p < cfg.alpha));

    // listing the runs in the other order must not change any number
    EvalReport swapped = build_report({run_b, run_a}, {{"cfgA", "cfgB"}}, cfg, ResampleUnit::tile);
    CHECK(swapped.runs[0].config == "cfgB");
    CHECK(swapped.runs[1].auc == rep.runs[0].auc);
    CHECK(swapped.runs[1].ci_lo == rep.runs[0].ci_lo);
    CHECK(swapped.runs[1].ci_hi == rep.runs[0].ci_hi);
    CHECK(swapped.comparisons[0].p == rep.comparisons[0].p);
}

TEST_CASE("build_report at patient level uses grouped resampling") {
    std::vector<int> labels(20);
    std::vector<double> ys(20);
    Rng rng(12);
    for (std::size_t i = 0; i < 20; ++i) {
        labels[i] = i % 2;
        ys[i] = rng.next_unit() + 0.5 * labels[i];
    }
    RunInput run{"cfg", make_tiles("cfg", labels, ys)};
    StatsConfig cfg;
    cfg.n_ci = 300;
    cfg.n_p = 300;
    EvalReport tile_rep = build_report({run}, {}, cfg, ResampleUnit::tile);
    EvalReport pat_rep = build_report({run}, {}, cfg, ResampleUnit::patient);
    CHECK(pat_rep.runs[0].auc == tile_rep.runs[0].auc);
    CHECK(pat_rep.runs[0].ci_lo <= pat_rep.runs[0].auc);
    CHECK(pat_rep.runs[0].ci_hi >= pat_rep.runs[0].auc);
    // same data, different resampling unit: intervals need not coincide
}

TEST_CASE("build_report validates its inputs") {
    std::vector<int> labels = {0, 1, 0, 1};
    std::vector<double> ys = {0.1, 0.9, 0.3, 0.7};
    RunInput a{"A", make_tiles("A", labels, ys)};
    StatsConfig cfg;
    cfg.n_ci = 50;
    cfg.n_p = 50;

    RunInput dup = a;
    CHECK_THROWS_AS(build_report({a, dup}, {}, cfg, ResampleUnit::tile), Error);

    RunInput b{"B", make_tiles("B", labels, ys)};
    b.tiles.pop_back();
    CHECK_THROWS_AS(build_report({a, b}, {{"A", "B"}}, cfg, ResampleUnit::tile), Error);

    RunInput c{"C", make_tiles("C", labels, ys)};
    c.tiles[2].tile_id = c.tiles[1].tile_id; // duplicate tile within a run
    CHECK_THROWS_AS(build_report({c}, {}, cfg, ResampleUnit::tile), Error);

    CHECK_THROWS_AS(build_report({a}, {{"A", "missing"}}, cfg, ResampleUnit::tile), Error);
}

TEST_CASE("report json round trip and validation") {
    fs::path d = fs::temp_directory_path() / "mstile_report_test";
    fs::remove_all(d);
    fs::create_directories(d);

    EvalReport rep;
    rep.config_hash = "cafe";
    rep.seed = 42;
    rep.runs.push_back({"cfgA", 0.9090909090909091, 0.89, 0.93, 100});
    rep.comparisons.push_back({"cfgA", "cfgB", 0.0637, 0.0123, true});
    write_report(rep, d / "r.json");
    EvalReport back = read_report(d / "r.json");
    CHECK(back.config_hash == "cafe");
    CHECK(back.seed == 42);
    REQUIRE(back.runs.size() == 1);
    CHECK(back.runs[0].auc == rep.runs[0].auc); // exact double round trip
    CHECK(back.runs[0].n == 100);
    REQUIRE(back.comparisons.size() == 1);
    CHECK(back.comparisons[0].p == 0.0123);
    CHECK(back.comparisons[0].significant);

    // a report whose interval excludes its own estimate is rejected
    EvalReport bad = rep;
    bad.runs[0].ci_lo = 0.95;
    write_report(bad, d / "bad.json");
    CHECK_THROWS_AS(read_report(d / "bad.json"), Error);
    fs::remove_all(d);
}

TEST_CASE("human-readable summary lines scale to percent") {
    RunSummary r{"t4000:i2000:r456", 0.909, 0.8901, 0.9302, 100};
    const std::string line = format_run_summary(r);
    CHECK(line.find("t4000:i2000:r456") != std::string::npos);
    CHECK(line.find("90.90") != std::string::npos);
    CHECK(line.find("89.01") != std::string::npos);
    CHECK(line.find("93.02") != std::string::npos);
    ComparisonRow c{"A", "B", 0.0637, 0.0123, true};
    const std::string cline = format_comparison(c);
    CHECK(cline.find("6.37") != std::string::npos);
    CHECK(cline.find("0.0123") != std::string::npos);
}
