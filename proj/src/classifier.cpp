#include "mstile/classifier.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "mstile/util/fsio.hpp"
#include "mstile/util/rng.hpp"
#include "mstile/util/text.hpp"

namespace fs = std::filesystem;

namespace mstile {

namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

// Rec.601 luminance scaled by 1000 so everything stays integer: 299R+587G+114B.
// Coefficients sum to 1000, so a gray pixel v maps to 1000*v.
inline std::int32_t lum1000(const std::uint8_t* px) {
    return 299 * px[0] + 587 * px[1] + 114 * px[2];
}

// Variance numerators (nw^2 * population variance, (luminance*1000)^2 units)
// of every fully-contained win x win window, row-major. Exact integers, so
// the derived features are bit-identical for flipped crops. Empty when no
// window fits.
std::vector<u64> window_variance_numerators(const std::vector<std::int32_t>& lum, int w, int h,
                                            int win) {
    if (w < win || h < win) return {};
    const std::size_t stride = static_cast<std::size_t>(w) + 1;
    std::vector<u64> sat(stride * (static_cast<std::size_t>(h) + 1), 0);
    std::vector<u64> sat2(sat.size(), 0);
    for (int y = 0; y < h; ++y) {
        u64 row = 0, row2 = 0;
        for (int x = 0; x < w; ++x) {
            const u64 v = static_cast<u64>(lum[static_cast<std::size_t>(y) * w + x]);
            row += v;
            row2 += v * v;
            const std::size_t at = (static_cast<std::size_t>(y) + 1) * stride + x + 1;
            sat[at] = sat[at - stride] + row;
            sat2[at] = sat2[at - stride] + row2;
        }
    }
    auto rect = [&](const std::vector<u64>& s, int x, int y) {
        return s[(static_cast<std::size_t>(y) + win) * stride + x + win] -
               s[(static_cast<std::size_t>(y) + win) * stride + x] -
               s[static_cast<std::size_t>(y) * stride + x + win] +
               s[static_cast<std::size_t>(y) * stride + x];
    };
    const u64 nw = static_cast<u64>(win) * static_cast<u64>(win);
    std::vector<u64> nums;
    nums.reserve(static_cast<std::size_t>(w - win + 1) * static_cast<std::size_t>(h - win + 1));
    for (int y = 0; y + win <= h; ++y)
        for (int x = 0; x + win <= w; ++x) {
            const u64 s = rect(sat, x, y);
            const u64 s2 = rect(sat2, x, y);
            nums.push_back(nw * s2 - s * s);
        }
    return nums;
}

inline double sigmoid_raw(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double dot_z(const BaselineModel& m, const FeatureVector& raw) {
    const FeatureVector x = m.standardization.apply(raw);
    double z = m.bias;
    for (int d = 0; d < kFeatureDim; ++d) z += m.weights[d] * x[d];
    return z;
}

} // namespace

FeatureVector featurize(const Raster& crop) {
    const int w = crop.width, h = crop.height;
    if (w < 1 || h < 1 || crop.data.size() != static_cast<std::size_t>(w) * h * 3)
        fail(Error::Kind::invalid_argument, "featurize: malformed raster");
    const std::size_t n = static_cast<std::size_t>(w) * h;

    u64 csum[3] = {0, 0, 0}, csum2[3] = {0, 0, 0};
    std::vector<std::int32_t> lum(n);
    const std::uint8_t* px = crop.data.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const u64 v = px[3 * i + c];
            csum[c] += v;
            csum2[c] += v * v;
        }
        lum[i] = lum1000(px + 3 * i);
    }

    FeatureVector f{};
    const double dn = static_cast<double>(n);
    for (int c = 0; c < 3; ++c) {
        f[c] = static_cast<double>(csum[c]) / dn;
        const u64 num = csum2[c] * n - csum[c] * csum[c]; // n*E[v^2] - (E v)^2, scaled by n^2
        f[3 + c] = std::sqrt(static_cast<double>(num)) / dn;
    }

    // |dx|+|dy| of luminance, central differences without the 1/2 factor and
    // clamped borders; range [0,510] -> 8 bins of width 63.75 (63750 in
    // luminance*1000 units, exact in integers).
    u64 hist[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    auto L = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * w + x]; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int gx = std::abs(L(std::min(x + 1, w - 1), y) - L(std::max(x - 1, 0), y));
            const int gy = std::abs(L(x, std::min(y + 1, h - 1)) - L(x, std::max(y - 1, 0)));
            ++hist[std::min(7, (gx + gy) / 63750)];
        }
    for (int i = 0; i < 8; ++i) f[6 + i] = static_cast<double>(hist[i]) / dn;

    // texture share + void fraction over 8x8 windows. Window numerators are
    // nw^2-scaled variances (< 2^48, exact in doubles); the crop-variance
    // numerator needs 128 bits. "Below half the median" is the exact integer
    // comparison 2*num < median, median = (count+1)/2-th smallest.
    const std::vector<u64> nums = window_variance_numerators(lum, w, h, 8);
    if (!nums.empty()) {
        u64 lsum = 0;
        u128 lsum2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const u64 v = static_cast<u64>(lum[i]);
            lsum += v;
            lsum2 += static_cast<u128>(v) * v;
        }
        const u128 crop_num = static_cast<u128>(n) * lsum2 - static_cast<u128>(lsum) * lsum;
        if (crop_num > 0) {
            u128 total = 0;
            for (u64 v : nums) total += v;
            const double mean_win =
                static_cast<double>(total) / (static_cast<double>(nums.size()) * 64.0 * 64.0);
            const double crop_var = static_cast<double>(crop_num) / (dn * dn);
            f[14] = mean_win / crop_var;
        }
        std::vector<u64> order(nums);
        const std::size_t mid = (order.size() - 1) / 2;
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mid),
                         order.end());
        const u64 median = order[mid];
        u64 voids = 0;
        for (u64 v : nums)
            if (2 * v < median) ++voids;
        f[15] = static_cast<double>(voids) / static_cast<double>(nums.size());
    }
    return f;
}

Standardization fit_standardization(const std::vector<FeatureVector>& features) {
    if (features.empty()) fail(Error::Kind::invalid_argument, "cannot standardize an empty feature set");
    Standardization st;
    const double k = static_cast<double>(features.size());
    for (const auto& f : features)
        for (int d = 0; d < kFeatureDim; ++d) st.mean[d] += f[d];
    for (int d = 0; d < kFeatureDim; ++d) st.mean[d] /= k;
    std::array<double, kFeatureDim> var{};
    for (const auto& f : features)
        for (int d = 0; d < kFeatureDim; ++d) {
            const double diff = f[d] - st.mean[d];
            var[d] += diff * diff;
        }
    for (int d = 0; d < kFeatureDim; ++d) {
        const double s = std::sqrt(var[d] / k);
        // treat numerically-zero variance as zero so constant dims don't blow up
        st.std[d] = s < 1e-9 ? 1.0 : s;
    }
    return st;
}

double logistic_loss(const BaselineModel& model, const std::vector<FeatureVector>& features,
                     const std::vector<int>& labels, const ClassWeights& cw,
                     const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (std::size_t i : idx) {
        const double z = dot_z(model, features[i]);
        const int y = labels[i];
        const double wt = y ? cw.dn : cw.cmb;
        // stable -y log p - (1-y) log(1-p) = max(z,0) - y z + log1p(exp(-|z|))
        total += wt * (std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z))));
    }
    return total / static_cast<double>(idx.size());
}

void logistic_gradient(const BaselineModel& model, const std::vector<FeatureVector>& features,
                       const std::vector<int>& labels, const ClassWeights& cw,
                       const std::vector<std::size_t>& idx,
                       std::array<double, kFeatureDim>& grad_w, double& grad_b) {
    grad_w.fill(0.0);
    grad_b = 0.0;
    for (std::size_t i : idx) {
        const FeatureVector x = model.standardization.apply(features[i]);
        double z = model.bias;
        for (int d = 0; d < kFeatureDim; ++d) z += model.weights[d] * x[d];
        const double wt = labels[i] ? cw.dn : cw.cmb;
        const double g = wt * (sigmoid_raw(z) - labels[i]);
        for (int d = 0; d < kFeatureDim; ++d) grad_w[d] += g * x[d];
        grad_b += g;
    }
    const double k = static_cast<double>(idx.size());
    for (int d = 0; d < kFeatureDim; ++d) grad_w[d] /= k;
    grad_b /= k;
}

TrainResult train_logistic(const std::vector<FeatureVector>& features,
                           const std::vector<int>& labels, const TrainConfig& cfg) {
    if (features.size() != labels.size())
        fail(Error::Kind::invalid_argument, "feature/label count mismatch");
    if (features.empty()) fail(Error::Kind::invalid_argument, "no training examples");
    if (cfg.epochs < 1) fail(Error::Kind::invalid_argument, "epochs must be >= 1");
    if (cfg.batch_size < 1) fail(Error::Kind::invalid_argument, "batch_size must be >= 1");
    if (!(cfg.learning_rate > 0)) fail(Error::Kind::invalid_argument, "learning_rate must be > 0");
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) fail(Error::Kind::invalid_argument, "labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    if (pos == 0 || pos == labels.size())
        fail(Error::Kind::single_class, "training data contains a single class");

    TrainResult result;
    BaselineModel& m = result.model;
    m.standardization = fit_standardization(features);

    const std::size_t n = features.size();
    std::vector<std::size_t> order(n), all(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::array<double, kFeatureDim> gw{};
    double gb = 0.0;
    std::vector<std::size_t> batch;
    for (int e = 0; e < cfg.epochs; ++e) {
        Rng rng(derive_seed(cfg.seed, "epoch-shuffle", {static_cast<std::uint64_t>(e)}));
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            logistic_gradient(m, features, labels, cfg.class_weights, batch, gw, gb);
            for (int d = 0; d < kFeatureDim; ++d) m.weights[d] -= cfg.learning_rate * gw[d];
            m.bias -= cfg.learning_rate * gb;
        }
        result.epoch_loss.push_back(logistic_loss(m, features, labels, cfg.class_weights, all));
    }
    return result;
}

TrainResult train_baseline(const std::vector<Raster>& crops, const std::vector<int>& labels,
                           const TrainConfig& cfg) {
    std::vector<FeatureVector> features;
    features.reserve(crops.size());
    for (const auto& c : crops) features.push_back(featurize(c));
    return train_logistic(features, labels, cfg);
}

double predict_features(const BaselineModel& model, const FeatureVector& f) {
    // clamp keeps scores strictly inside (0,1) even where double rounding of
    // the sigmoid would hit 0 or 1 exactly
    return std::clamp(sigmoid_raw(dot_z(model, f)), 1e-12, 1.0 - 1e-12);
}

double predict(const BaselineModel& model, const Raster& crop) {
    return predict_features(model, featurize(crop));
}

void save_model(const BaselineModel& model, const fs::path& path, const std::string& provenance) {
    nlohmann::json j;
    j["format_version"] = 1;
    if (!provenance.empty()) j["provenance"] = provenance;
    j["weights"] = std::vector<double>(model.weights.begin(), model.weights.end());
    j["bias"] = model.bias;
    j["feature_mean"] =
        std::vector<double>(model.standardization.mean.begin(), model.standardization.mean.end());
    j["feature_std"] =
        std::vector<double>(model.standardization.std.begin(), model.standardization.std.end());
    atomic_write_file(path, j.dump(2) + "\n");
}

BaselineModel load_model(const fs::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        fail(Error::Kind::corrupt_data, "model file is not valid JSON: " + path.string());
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
        fail(Error::Kind::corrupt_data, "model file missing format_version: " + path.string());
    if (j["format_version"].get<int>() != 1)
        fail(Error::Kind::unsupported_format,
             "unsupported model format_version in " + path.string());
    auto read_vec = [&](const char* key, std::array<double, kFeatureDim>& out) {
        if (!j.contains(key) || !j[key].is_array() || j[key].size() != kFeatureDim)
            fail(Error::Kind::corrupt_data,
                 std::string("model field '") + key + "' must be a length-16 array: " + path.string());
        for (int d = 0; d < kFeatureDim; ++d) {
            if (!j[key][static_cast<std::size_t>(d)].is_number())
                fail(Error::Kind::corrupt_data, std::string("non-numeric entry in '") + key + "'");
            out[static_cast<std::size_t>(d)] = j[key][static_cast<std::size_t>(d)].get<double>();
        }
    };
    BaselineModel m;
    read_vec("weights", m.weights);
    read_vec("feature_mean", m.standardization.mean);
    read_vec("feature_std", m.standardization.std);
    if (!j.contains("bias") || !j["bias"].is_number())
        fail(Error::Kind::corrupt_data, "model field 'bias' must be a number: " + path.string());
    m.bias = j["bias"].get<double>();
    for (double s : m.standardization.std)
        if (!(s > 0))
            fail(Error::Kind::corrupt_data, "model standardization stds must be > 0: " + path.string());
    return m;
}

std::vector<double> score_external(const std::vector<fs::path>& crop_files,
                                   const std::string& command) {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });

    std::string input;
    for (const auto& p : crop_files) {
        input += fs::absolute(p).string();
        input += '\n';
    }

    int in_pipe[2] = {-1, -1}, out_pipe[2] = {-1, -1};
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
        fail(Error::Kind::io_failure, "cannot create pipes for external scorer");
    const pid_t pid = ::fork();
    if (pid < 0) fail(Error::Kind::io_failure, "cannot fork external scorer");
    if (pid == 0) {
        ::dup2(in_pipe[0], 0);
        ::dup2(out_pipe[1], 1);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);

    // feed paths from a separate thread so a scorer that interleaves reading
    // and writing can't deadlock us on full pipes
    std::thread writer([&] {
        const char* data = input.data();
        std::size_t left = input.size();
        while (left > 0) {
            const ssize_t k = ::write(in_pipe[1], data, left);
            if (k <= 0) break; // EPIPE: scorer stopped reading early; its exit code decides
            data += k;
            left -= static_cast<std::size_t>(k);
        }
        ::close(in_pipe[1]);
    });

    std::string output;
    char buf[4096];
    for (;;) {
        const ssize_t k = ::read(out_pipe[0], buf, sizeof buf);
        if (k > 0) {
            output.append(buf, static_cast<std::size_t>(k));
        } else if (k == 0 || errno != EINTR) {
            break;
        }
    }
    ::close(out_pipe[0]);
    writer.join();

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {}
    if (!WIFEXITED(status))
        fail(Error::Kind::scorer_contract, "external scorer terminated abnormally");
    if (WEXITSTATUS(status) != 0)
        fail(Error::Kind::scorer_contract,
             "external scorer exited with code " + std::to_string(WEXITSTATUS(status)));

    auto lines = split(output, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() != crop_files.size())
        fail(Error::Kind::scorer_contract,
             "external scorer emitted " + std::to_string(lines.size()) + " scores for " +
                 std::to_string(crop_files.size()) + " crops");
    std::vector<double> scores;
    scores.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        double v = 0.0;
        auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
        if (ec != std::errc{} || p != line.data() + line.size())
            fail(Error::Kind::scorer_contract, "external scorer line " + std::to_string(i + 1) +
                                                   " is not a decimal score: '" +
                                                   std::string(line) + "'");
        if (!(v >= 0.0 && v <= 1.0))
            fail(Error::Kind::scorer_contract, "external scorer line " + std::to_string(i + 1) +
                                                   " is out of [0,1]: '" + std::string(line) + "'");
        scores.push_back(v);
    }
    return scores;
}

} // namespace mstile
