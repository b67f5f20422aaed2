#include "mstile/config.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "mstile/util/fsio.hpp"
#include "mstile/util/rng.hpp"
#include "mstile/util/text.hpp"

namespace mstile {

std::string ConfigTriple::name() const {
    return "t" + std::to_string(tile) + ":i" + std::to_string(intermediate) + ":r" +
           std::to_string(input);
}

std::string ConfigTriple::dir_name() const {
    return "t" + std::to_string(tile) + "_i" + std::to_string(intermediate) + "_r" +
           std::to_string(input);
}

ConfigTriple parse_config_triple(std::string_view s) {
    const auto parts = split(s, ':');
    if (parts.size() != 3 || parts[0].size() < 2 || parts[1].size() < 2 || parts[2].size() < 2 ||
        parts[0][0] != 't' || parts[1][0] != 'i' || parts[2][0] != 'r')
        fail(Error::Kind::config_invalid,
             "config triple must look like t4000:i2000:r456, got '" + std::string(s) + "'");
    ConfigTriple t;
    t.tile = static_cast<int>(parse_int(parts[0].substr(1), "triple tile size"));
    t.intermediate = static_cast<int>(parse_int(parts[1].substr(1), "triple intermediate size"));
    t.input = static_cast<int>(parse_int(parts[2].substr(1), "triple input resolution"));
    return t;
}

namespace {

std::vector<int> parse_int_list(std::string_view v, std::string_view what) {
    std::vector<int> out;
    for (auto part : split(v, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        out.push_back(static_cast<int>(parse_int(part, what)));
    }
    if (out.empty()) fail(Error::Kind::config_invalid, "empty list for " + std::string(what));
    return out;
}

std::pair<double, double> parse_range(std::string_view v, std::string_view what) {
    const auto parts = split(v, ',');
    if (parts.size() != 2)
        fail(Error::Kind::config_invalid, std::string(what) + " needs 'lo,hi'");
    return {parse_double(trim(parts[0]), what), parse_double(trim(parts[1]), what)};
}

} // namespace

void apply_config_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    const std::string k(trim(key));
    const std::string v(trim(value));
    auto as_int = [&](std::string_view what) { return static_cast<int>(parse_int(v, what)); };
    auto as_double = [&](std::string_view what) { return parse_double(v, what); };

    if (k == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(v, "seed"));
    else if (k == "jobs") cfg.jobs = as_int("jobs");
    else if (k == "workdir") cfg.workdir = v;
    else if (k == "cohort.n_cmb") cfg.n_cmb = as_int("cohort.n_cmb");
    else if (k == "cohort.n_dn") cfg.n_dn = as_int("cohort.n_dn");
    else if (k == "synth.wsi_size") cfg.synth.wsi_size = as_int(k);
    else if (k == "synth.nodule_density") cfg.synth.nodule_density = as_double(k);
    else if (k == "synth.nodule_radius_min") cfg.synth.nodule_radius_min = as_int(k);
    else if (k == "synth.nodule_radius_max") cfg.synth.nodule_radius_max = as_int(k);
    else if (k == "synth.nodule_contrast") cfg.synth.nodule_contrast = as_double(k);
    else if (k == "synth.fine_texture_scale") cfg.synth.fine_texture_scale = as_int(k);
    else if (k == "synth.noise_std") cfg.synth.noise_std = as_double(k);
    else if (k == "synth.base_color") {
        const auto c = parse_int_list(v, k);
        if (c.size() != 3) fail(Error::Kind::config_invalid, "synth.base_color needs r,g,b");
        cfg.synth.base_color = {c[0], c[1], c[2]};
    } else if (k == "synth.micro_texture_scale") cfg.synth.micro_texture_scale = as_int(k);
    else if (k == "synth.micro_texture_std") cfg.synth.micro_texture_std = as_double(k);
    else if (k == "synth.mid_texture_scale") cfg.synth.mid_texture_scale = as_int(k);
    else if (k == "synth.mid_texture_std") cfg.synth.mid_texture_std = as_double(k);
    else if (k == "synth.dead_density") cfg.synth.dead_density = as_double(k);
    else if (k == "synth.dead_radius_min") cfg.synth.dead_radius_min = as_int(k);
    else if (k == "synth.dead_radius_max") cfg.synth.dead_radius_max = as_int(k);
    else if (k == "synth.dead_strength") cfg.synth.dead_strength = as_double(k);
    else if (k == "synth.base_field_scale") cfg.synth.base_field_scale = as_int(k);
    else if (k == "synth.base_field_std") cfg.synth.base_field_std = as_double(k);
    else if (k == "synth.texture_jitter") cfg.synth.texture_jitter = as_double(k);
    else if (k == "tile.sizes") cfg.tile_sizes = parse_int_list(v, k);
    else if (k == "tile.intermediate_sizes") cfg.intermediate_sizes = parse_int_list(v, k);
    else if (k == "tile.input_resolution") cfg.input_resolution = as_int(k);
    else if (k == "configs") {
        cfg.configs.clear();
        for (auto part : split(v, ',')) {
            part = trim(part);
            if (!part.empty()) cfg.configs.push_back(parse_config_triple(part));
        }
    } else if (k == "folds.k") cfg.folds_k = as_int(k);
    else if (k == "folds.test_cmb") cfg.test_quota.cmb = as_int(k);
    else if (k == "folds.test_dn") cfg.test_quota.dn = as_int(k);
    else if (k == "folds.val_cmb") cfg.val_quota.cmb = as_int(k);
    else if (k == "folds.val_dn") cfg.val_quota.dn = as_int(k);
    else if (k == "train.crops_per_tile") cfg.crops_per_tile = as_int(k);
    else if (k == "train.epochs") cfg.train.epochs = as_int(k);
    else if (k == "train.batch_size") cfg.train.batch_size = as_int(k);
    else if (k == "train.learning_rate") cfg.train.learning_rate = as_double(k);
    else if (k == "augment.brightness")
        std::tie(cfg.augment.brightness_lo, cfg.augment.brightness_hi) = parse_range(v, k);
    else if (k == "augment.contrast")
        std::tie(cfg.augment.contrast_lo, cfg.augment.contrast_hi) = parse_range(v, k);
    else if (k == "augment.saturation")
        std::tie(cfg.augment.saturation_lo, cfg.augment.saturation_hi) = parse_range(v, k);
    else if (k == "augment.hue_shift")
        std::tie(cfg.augment.hue_shift_lo, cfg.augment.hue_shift_hi) = parse_range(v, k);
    else if (k == "augment.flip_h_prob") cfg.augment.flip_h_prob = as_double(k);
    else if (k == "augment.flip_v_prob") cfg.augment.flip_v_prob = as_double(k);
    else if (k == "stats.n_ci") cfg.stats.n_ci = as_int(k);
    else if (k == "stats.n_p") cfg.stats.n_p = as_int(k);
    else if (k == "stats.alpha") cfg.stats.alpha = as_double(k);
    else if (k == "stats.unit") {
        if (v == "tile") cfg.stats_unit = ResampleUnit::tile;
        else if (v == "patient") cfg.stats_unit = ResampleUnit::patient;
        else fail(Error::Kind::config_invalid, "stats.unit must be 'tile' or 'patient'");
    } else if (k == "scorer.command") cfg.scorer_command = v;
    else fail(Error::Kind::config_invalid, "unknown config key '" + k + "'");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig cfg;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(Error::Kind::config_invalid,
                 "config line " + std::to_string(line_no) + " is not 'key = value': '" +
                     std::string(line) + "'");
        apply_config_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_file(path));
}

namespace {

void check_triple(const ConfigTriple& t) {
    if (t.input < 1 || t.intermediate < 1 || t.tile < 1)
        fail(Error::Kind::config_invalid, "config " + t.name() + ": sizes must be positive");
    if (t.intermediate > t.tile)
        fail(Error::Kind::config_invalid,
             "config " + t.name() + ": intermediate must not exceed tile size");
    if (t.input > t.intermediate)
        fail(Error::Kind::config_invalid,
             "config " + t.name() + ": input resolution must not exceed intermediate size");
}

} // namespace

std::vector<ConfigTriple> resolve_triples(const ExperimentConfig& cfg) {
    std::vector<ConfigTriple> out;
    if (!cfg.configs.empty()) {
        out = cfg.configs;
    } else {
        for (int tile : cfg.tile_sizes)
            for (int inter : cfg.intermediate_sizes)
                if (inter <= tile && cfg.input_resolution <= inter)
                    out.push_back({tile, inter, cfg.input_resolution});
    }
    if (out.empty())
        fail(Error::Kind::config_invalid, "no evaluable configuration triples");
    std::set<std::string> seen;
    for (const auto& t : out) {
        check_triple(t);
        if (!seen.insert(t.name()).second)
            fail(Error::Kind::config_invalid, "duplicate config triple " + t.name());
    }
    return out;
}

void validate_experiment_config(const ExperimentConfig& cfg) {
    if (cfg.jobs < 1) fail(Error::Kind::config_invalid, "jobs must be >= 1");
    if (cfg.n_cmb < 1 || cfg.n_dn < 1)
        fail(Error::Kind::config_invalid, "cohort needs at least one patient per class");
    validate_synth_params(cfg.synth);
    const auto triples = resolve_triples(cfg);
    for (const auto& t : triples)
        if (t.tile > cfg.synth.wsi_size)
            fail(Error::Kind::config_invalid, "config " + t.name() + ": tile size " +
                                                  std::to_string(t.tile) +
                                                  " exceeds synth.wsi_size " +
                                                  std::to_string(cfg.synth.wsi_size));
    if (cfg.folds_k < 1) fail(Error::Kind::config_invalid, "folds.k must be >= 1");
    if (cfg.test_quota.cmb < 0 || cfg.test_quota.dn < 0 || cfg.val_quota.cmb < 0 ||
        cfg.val_quota.dn < 0)
        fail(Error::Kind::config_invalid, "fold quotas must be >= 0");
    if (static_cast<std::int64_t>(cfg.folds_k) * cfg.test_quota.cmb > cfg.n_cmb ||
        static_cast<std::int64_t>(cfg.folds_k) * cfg.test_quota.dn > cfg.n_dn)
        fail(Error::Kind::config_invalid, "fold test quotas exceed cohort class counts");
    if (cfg.n_cmb - cfg.test_quota.cmb < cfg.val_quota.cmb ||
        cfg.n_dn - cfg.test_quota.dn < cfg.val_quota.dn)
        fail(Error::Kind::config_invalid, "fold validation quotas exceed remaining patients");
    if (cfg.crops_per_tile < 1) fail(Error::Kind::config_invalid, "train.crops_per_tile must be >= 1");
    if (cfg.train.epochs < 1) fail(Error::Kind::config_invalid, "train.epochs must be >= 1");
    if (cfg.train.batch_size < 1) fail(Error::Kind::config_invalid, "train.batch_size must be >= 1");
    if (!(cfg.train.learning_rate > 0))
        fail(Error::Kind::config_invalid, "train.learning_rate must be > 0");
    if (cfg.stats.n_ci < 1 || cfg.stats.n_p < 1)
        fail(Error::Kind::config_invalid, "stats.n_ci and stats.n_p must be >= 1");
    if (!(cfg.stats.alpha > 0 && cfg.stats.alpha < 1))
        fail(Error::Kind::config_invalid, "stats.alpha must be in (0,1)");
    auto check_range = [](double lo, double hi, const char* what) {
        if (!(lo <= hi)) fail(Error::Kind::config_invalid, std::string(what) + ": lo must be <= hi");
    };
    check_range(cfg.augment.brightness_lo, cfg.augment.brightness_hi, "augment.brightness");
    check_range(cfg.augment.contrast_lo, cfg.augment.contrast_hi, "augment.contrast");
    check_range(cfg.augment.saturation_lo, cfg.augment.saturation_hi, "augment.saturation");
    check_range(cfg.augment.hue_shift_lo, cfg.augment.hue_shift_hi, "augment.hue_shift");
    if (cfg.augment.brightness_lo < 0 || cfg.augment.contrast_lo < 0 ||
        cfg.augment.saturation_lo < 0)
        fail(Error::Kind::config_invalid, "augment factors must be >= 0");
    if (cfg.augment.flip_h_prob < 0 || cfg.augment.flip_h_prob > 1 ||
        cfg.augment.flip_v_prob < 0 || cfg.augment.flip_v_prob > 1)
        fail(Error::Kind::config_invalid, "flip probabilities must be in [0,1]");
}

std::string render_config(const ExperimentConfig& cfg) {
    std::string s;
    auto kv = [&](std::string_view key, const std::string& value) {
        s += key;
        s += " = ";
        s += value;
        s += '\n';
    };
    auto join_ints = [](const std::vector<int>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(v[i]);
        }
        return out;
    };
    auto range = [](double lo, double hi) { return format_double(lo) + "," + format_double(hi); };

    kv("seed", std::to_string(cfg.seed));
    kv("cohort.n_cmb", std::to_string(cfg.n_cmb));
    kv("cohort.n_dn", std::to_string(cfg.n_dn));
    kv("synth.wsi_size", std::to_string(cfg.synth.wsi_size));
    kv("synth.nodule_density", format_double(cfg.synth.nodule_density));
    kv("synth.nodule_radius_min", std::to_string(cfg.synth.nodule_radius_min));
    kv("synth.nodule_radius_max", std::to_string(cfg.synth.nodule_radius_max));
    kv("synth.nodule_contrast", format_double(cfg.synth.nodule_contrast));
    kv("synth.fine_texture_scale", std::to_string(cfg.synth.fine_texture_scale));
    kv("synth.noise_std", format_double(cfg.synth.noise_std));
    kv("synth.base_color", join_ints({cfg.synth.base_color[0], cfg.synth.base_color[1],
                                      cfg.synth.base_color[2]}));
    kv("synth.micro_texture_scale", std::to_string(cfg.synth.micro_texture_scale));
    kv("synth.micro_texture_std", format_double(cfg.synth.micro_texture_std));
    kv("synth.mid_texture_scale", std::to_string(cfg.synth.mid_texture_scale));
    kv("synth.mid_texture_std", format_double(cfg.synth.mid_texture_std));
    kv("synth.dead_density", format_double(cfg.synth.dead_density));
    kv("synth.dead_radius_min", std::to_string(cfg.synth.dead_radius_min));
    kv("synth.dead_radius_max", std::to_string(cfg.synth.dead_radius_max));
    kv("synth.dead_strength", format_double(cfg.synth.dead_strength));
    kv("synth.base_field_scale", std::to_string(cfg.synth.base_field_scale));
    kv("synth.base_field_std", format_double(cfg.synth.base_field_std));
    kv("synth.texture_jitter", format_double(cfg.synth.texture_jitter));
    if (!cfg.configs.empty()) {
        std::string list;
        for (std::size_t i = 0; i < cfg.configs.size(); ++i) {
            if (i) list += ',';
            list += cfg.configs[i].name();
        }
        kv("configs", list);
    } else {
        kv("tile.sizes", join_ints(cfg.tile_sizes));
        kv("tile.intermediate_sizes", join_ints(cfg.intermediate_sizes));
        kv("tile.input_resolution", std::to_string(cfg.input_resolution));
    }
    kv("folds.k", std::to_string(cfg.folds_k));
    kv("folds.test_cmb", std::to_string(cfg.test_quota.cmb));
    kv("folds.test_dn", std::to_string(cfg.test_quota.dn));
    kv("folds.val_cmb", std::to_string(cfg.val_quota.cmb));
    kv("folds.val_dn", std::to_string(cfg.val_quota.dn));
    kv("train.crops_per_tile", std::to_string(cfg.crops_per_tile));
    kv("train.epochs", std::to_string(cfg.train.epochs));
    kv("train.batch_size", std::to_string(cfg.train.batch_size));
    kv("train.learning_rate", format_double(cfg.train.learning_rate));
    kv("augment.brightness", range(cfg.augment.brightness_lo, cfg.augment.brightness_hi));
    kv("augment.contrast", range(cfg.augment.contrast_lo, cfg.augment.contrast_hi));
    kv("augment.saturation", range(cfg.augment.saturation_lo, cfg.augment.saturation_hi));
    kv("augment.hue_shift", range(cfg.augment.hue_shift_lo, cfg.augment.hue_shift_hi));
    kv("augment.flip_h_prob", format_double(cfg.augment.flip_h_prob));
    kv("augment.flip_v_prob", format_double(cfg.augment.flip_v_prob));
    kv("stats.n_ci", std::to_string(cfg.stats.n_ci));
    kv("stats.n_p", std::to_string(cfg.stats.n_p));
    kv("stats.alpha", format_double(cfg.stats.alpha));
    kv("stats.unit", to_string(cfg.stats_unit));
    kv("scorer.command", cfg.scorer_command);
    return s;
}

std::string config_hash(const ExperimentConfig& cfg) {
    return hex64(fnv1a64(render_config(cfg)));
}

} // namespace mstile
