#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mstile/config.hpp"
#include "mstile/util/fsio.hpp"

using namespace mstile;
namespace fs = std::filesystem;

namespace {

void expect_config_invalid(const std::string& text, const std::string& needle) {
    try {
        ExperimentConfig cfg = parse_experiment_config(text);
        validate_experiment_config(cfg);
        FAIL(("expected config_invalid for: " + text));
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::config_invalid);
        CAPTURE(needle);
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
}

} // namespace

TEST_CASE("config triples parse, render and reject malformed text") {
    ConfigTriple t = parse_config_triple("t4000:i2000:r456");
    CHECK(t.tile == 4000);
    CHECK(t.intermediate == 2000);
    CHECK(t.input == 456);
    CHECK(t.name() == "t4000:i2000:r456");
    CHECK(t.dir_name() == "t4000_i2000_r456");
    CHECK(parse_config_triple(t.name()).name() == t.name());

    CHECK_THROWS_AS(parse_config_triple("x4000:i2000:r456"), Error);
    CHECK_THROWS_AS(parse_config_triple("t4000:i2000"), Error);
    CHECK_THROWS_AS(parse_config_triple("t:i2000:r456"), Error);
    CHECK_THROWS_AS(parse_config_triple("t4000:r456:i2000"), Error);
    CHECK_THROWS_AS(parse_config_triple("t40x0:i20:r10"), Error);
    CHECK_THROWS_AS(parse_config_triple(""), Error);
}

TEST_CASE("config text round trips through its canonical rendering") {
    const ExperimentConfig def;
    const std::string canon = render_config(def);
    // the canonical form is a fixed point of parse-then-render
    CHECK(render_config(parse_experiment_config(canon)) == canon);

    // comments, blank lines and spacing never reach the canonical form
    ExperimentConfig cfg = parse_experiment_config(
        "# experiment\n"
        "seed=42\n"
        "  cohort.n_cmb =  10   # inline comment\n"
        "\n"
        "cohort.n_dn\t=\t7\n"
        "configs = t256:i128:r64, t128:i64:r64\n"
        "augment.brightness = 0.9,1.1\n"
        "scorer.command = python3 score.py --model m.pt\n");
    CHECK(cfg.seed == 42);
    CHECK(cfg.n_cmb == 10);
    CHECK(cfg.n_dn == 7);
    REQUIRE(cfg.configs.size() == 2);
    CHECK(cfg.configs[1].name() == "t128:i64:r64");
    CHECK(cfg.augment.brightness_lo == 0.9);
    CHECK(cfg.augment.brightness_hi == 1.1);
    CHECK(cfg.scorer_command == "python3 score.py --model m.pt");
    CHECK(render_config(parse_experiment_config(render_config(cfg))) == render_config(cfg));

    // explicit triples replace the grid keys in the rendering
    CHECK(render_config(cfg).find("configs = t256:i128:r64,t128:i64:r64") != std::string::npos);
    CHECK(render_config(cfg).find("tile.sizes") == std::string::npos);
    CHECK(render_config(def).find("tile.sizes = 2000,4000,8000") != std::string::npos);
}

TEST_CASE("config files load like inline text") {
    fs::path d = fs::temp_directory_path() / "mstile_config_test";
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string text = "seed = 5\nfolds.k = 3\n";
    atomic_write_file(d / "exp.cfg", text);
    CHECK(render_config(load_experiment_config(d / "exp.cfg")) ==
          render_config(parse_experiment_config(text)));
    fs::remove_all(d);
}

TEST_CASE("unknown keys and malformed lines are named errors") {
    try {
        parse_experiment_config("seed = 1\nbogus.key = 2\n");
        FAIL("expected unknown-key error");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::config_invalid);
        CHECK(std::string(e.what()).find("bogus.key") != std::string::npos);
    }
    try {
        parse_experiment_config("seed = 1\nthis line has no equals\n");
        FAIL("expected malformed-line error");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::config_invalid);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_experiment_config("stats.unit = slide\n"), Error);
    CHECK_THROWS_AS(parse_experiment_config("synth.base_color = 1,2\n"), Error);
    CHECK_THROWS_AS(parse_experiment_config("augment.contrast = 0.9\n"), Error);
}

TEST_CASE("set-style overrides reuse the file schema") {
    ExperimentConfig a = parse_experiment_config("stats.alpha = 0.01\nseed = 9\n");
    ExperimentConfig b;
    apply_config_setting(b, " stats.alpha ", " 0.01 "); // keys and values are trimmed
    apply_config_setting(b, "seed", "9");
    CHECK(render_config(a) == render_config(b));
    CHECK_THROWS_AS(apply_config_setting(b, "not.a.key", "1"), Error);
}

TEST_CASE("grid expansion filters infeasible combinations in a fixed order") {
    ExperimentConfig cfg; // tiles {2000,4000,8000} x inter {456,1000,2000}, input 224
    auto triples = resolve_triples(cfg);
    REQUIRE(triples.size() == 9);
    CHECK(triples[0].name() == "t2000:i456:r224");
    CHECK(triples[1].name() == "t2000:i1000:r224");
    CHECK(triples[2].name() == "t2000:i2000:r224");
    CHECK(triples[3].name() == "t4000:i456:r224");
    CHECK(triples[8].name() == "t8000:i2000:r224");

    cfg.input_resolution = 1000; // drops every i456 combination
    triples = resolve_triples(cfg);
    REQUIRE(triples.size() == 6);
    CHECK(triples[0].name() == "t2000:i1000:r1000");

    cfg.input_resolution = 5000; // larger than every intermediate
    CHECK_THROWS_AS(resolve_triples(cfg), Error);

    // explicit triples bypass the grid entirely
    cfg = ExperimentConfig{};
    cfg.configs = {{8000, 224, 224}, {2000, 456, 456}};
    triples = resolve_triples(cfg);
    REQUIRE(triples.size() == 2);
    CHECK(triples[0].name() == "t8000:i224:r224");

    cfg.configs = {{2000, 456, 456}, {2000, 456, 456}};
    CHECK_THROWS_AS(resolve_triples(cfg), Error); // duplicate

    cfg.configs = {{456, 2000, 456}}; // intermediate above tile
    CHECK_THROWS_AS(resolve_triples(cfg), Error);
    cfg.configs = {{2000, 456, 1000}}; // input above intermediate
    CHECK_THROWS_AS(resolve_triples(cfg), Error);
}

TEST_CASE("experiment validation catches structural mistakes") {
    CHECK_NOTHROW(validate_experiment_config(ExperimentConfig{}));

    expect_config_invalid("folds.test_cmb = 13\n", "test quotas exceed");      // 5*13 > 60
    expect_config_invalid("folds.k = 6\n", "test quotas exceed");              // 6*12 > 60
    expect_config_invalid("folds.val_cmb = 49\n", "validation quotas exceed"); // 60-12 < 49
    expect_config_invalid("folds.k = 0\n", "folds.k");
    expect_config_invalid("folds.test_dn = -1\n", "quotas must be >= 0");
    expect_config_invalid("synth.wsi_size = 4000\n", "exceeds synth.wsi_size"); // 8000 tile
    expect_config_invalid("jobs = 0\n", "jobs");
    expect_config_invalid("cohort.n_dn = 0\n", "at least one patient");
    expect_config_invalid("augment.brightness = 1.1,0.9\n", "lo must be <= hi");
    expect_config_invalid("augment.saturation = -0.2,1\n", "factors must be >= 0");
    expect_config_invalid("augment.flip_h_prob = 1.5\n", "flip probabilities");
    expect_config_invalid("stats.alpha = 1\n", "alpha");
    expect_config_invalid("stats.n_ci = 0\n", "n_ci");
    expect_config_invalid("train.epochs = 0\n", "epochs");
    expect_config_invalid("train.learning_rate = 0\n", "learning_rate");
    expect_config_invalid("train.batch_size = 0\n", "batch_size");
    expect_config_invalid("train.crops_per_tile = 0\n", "crops_per_tile");
    expect_config_invalid("synth.nodule_contrast = -1\n", "nodule_contrast");
}

TEST_CASE("config hash covers the experiment but not workdir or jobs") {
    ExperimentConfig a;
    ExperimentConfig b;
    b.workdir = "/somewhere/else";
    b.jobs = 16;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16); // hex64

    ExperimentConfig c;
    c.seed = 1;
    CHECK(config_hash(c) != config_hash(a));

    ExperimentConfig d;
    d.scorer_command = "./score.sh";
    CHECK(config_hash(d) != config_hash(a));

    ExperimentConfig e;
    e.stats.n_p = 9999;
    CHECK(config_hash(e) != config_hash(a));
}
