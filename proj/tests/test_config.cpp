// Pipeline config serialization, validation, and the env seed override.
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "dwiplan/config.hpp"
#include "dwiplan/error.hpp"

using namespace dwiplan;

TEST_CASE("config JSON round-trips losslessly") {
    PipelineConfig cfg;
    cfg.n_biopsy = 6;
    cfg.upsample = 7;
    cfg.superpixel_area_mm2 = 5.55;
    cfg.sigma_noise = 1.25e4;
    cfg.seed = 0xdeadbeefcafe;
    cfg.constraints.fan_deg = 18.0;
    cfg.constraints.forbid_necrosis_traversal = true;

    auto text = config_to_json(cfg);
    auto back = config_from_json(text);
    CHECK(config_to_json(back) == text);
    CHECK(back.n_biopsy == 6);
    CHECK(back.seed == cfg.seed);
    CHECK(back.constraints.fan_deg == 18.0);
    CHECK(back.constraints.forbid_necrosis_traversal);
}

TEST_CASE("missing fields keep their defaults") {
    auto cfg = config_from_json(R"({"n_biopsy": 9})");
    PipelineConfig def;
    CHECK(cfg.n_biopsy == 9);
    CHECK(cfg.upsample == def.upsample);
    CHECK(cfg.sigma_noise == def.sigma_noise);
    CHECK(cfg.constraints.tip_length_mm == def.constraints.tip_length_mm);
}

TEST_CASE("unknown keys are rejected, including nested ones") {
    CHECK_THROWS_WITH_AS(config_from_json(R"({"nbiopsy": 9})"), doctest::Contains("nbiopsy"),
                         Error);
    CHECK_THROWS_WITH_AS(config_from_json(R"({"constraints": {"fan": 20}})"),
                         doctest::Contains("fan"), Error);
}

TEST_CASE("invalid values are rejected") {
    CHECK_THROWS_AS(config_from_json(R"({"n_biopsy": 0})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"percentile_lo": 50, "percentile_hi": 40})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"sigma_noise": -1})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"upsample": 0})"), Error);
    try {
        config_from_json(R"({"n_biopsy": 0})");
    } catch (const Error& e) {
        CHECK(e.code() == errc::invalid_spec);
    }
}

TEST_CASE("malformed JSON is a format error") {
    try {
        config_from_json("{\"n_biopsy\": ");
        FAIL("expected a format error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::format_error);
    }
}

TEST_CASE("load_config reads a file and fails on a missing one") {
    auto dir = std::filesystem::temp_directory_path() / "dwiplan_config_tests";
    std::filesystem::create_directories(dir);
    auto path = dir / "cfg.json";
    {
        std::ofstream out(path);
        out << R"({"seed": 424242})";
    }
    CHECK(load_config(path.string()).seed == 424242);
    CHECK_THROWS_AS(load_config((dir / "missing.json").string()), Error);
}

TEST_CASE("BIOPSY_PLANNER_SEED overrides the config seed") {
    PipelineConfig cfg;
    cfg.seed = 5;

    unsetenv("BIOPSY_PLANNER_SEED");
    apply_env_seed(cfg);
    CHECK(cfg.seed == 5);

    setenv("BIOPSY_PLANNER_SEED", "18446744073709551615", 1); // uint64 max
    apply_env_seed(cfg);
    CHECK(cfg.seed == 18446744073709551615ull);

    setenv("BIOPSY_PLANNER_SEED", "twelve", 1);
    CHECK_THROWS_AS(apply_env_seed(cfg), Error);
    unsetenv("BIOPSY_PLANNER_SEED");
}
