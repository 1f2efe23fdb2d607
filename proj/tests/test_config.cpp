#include "doctest.h"

#include <stdexcept>

#include "prdim/config.hpp"

using namespace prdim;

namespace {

const char* kMinimal = R"({
  "data": {"kind": "synthetic"},
  "mechanism": {"kind": "mnar_logistic", "w": 5.0, "b": 0.8}
})";

} // namespace

TEST_CASE("minimal config fills the documented defaults") {
    ExperimentConfig cfg = parse_config(kMinimal);
    CHECK(cfg.schedule.steps == 50);
    CHECK(cfg.schedule.beta_min == doctest::Approx(1e-4));
    CHECK(cfg.schedule.beta_max == doctest::Approx(0.5));
    CHECK(cfg.schedule.kind == ScheduleKind::quadratic);
    CHECK(cfg.em.iterations == 100);
    CHECK(cfg.em.maximization_epochs == 1);
    CHECK(cfg.em.guidance_scale == 1.0);
    CHECK(cfg.em.mode == EmMode::hard);
    CHECK(cfg.mechanism.w == 5.0);
    CHECK(cfg.mechanism.b == 0.8);
}

TEST_CASE("unknown keys are hard errors at any level") {
    CHECK_THROWS_WITH_AS(parse_config(R"({
      "data": {"kind": "synthetic"},
      "mechanism": {"kind": "mcar", "p": 0.1},
      "typo_section": {}
    })"),
                         doctest::Contains("typo_section"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(R"({
      "data": {"kind": "synthetic", "bogus": 1},
      "mechanism": {"kind": "mcar", "p": 0.1}
    })"),
                         doctest::Contains("data.bogus"), std::runtime_error);
    // Mechanism keys are validated per kind.
    CHECK_THROWS_WITH_AS(parse_config(R"({
      "data": {"kind": "synthetic"},
      "mechanism": {"kind": "mcar", "w": 5.0}
    })"),
                         doctest::Contains("mechanism.w"), std::runtime_error);
}

TEST_CASE("duplicate keys are rejected") {
    CHECK_THROWS_WITH_AS(parse_config(R"({
      "data": {"kind": "synthetic"},
      "data": {"kind": "synthetic"},
      "mechanism": {"kind": "mcar", "p": 0.1}
    })"),
                         doctest::Contains("duplicate key"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(R"({
      "data": {"kind": "synthetic"},
      "mechanism": {"kind": "mcar", "p": 0.1, "p": 0.2}
    })"),
                         doctest::Contains("duplicate key"), std::runtime_error);
}

TEST_CASE("missing required keys are listed") {
    CHECK_THROWS_WITH_AS(parse_config("{}"), doctest::Contains("data"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config("{}"), doctest::Contains("mechanism"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_config(R"({"data": {"kind": "csv"}, "mechanism": {"kind": "none"}})"),
                         doctest::Contains("data.path"), std::runtime_error);
}

TEST_CASE("parse -> serialize -> parse is a fixed point") {
    const char* full = R"({
      "data": {"kind": "synthetic", "ar_coeff": 0.7, "features": 3, "window_len": 12,
               "stride": 6, "total_steps": 600, "noise_std": 0.9},
      "mechanism": {"kind": "mnar_quantile", "q": 0.3, "feature_fraction": 0.5},
      "split": {"train": 0.7, "valid": 0.1, "test": 0.2, "shuffle": true},
      "schedule": {"steps": 20, "beta_min": 0.001, "beta_max": 0.4, "kind": "linear"},
      "phase1": {"epochs": 10, "batch": 16, "lr": 0.002, "artificial_fraction": 0.2,
                 "resample_mask_per_epoch": false, "hidden": [32, 32], "embed_dim": 16,
                 "optimizer": "sgd"},
      "recognizer": {"hidden": [24], "init": "zeros"},
      "em": {"iterations": 7, "maximization_epochs": 2, "lr_theta": 0.0005, "lr_phi": 0.0002,
             "guidance_scale": 0.5, "guidance_path": "x0hat_only", "mode": "soft",
             "soft_samples": 3, "grad_clip_norm": 4.5, "batch": 32, "optimizer": "sgd"},
      "eval": {"standardized_space": true, "compute_w2": false, "w2_cap": 64,
               "artificial_fraction": 0.05},
      "guidance_sweep": [0.0, 1.0],
      "output_dir": "runs/x",
      "seed": 77
    })";
    ExperimentConfig a = parse_config(full);
    std::string text = serialize_config(a);
    ExperimentConfig b = parse_config(text);
    CHECK(serialize_config(b) == text);
    CHECK(config_hash(a) == config_hash(b));
    CHECK(a.em.guidance_path == GuidancePath::x0hat_only);
    CHECK(a.recognizer_init == RecognizerInit::zeros);
    CHECK(b.guidance_sweep.size() == 2);
}

TEST_CASE("config hash is stable and sensitive") {
    ExperimentConfig a = parse_config(kMinimal);
    ExperimentConfig b = parse_config(kMinimal);
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 999;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("baseline mode requires all three ablation switches") {
    ExperimentConfig cfg = parse_config(kMinimal);
    CHECK_FALSE(cfg.baseline_mode());
    cfg.em.guidance_scale = 0.0;
    cfg.em.lr_phi = 0.0;
    CHECK_FALSE(cfg.baseline_mode());
    cfg.recognizer_init = RecognizerInit::zeros;
    CHECK(cfg.baseline_mode());
}

TEST_CASE("invalid enum values are rejected") {
    CHECK_THROWS_AS(parse_config(R"({
      "data": {"kind": "synthetic"},
      "mechanism": {"kind": "warp"}
    })"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_config(R"({
      "data": {"kind": "synthetic"},
      "mechanism": {"kind": "mcar", "p": 0.1},
      "schedule": {"kind": "cubic"}
    })"),
                    std::runtime_error);
}
