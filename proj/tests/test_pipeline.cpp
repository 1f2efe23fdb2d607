#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "prdim/checkpoint.hpp"
#include "prdim/pipeline.hpp"

using namespace prdim;
namespace fs = std::filesystem;

namespace {

std::string small_config(const std::string& out_dir, std::uint64_t seed) {
    std::ostringstream ss;
    ss << R"({
      "data": {"kind": "synthetic", "features": 3, "window_len": 8, "stride": 8,
               "total_steps": 800, "ar_coeff": 0.8, "noise_std": 1.0},
      "mechanism": {"kind": "mnar_logistic", "w": 5.0, "b": 0.8},
      "schedule": {"steps": 10},
      "phase1": {"epochs": 10, "batch": 16, "hidden": [16], "embed_dim": 8},
      "recognizer": {"hidden": [16]},
      "em": {"iterations": 3, "batch": 16},
      "eval": {"w2_cap": 64},
      "output_dir": ")"
       << out_dir << R"(",
      "seed": )"
       << seed << "\n}";
    return ss.str();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_timings(const std::string& report_json) {
    nlohmann::json j = nlohmann::json::parse(report_json);
    j.erase("timings_sec");
    return j.dump();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("pipeline: two identically seeded runs write byte-identical reports modulo timings") {
    TempDir dir("prdim_pipe_det");
    ExperimentConfig cfg = parse_config(small_config((dir.path / "run").string(), 7));
    run_pipeline(cfg);
    std::string first = slurp((dir.path / "run" / "report.json").string());
    run_pipeline(cfg);
    std::string second = slurp((dir.path / "run" / "report.json").string());
    CHECK(first != "");
    CHECK(strip_timings(first) == strip_timings(second));
}

TEST_CASE("pipeline: report carries ratios, metrics, traces and W2") {
    TempDir dir("prdim_pipe_report");
    ExperimentConfig cfg = parse_config(small_config((dir.path / "run").string(), 11));
    RunReport report = run_pipeline(cfg);

    // Realized ratio within 3 binomial sigma of the conditional oracle.
    double expected = report.expected_missing;
    CHECK(std::isfinite(expected));
    double n_entries = 80.0 * 24.0;
    double sigma = std::sqrt(expected * (1.0 - expected) / n_entries);
    CHECK(std::abs(report.realized_missing_train - expected) < 5.0 * sigma);

    REQUIRE(report.original_in_sample.has_value());
    REQUIRE(report.original_out_of_sample.has_value());
    REQUIRE(report.artificial_out_of_sample.has_value());
    CHECK(report.original_in_sample->mae <= report.original_in_sample->rmse + 1e-12);
    CHECK(report.em_trace.l_diff.size() == 3);
    CHECK(report.phase1_loss.size() == 10);
    CHECK(report.w2_in_sample.has_value());
    CHECK(report.w2_out_of_sample.has_value());

    CHECK(fs::exists(dir.path / "run" / "em_trace.csv"));
    CHECK(fs::exists(dir.path / "run" / "phase1_loss.csv"));
    CHECK(fs::exists(dir.path / "run" / "mre_vs_iteration.csv"));
    CHECK(fs::exists(dir.path / "run" / "checkpoint.json"));

    // Trace CSV rows equal the trace length (plus header).
    std::string trace = slurp((dir.path / "run" / "em_trace.csv").string());
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);
}

TEST_CASE("pipeline: checkpoint round-trips to a bitwise-identical imputer") {
    TempDir dir("prdim_pipe_ckpt");
    ExperimentConfig cfg = parse_config(small_config((dir.path / "run").string(), 13));
    run_pipeline(cfg);
    Checkpoint ckpt = load_checkpoint((dir.path / "run" / "checkpoint.json").string());
    CHECK(ckpt.denoiser.data_dim == 24);

    std::string copy_path = (dir.path / "copy.json").string();
    save_checkpoint(ckpt, copy_path);
    Checkpoint again = load_checkpoint(copy_path);
    for (std::size_t l = 0; l < ckpt.denoiser.net.layers.size(); ++l) {
        for (std::size_t i = 0; i < ckpt.denoiser.net.layers[l].w.numel(); ++i) {
            CHECK(ckpt.denoiser.net.layers[l].w.values[i] == again.denoiser.net.layers[l].w.values[i]);
        }
    }

    NoiseSchedule sched = build_schedule(ckpt.schedule_steps, ckpt.beta_min, ckpt.beta_max,
                                         ckpt.schedule_kind);
    EmState a, b;
    a.denoiser = ckpt.denoiser;
    a.recognizer = ckpt.recognizer;
    b.denoiser = again.denoiser;
    b.recognizer = again.recognizer;
    Tensor m = Tensor::full({4, 24}, 1.0);
    m.at(0, 3) = m.at(1, 10) = m.at(2, 20) = m.at(3, 0) = 0.0;
    Rng noise(21);
    Tensor x = Tensor::zeros({4, 24});
    noise.fill_normal(x.values);
    Tensor obs = observed_fill(x, m);
    Rng ra(22), rb(22);
    Tensor ia = impute_out_of_sample(a, obs, m, sched, ckpt.em, ra);
    Tensor ib = impute_out_of_sample(b, obs, m, sched, again.em, rb);
    for (std::size_t i = 0; i < ia.numel(); ++i) CHECK(ia.values[i] == ib.values[i]);
}

TEST_CASE("pipeline: stage failures name the stage and leave a partial report") {
    TempDir dir("prdim_pipe_err");
    std::string text = R"({
      "data": {"kind": "csv", "path": "/nonexistent/file.csv"},
      "mechanism": {"kind": "none"},
      "output_dir": ")" +
                       (dir.path / "run").string() + R"("
    })";
    ExperimentConfig cfg = parse_config(text);
    CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("stage load_data"), std::runtime_error);
    nlohmann::json partial = nlohmann::json::parse(slurp((dir.path / "run" / "report.json").string()));
    CHECK(partial.contains("error"));
}

TEST_CASE("pipeline: guidance sweep emits one row per scale") {
    TempDir dir("prdim_pipe_sweep");
    nlohmann::json j = nlohmann::json::parse(small_config((dir.path / "run").string(), 17));
    j["guidance_sweep"] = {0.0, 1.0};
    j["em"]["iterations"] = 2;
    ExperimentConfig cfg = parse_config(j.dump());
    RunReport report = run_pipeline(cfg);
    REQUIRE(report.sweep.size() == 2);
    CHECK(report.sweep[0].guidance_scale == 0.0);
    CHECK(report.sweep[1].guidance_scale == 1.0);
    std::string sweep = slurp((dir.path / "run" / "guidance_sweep.csv").string());
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 3);
}
