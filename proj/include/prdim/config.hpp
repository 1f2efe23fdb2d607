#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prdim/diffusion.hpp"
#include "prdim/em.hpp"
#include "prdim/missing.hpp"

namespace prdim {

enum class DataKind { synthetic, csv };

// AR(1) windows: one independent series per feature, stationary start,
// sliced into windows of window_len with the given stride.
struct SyntheticSpec {
    double ar_coeff = 0.8;
    double noise_std = 1.0;
    std::size_t features = 5;
    std::size_t window_len = 24;
    std::size_t stride = 24;
    std::size_t total_steps = 15000;
};

struct CsvSpec {
    std::string path;
    bool has_header = false;
    std::string missing_token = "NaN";
    std::size_t window_len = 0;  // 0 = tabular, rows used as-is
    std::size_t stride = 0;      // defaults to window_len
};

struct SplitSpec {
    double train = 0.8;
    double valid = 0.0;
    double test = 0.2;
    // Series data is split on the raw timeline (contiguous blocks) to avoid
    // leakage between overlapping windows; shuffle stays off by default.
    bool shuffle = false;
};

struct ScheduleSpec {
    std::size_t steps = 50;
    double beta_min = 1e-4;
    double beta_max = 0.5;
    ScheduleKind kind = ScheduleKind::quadratic;
};

enum class RecognizerInit { random, zeros };

struct EvalSpec {
    bool standardized_space = false;  // metrics in data units by default
    bool compute_w2 = true;
    std::size_t w2_cap = 512;
    double artificial_fraction = 0.1;
};

struct ExperimentConfig {
    DataKind data_kind = DataKind::synthetic;
    SyntheticSpec synthetic;
    CsvSpec csv;
    MechanismSpec mechanism;
    SplitSpec split;
    ScheduleSpec schedule;
    Phase1Config phase1;
    std::vector<std::size_t> recognizer_hidden;  // empty = min(512, 8*D) x3
    RecognizerInit recognizer_init = RecognizerInit::random;
    EmConfig em;
    EvalSpec eval;
    std::vector<double> guidance_sweep;
    std::string output_dir = "out";
    std::uint64_t seed = 1;

    bool baseline_mode() const {
        return em.guidance_scale == 0.0 && em.lr_phi == 0.0 && recognizer_init == RecognizerInit::zeros;
    }
};

// Strict parse: unknown keys and duplicate keys are hard errors; missing
// required keys are reported together; defaults are filled and recorded.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical serialization with every default materialized; parse of the
// output reproduces the config.
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization, as a hex string.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace prdim
