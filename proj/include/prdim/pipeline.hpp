#pragma once

#include <optional>
#include <string>

#include "prdim/config.hpp"
#include "prdim/em.hpp"
#include "prdim/metrics.hpp"

namespace prdim {

inline constexpr const char* kVersion = "prdim 0.1.0";

struct SweepRow {
    double guidance_scale = 0.0;
    MetricsReport out_of_sample;
};

// Everything run_pipeline produces. Serialization is deterministic for a
// fixed (config, seed) except the wall-time block.
struct RunReport {
    ExperimentConfig config;
    std::string hash;
    double expected_missing = 0.0;       // mechanism oracle given the data, NaN when unavailable
    double realized_missing_train = 0.0;
    double realized_missing_valid = 0.0;  // NaN when the split is empty
    double realized_missing_test = 0.0;
    bool baseline = false;

    std::optional<MetricsReport> original_in_sample;
    std::optional<MetricsReport> original_out_of_sample;
    std::optional<MetricsReport> artificial_out_of_sample;
    std::optional<double> w2_in_sample;
    std::optional<double> w2_out_of_sample;

    std::vector<double> phase1_loss;
    EmTrace em_trace;
    std::vector<SweepRow> sweep;

    double time_phase1_sec = 0.0;
    double time_em_sec = 0.0;
    double time_total_sec = 0.0;

    std::string report_path;
};

std::string report_to_json(const RunReport& report);

// Full experiment: data -> mechanism -> split -> standardize -> artificial
// masking -> phase 1 -> EM -> evaluation -> report + plot CSVs under
// config.output_dir. Stage failures abort with the stage name after writing
// a partial report.
RunReport run_pipeline(const ExperimentConfig& cfg);

// Per-iteration loss CSV, MRE-vs-iteration CSV, phase-1 loss CSV and the
// guidance sweep CSV (when present).
void emit_plot_data(const RunReport& report, const std::string& out_dir);

// OpenBLAS worker count; 1 keeps runs single-core.
void set_blas_threads(int n);

} // namespace prdim
