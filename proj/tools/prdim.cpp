#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "prdim/checkpoint.hpp"
#include "prdim/pipeline.hpp"

namespace {

int log_level() {
    const char* env = std::getenv("PRDIM_LOG");
    if (!env) return 1;
    return std::atoi(env);
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[prdim] " << msg << "\n";
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, int threads) {
    prdim::set_blas_threads(threads);
    prdim::ExperimentConfig cfg = prdim::load_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    prdim::RunReport report = prdim::run_pipeline(cfg);
    info("report written to " + report.report_path);
    std::cout << report.report_path << "\n";
    return 0;
}

int cmd_impute(const std::string& ckpt_path, const std::string& csv_path, const std::string& out_path,
               std::uint64_t seed, int threads) {
    prdim::set_blas_threads(threads);
    prdim::Checkpoint ckpt = prdim::load_checkpoint(ckpt_path);
    prdim::MaskedDataset ds = prdim::load_csv(csv_path, false);
    if (ds.cols() != ckpt.denoiser.data_dim) {
        throw std::runtime_error("csv has " + std::to_string(ds.cols()) + " columns, checkpoint expects " +
                                 std::to_string(ckpt.denoiser.data_dim));
    }
    auto [std_ds, stats] = prdim::standardize(ds, ckpt.stats);
    prdim::NoiseSchedule sched =
        prdim::build_schedule(ckpt.schedule_steps, ckpt.beta_min, ckpt.beta_max, ckpt.schedule_kind);
    prdim::EmState state;
    state.denoiser = ckpt.denoiser;
    state.recognizer = ckpt.recognizer;
    prdim::Rng rng(seed);
    prdim::Tensor imputed = prdim::impute_out_of_sample(state, prdim::observed_fill(std_ds), std_ds.m,
                                                        sched, ckpt.em, rng);
    prdim::write_csv_matrix(prdim::unstandardize(imputed, ckpt.stats), out_path);
    info("imputed matrix written to " + out_path);
    return 0;
}

int cmd_masks(const std::string& config_path, std::optional<std::uint64_t> seed) {
    prdim::ExperimentConfig cfg = prdim::load_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (cfg.data_kind != prdim::DataKind::synthetic) {
        throw std::runtime_error("masks dry run needs a synthetic data section");
    }
    prdim::Rng rng_series(prdim::seed_for(cfg.seed, "series"));
    prdim::Tensor series = prdim::Tensor::zeros({cfg.synthetic.total_steps, cfg.synthetic.features});
    // Same generator as the pipeline: stationary AR(1) per feature.
    double rho = cfg.synthetic.ar_coeff;
    double stat_std = cfg.synthetic.noise_std / std::sqrt(std::max(1e-12, 1.0 - rho * rho));
    for (std::size_t k = 0; k < cfg.synthetic.features; ++k) {
        double x = rng_series.normal() * stat_std;
        series.at(0, k) = x;
        for (std::size_t t = 1; t < cfg.synthetic.total_steps; ++t) {
            x = rho * x + cfg.synthetic.noise_std * rng_series.normal();
            series.at(t, k) = x;
        }
    }
    prdim::Rng rng(prdim::seed_for(cfg.seed, "mechanism"));
    prdim::MaskSample sample = prdim::gen_mask(cfg.mechanism, series, rng);
    std::cout << "entries: " << sample.mask.numel() << "\n";
    std::cout << "realized_missing_ratio: " << sample.realized_missing_ratio << "\n";
    return 0;
}

int cmd_metrics(const std::string& true_csv, const std::string& pred_csv, const std::string& mask_csv) {
    prdim::MaskedDataset truth = prdim::load_csv(true_csv, false);
    prdim::MaskedDataset pred = prdim::load_csv(pred_csv, false);
    prdim::MaskedDataset mask = prdim::load_csv(mask_csv, false);
    prdim::MetricsReport r = prdim::compute_metrics(truth.x, pred.x, mask.x, "cli");
    std::cout << "rmse: " << r.rmse << "\n";
    std::cout << "mae: " << r.mae << "\n";
    std::cout << "mre_percent: " << r.mre_percent << "\n";
    std::cout << "entries: " << r.eval_entry_count << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PRDIM: pattern-recognizer guided diffusion imputation"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, csv_path, out_path, true_csv, pred_csv, mask_csv;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::uint64_t impute_seed = 1;
    int threads = 1;

    auto* run = app.add_subcommand("run", "run a full experiment from a config file");
    run->add_option("config", config_path, "config JSON path")->required();
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--out-dir", out_dir, "override the output directory");
    run->add_option("--threads", threads, "BLAS worker threads");

    auto* impute = app.add_subcommand("impute", "impute a CSV with a trained checkpoint");
    impute->add_option("checkpoint", ckpt_path, "checkpoint JSON path")->required();
    impute->add_option("csv", csv_path, "input CSV (NaN/empty cells = missing)")->required();
    impute->add_option("--out", out_path, "output CSV path")->required();
    impute->add_option("--seed", impute_seed, "sampling seed");
    impute->add_option("--threads", threads, "BLAS worker threads");

    auto* masks = app.add_subcommand("masks", "mechanism-only dry run: report the realized missing ratio");
    masks->add_option("config", config_path, "config JSON path")->required();
    masks->add_option("--seed", seed, "override the master seed");

    auto* metrics = app.add_subcommand("metrics", "score a prediction CSV against truth on a mask");
    metrics->add_option("true", true_csv, "ground truth CSV")->required();
    metrics->add_option("pred", pred_csv, "prediction CSV")->required();
    metrics->add_option("mask", mask_csv, "evaluation mask CSV (1 = score this entry)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seed, out_dir, threads);
        if (impute->parsed()) return cmd_impute(ckpt_path, csv_path, out_path, impute_seed, threads);
        if (masks->parsed()) return cmd_masks(config_path, seed);
        if (metrics->parsed()) return cmd_metrics(true_csv, pred_csv, mask_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
