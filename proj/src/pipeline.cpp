#include "prdim/pipeline.hpp"

#include "prdim/checkpoint.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

extern "C" void openblas_set_num_threads(int);

namespace prdim {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double now_sec() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

json metrics_to_json(const MetricsReport& r) {
    return {{"rmse", r.rmse},
            {"mae", r.mae},
            {"mre_percent", number_or_null(r.mre_percent)},
            {"eval_entry_count", r.eval_entry_count},
            {"scope", r.scope}};
}

// AR(1) series, one independent process per feature, stationary start.
Tensor generate_ar1_series(const SyntheticSpec& spec, Rng& rng) {
    Tensor series = Tensor::zeros({spec.total_steps, spec.features});
    double rho = spec.ar_coeff;
    double stat_std = spec.noise_std / std::sqrt(std::max(1e-12, 1.0 - rho * rho));
    for (std::size_t k = 0; k < spec.features; ++k) {
        double x = rng.normal() * stat_std;
        series.at(0, k) = x;
        for (std::size_t t = 1; t < spec.total_steps; ++t) {
            x = rho * x + spec.noise_std * rng.normal();
            series.at(t, k) = x;
        }
    }
    return series;
}

// Expected missing ratio given the concrete data, where it has a closed
// conditional form. NaN means no oracle for this mechanism.
double expected_missing_ratio(const MechanismSpec& spec, const Tensor& x) {
    switch (spec.kind) {
        case MechanismKind::mcar: return spec.p;
        case MechanismKind::mnar_logistic:
        case MechanismKind::mnar_self_censor: {
            double s = 0.0;
            for (double v : x.values) s += logistic_missing_prob(v, spec.w, spec.b);
            return s / (double)x.numel();
        }
        case MechanismKind::mnar_quantile:
            return spec.q * ((double)((std::size_t)((double)x.cols() * spec.feature_fraction + 1e-9)) /
                             (double)x.cols());
        case MechanismKind::mnar_truncation: {
            double s = 0.0;
            for (double v : x.values) s += (v < spec.lower || v > spec.upper) ? 1.0 : 0.0;
            return s / (double)x.numel();
        }
        case MechanismKind::mar: {
            double s = 0.0;
            std::size_t count = 0;
            std::vector<bool> is_driver(x.cols(), false);
            for (std::size_t j : spec.driver_columns) is_driver[j] = true;
            for (std::size_t i = 0; i < x.rows(); ++i) {
                double mean = 0.0;
                for (std::size_t j : spec.driver_columns) mean += x.at(i, j);
                mean /= (double)spec.driver_columns.size();
                double pm = 1.0 / (1.0 + std::exp(-(spec.slope * mean + spec.offset)));
                for (std::size_t j = 0; j < x.cols(); ++j) {
                    if (is_driver[j]) continue;
                    s += pm;
                    ++count;
                }
            }
            return count ? s / (double)count : kNaN;
        }
        default: return kNaN;
    }
}

double realized_missing(const Tensor& m) {
    if (m.numel() == 0) return kNaN;
    double missing = 0.0;
    for (double v : m.values) missing += 1.0 - v;
    return missing / (double)m.numel();
}

struct StageGuard {
    const char* name;
    template <typename F>
    auto run(F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const std::exception& e) {
            throw std::runtime_error("stage " + std::string(name) + ": " + e.what());
        }
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// Evaluation entries for the "original missing" scopes: missing under the
// mechanism and with known ground truth.
Tensor original_eval_mask(const MaskedDataset& raw) {
    Tensor mask = Tensor::zeros(raw.m.shape);
    for (std::size_t i = 0; i < raw.m.numel(); ++i) {
        mask.values[i] = (raw.m.values[i] == 0.0 && std::isfinite(raw.x.values[i])) ? 1.0 : 0.0;
    }
    return mask;
}

std::size_t mask_count(const Tensor& m) {
    std::size_t c = 0;
    for (double v : m.values) c += v == 1.0 ? 1 : 0;
    return c;
}

bool truth_complete(const MaskedDataset& raw) {
    return raw.x.all_finite();
}

Tensor head_rows(const Tensor& x, std::size_t n) {
    Tensor out = Tensor::zeros({n, x.cols()});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j);
    }
    return out;
}

} // namespace

void set_blas_threads(int n) { openblas_set_num_threads(n); }

std::string report_to_json(const RunReport& r) {
    json j;
    j["version"] = kVersion;
    j["config"] = json::parse(serialize_config(r.config));
    j["config_hash"] = r.hash;
    j["baseline_mode"] = r.baseline;
    j["missing_ratios"] = {{"expected", number_or_null(r.expected_missing)},
                           {"train", number_or_null(r.realized_missing_train)},
                           {"valid", number_or_null(r.realized_missing_valid)},
                           {"test", number_or_null(r.realized_missing_test)}};
    json metrics = json::object();
    if (r.original_in_sample) metrics["original_in_sample"] = metrics_to_json(*r.original_in_sample);
    if (r.original_out_of_sample) {
        metrics["original_out_of_sample"] = metrics_to_json(*r.original_out_of_sample);
    }
    if (r.artificial_out_of_sample) {
        metrics["artificial_out_of_sample"] = metrics_to_json(*r.artificial_out_of_sample);
    }
    j["metrics"] = std::move(metrics);
    json w2 = json::object();
    if (r.w2_in_sample) w2["in_sample"] = *r.w2_in_sample;
    if (r.w2_out_of_sample) w2["out_of_sample"] = *r.w2_out_of_sample;
    j["wasserstein2"] = std::move(w2);
    if (!r.sweep.empty()) {
        json rows = json::array();
        for (const auto& row : r.sweep) {
            rows.push_back({{"guidance_scale", row.guidance_scale},
                            {"out_of_sample", metrics_to_json(row.out_of_sample)}});
        }
        j["guidance_sweep"] = std::move(rows);
    }
    j["traces"] = {{"em", "em_trace.csv"},
                   {"phase1", "phase1_loss.csv"},
                   {"mre", "mre_vs_iteration.csv"}};
    j["timings_sec"] = {{"phase1", r.time_phase1_sec}, {"em", r.time_em_sec}, {"total", r.time_total_sec}};
    return j.dump(1) + "\n";
}

void emit_plot_data(const RunReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "em_trace.csv");
        out << "iteration,l_diff,l_pr,mae_in,rmse_in,mre_in\n";
        for (std::size_t k = 0; k < report.em_trace.l_diff.size(); ++k) {
            out << (k + 1) << ',' << report.em_trace.l_diff[k] << ',' << report.em_trace.l_pr[k] << ','
                << report.em_trace.mae_in[k] << ',' << report.em_trace.rmse_in[k] << ','
                << report.em_trace.mre_in[k] << '\n';
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "phase1_loss.csv");
        out << "epoch,loss\n";
        for (std::size_t e = 0; e < report.phase1_loss.size(); ++e) {
            out << (e + 1) << ',' << report.phase1_loss[e] << '\n';
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "mre_vs_iteration.csv");
        out << "iteration,mre_in\n";
        for (std::size_t k = 0; k < report.em_trace.mre_in.size(); ++k) {
            out << (k + 1) << ',' << report.em_trace.mre_in[k] << '\n';
        }
    }
    if (!report.sweep.empty()) {
        std::ofstream out(fs::path(out_dir) / "guidance_sweep.csv");
        out << "guidance_scale,mae,rmse,mre_percent\n";
        for (const auto& row : report.sweep) {
            out << row.guidance_scale << ',' << row.out_of_sample.mae << ',' << row.out_of_sample.rmse << ','
                << row.out_of_sample.mre_percent << '\n';
        }
    }
}

RunReport run_pipeline(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const double t_start = now_sec();
    RunReport report;
    report.config = cfg;
    report.hash = config_hash(cfg);
    report.baseline = cfg.baseline_mode();
    report.realized_missing_train = kNaN;
    report.realized_missing_valid = kNaN;
    report.realized_missing_test = kNaN;
    report.expected_missing = kNaN;
    fs::create_directories(cfg.output_dir);

    auto write_partial = [&](const std::string& error) {
        json j;
        j["version"] = kVersion;
        j["config"] = json::parse(serialize_config(cfg));
        j["config_hash"] = report.hash;
        j["error"] = error;
        write_text((fs::path(cfg.output_dir) / "report.json").string(), j.dump(1) + "\n");
    };

    try {
        // ---- data ------------------------------------------------------
        Tensor series;        // [T x K] for series-shaped data
        MaskedDataset table;  // direct rows for tabular CSV
        bool windowed = true;
        std::size_t window_len = 0, stride = 0;
        StageGuard data_stage{"load_data"};
        data_stage.run([&] {
            if (cfg.data_kind == DataKind::synthetic) {
                Rng rng(seed_for(cfg.seed, "series"));
                series = generate_ar1_series(cfg.synthetic, rng);
                window_len = cfg.synthetic.window_len;
                stride = cfg.synthetic.stride;
            } else {
                table = load_csv(cfg.csv.path, cfg.csv.has_header, cfg.csv.missing_token);
                windowed = cfg.csv.window_len > 0;
                if (windowed) {
                    series = table.x;  // NaN marks natural missing
                    window_len = cfg.csv.window_len;
                    stride = cfg.csv.stride ? cfg.csv.stride : cfg.csv.window_len;
                }
            }
            return 0;
        });

        // ---- mechanism ---------------------------------------------------
        StageGuard mech_stage{"mechanism"};
        Tensor base_x;  // raw values (ground truth kept where known)
        Tensor base_m;
        mech_stage.run([&] {
            base_x = windowed ? series : table.x;
            Rng rng(seed_for(cfg.seed, "mechanism"));
            if (cfg.mechanism.kind == MechanismKind::none || cfg.mechanism.kind == MechanismKind::mcar) {
                // These combine with natural missing; value-dependent kinds need complete data.
                Tensor natural = Tensor::zeros(base_x.shape);
                for (std::size_t i = 0; i < base_x.numel(); ++i) {
                    natural.values[i] = std::isfinite(base_x.values[i]) ? 1.0 : 0.0;
                }
                if (cfg.mechanism.kind == MechanismKind::none) {
                    base_m = std::move(natural);
                } else {
                    MaskSample s = gen_mcar(base_x.rows(), base_x.cols(), cfg.mechanism.p, rng);
                    base_m = hadamard(natural, s.mask);
                    report.expected_missing = cfg.mechanism.p;
                }
            } else {
                if (!base_x.all_finite()) {
                    throw std::runtime_error("value-dependent mechanism needs complete data (found NaN)");
                }
                MaskSample s = gen_mask(cfg.mechanism, base_x, rng);
                base_m = std::move(s.mask);
                report.expected_missing = expected_missing_ratio(cfg.mechanism, base_x);
            }
            return 0;
        });

        // ---- split + windowing -------------------------------------------
        StageGuard split_stage{"split"};
        MaskedDataset raw_train, raw_valid, raw_test;
        split_stage.run([&] {
            MaskedDataset base;
            base.x = base_x;
            base.m = base_m;
            if (!windowed) {
                base.validate();
                SplitResult parts = split(base, cfg.split.train, cfg.split.valid, cfg.split.test,
                                          seed_for(cfg.seed, "split"), cfg.split.shuffle);
                raw_train = std::move(parts.train);
                raw_valid = std::move(parts.valid);
                raw_test = std::move(parts.test);
            } else {
                // Split the raw timeline first so train/test windows never overlap.
                SplitResult parts = split(base, cfg.split.train, cfg.split.valid, cfg.split.test,
                                          seed_for(cfg.seed, "split"), cfg.split.shuffle);
                auto window_part = [&](const MaskedDataset& seg) {
                    if (seg.rows() == 0) return MaskedDataset{};
                    return window_series(seg.x, seg.m, window_len, stride);
                };
                raw_train = window_part(parts.train);
                raw_valid = window_part(parts.valid);
                raw_test = window_part(parts.test);
            }
            if (raw_train.rows() == 0) throw std::runtime_error("train split is empty");
            report.realized_missing_train = realized_missing(raw_train.m);
            report.realized_missing_valid = raw_valid.rows() ? realized_missing(raw_valid.m) : kNaN;
            report.realized_missing_test = raw_test.rows() ? realized_missing(raw_test.m) : kNaN;
            return 0;
        });

        // ---- standardize --------------------------------------------------
        StageGuard std_stage{"standardize"};
        MaskedDataset train, valid, test;
        NormStats stats;
        std_stage.run([&] {
            auto [tr, st] = standardize(raw_train, std::nullopt);
            train = std::move(tr);
            stats = std::move(st);
            if (raw_valid.rows()) valid = standardize(raw_valid, stats).first;
            if (raw_test.rows()) test = standardize(raw_test, stats).first;
            return 0;
        });

        // ---- artificial mask ----------------------------------------------
        StageGuard art_stage{"artificial_mask"};
        art_stage.run([&] {
            Rng rng(seed_for(cfg.seed, "artificial"));
            train.a = gen_adjacent_artificial(train.m, cfg.phase1.artificial_fraction, train.axis_meta, rng);
            return 0;
        });

        // ---- phase 1 -------------------------------------------------------
        NoiseSchedule sched = build_schedule(cfg.schedule.steps, cfg.schedule.beta_min, cfg.schedule.beta_max,
                                             cfg.schedule.kind);
        StageGuard phase1_stage{"phase1"};
        Phase1Result phase1;
        double t_phase1 = now_sec();
        phase1_stage.run([&] {
            Rng rng(seed_for(cfg.seed, "phase1"));
            phase1 = pretrain_phase1(train, cfg.phase1, sched, rng);
            return 0;
        });
        report.time_phase1_sec = now_sec() - t_phase1;
        report.phase1_loss = phase1.loss_trace;

        // ---- EM ------------------------------------------------------------
        StageGuard em_stage{"em"};
        const std::size_t data_dim = train.cols();
        std::vector<std::size_t> pr_hidden =
            cfg.recognizer_hidden.empty() ? default_recognizer_hidden(data_dim) : cfg.recognizer_hidden;
        EmState state;
        double t_em = now_sec();
        em_stage.run([&] {
            PatternRecognizer pr;
            if (cfg.recognizer_init == RecognizerInit::zeros) {
                pr = make_zero_recognizer(data_dim, pr_hidden);
            } else {
                Rng rng_init(seed_for(cfg.seed, "recognizer_init"));
                pr = make_recognizer(data_dim, pr_hidden, rng_init);
            }
            InSampleTruth truth;
            const InSampleTruth* truth_ptr = nullptr;
            Tensor in_mask = original_eval_mask(raw_train);
            if (mask_count(in_mask) > 0) {
                truth.x_true_raw = raw_train.x;
                truth.stats = stats;
                truth.eval_mask = std::move(in_mask);
                truth_ptr = &truth;
            }
            Rng rng(seed_for(cfg.seed, "em"));
            state = run_em(phase1.denoiser, pr, train, sched, cfg.em, rng, truth_ptr);
            return 0;
        });
        report.time_em_sec = now_sec() - t_em;
        report.em_trace = state.trace;

        // ---- evaluation ----------------------------------------------------
        StageGuard eval_stage{"evaluate"};
        eval_stage.run([&] {
            const bool raw_space = !cfg.eval.standardized_space;
            auto to_eval_space = [&](const Tensor& x_std) {
                return raw_space ? unstandardize(x_std, stats) : x_std;
            };
            auto truth_eval_space = [&](const MaskedDataset& raw_ds, const MaskedDataset& std_ds) {
                return raw_space ? raw_ds.x : std_ds.x;
            };

            Tensor in_mask = original_eval_mask(raw_train);
            if (mask_count(in_mask) > 0) {
                report.original_in_sample = compute_metrics(truth_eval_space(raw_train, train),
                                                            to_eval_space(state.imputed), in_mask,
                                                            "original_in_sample");
            }
            if (test.rows() > 0) {
                Tensor test_obs = observed_fill(test);
                Rng rng_oos(seed_for(cfg.seed, "eval_oos"));
                Tensor imputed_test =
                    impute_out_of_sample(state, test_obs, test.m, sched, cfg.em, rng_oos);
                Tensor out_mask = original_eval_mask(raw_test);
                if (mask_count(out_mask) > 0) {
                    report.original_out_of_sample =
                        compute_metrics(truth_eval_space(raw_test, test), to_eval_space(imputed_test),
                                        out_mask, "original_out_of_sample");
                }

                // Artificial scope: hide extra observed entries, impute with the
                // reduced mask, score on the hidden ones (truth known).
                Rng rng_art(seed_for(cfg.seed, "eval_art_mask"));
                Tensor a_test =
                    gen_adjacent_artificial(test.m, cfg.eval.artificial_fraction, test.axis_meta, rng_art);
                if (mask_count(a_test) > 0) {
                    Tensor reduced_m = test.m;
                    for (std::size_t i = 0; i < reduced_m.numel(); ++i) {
                        reduced_m.values[i] -= a_test.values[i];
                    }
                    Tensor reduced_obs = observed_fill(test.x, reduced_m);
                    Rng rng_ai(seed_for(cfg.seed, "eval_art_impute"));
                    Tensor imputed_art =
                        impute_out_of_sample(state, reduced_obs, reduced_m, sched, cfg.em, rng_ai);
                    report.artificial_out_of_sample =
                        compute_metrics(truth_eval_space(raw_test, test), to_eval_space(imputed_art),
                                        a_test, "artificial_out_of_sample");
                }

                if (cfg.eval.compute_w2 && truth_complete(raw_test)) {
                    std::size_t n = std::min(test.rows(), cfg.eval.w2_cap);
                    report.w2_out_of_sample = wasserstein2_exact(
                        head_rows(to_eval_space(imputed_test), n),
                        head_rows(truth_eval_space(raw_test, test), n), cfg.eval.w2_cap);
                }
            }
            if (cfg.eval.compute_w2 && truth_complete(raw_train)) {
                std::size_t n = std::min(train.rows(), cfg.eval.w2_cap);
                report.w2_in_sample =
                    wasserstein2_exact(head_rows(to_eval_space(state.imputed), n),
                                       head_rows(truth_eval_space(raw_train, train), n), cfg.eval.w2_cap);
            }

            // Guidance sweep: vary only s, sharing the phase-1 backbone.
            for (std::size_t i = 0; i < cfg.guidance_sweep.size(); ++i) {
                EmConfig em_cfg = cfg.em;
                em_cfg.guidance_scale = cfg.guidance_sweep[i];
                PatternRecognizer pr_i;
                if (cfg.recognizer_init == RecognizerInit::zeros) {
                    pr_i = make_zero_recognizer(data_dim, pr_hidden);
                } else {
                    Rng rng_init(seed_for(cfg.seed, "sweep_pr", i));
                    pr_i = make_recognizer(data_dim, pr_hidden, rng_init);
                }
                Rng rng_em(seed_for(cfg.seed, "sweep_em", i));
                EmState st = run_em(phase1.denoiser, pr_i, train, sched, em_cfg, rng_em, nullptr);
                Rng rng_oos(seed_for(cfg.seed, "sweep_oos", i));
                Tensor imp = impute_out_of_sample(st, observed_fill(test), test.m, sched, em_cfg, rng_oos);
                Tensor out_mask = original_eval_mask(raw_test);
                SweepRow row;
                row.guidance_scale = cfg.guidance_sweep[i];
                row.out_of_sample = compute_metrics(truth_eval_space(raw_test, test), to_eval_space(imp),
                                                    out_mask, "original_out_of_sample");
                report.sweep.push_back(std::move(row));
            }
            return 0;
        });

        // ---- report --------------------------------------------------------
        StageGuard report_stage{"report"};
        report_stage.run([&] {
            Checkpoint ckpt;
            ckpt.denoiser = state.denoiser;
            ckpt.recognizer = state.recognizer;
            ckpt.stats = stats;
            ckpt.schedule_steps = cfg.schedule.steps;
            ckpt.beta_min = cfg.schedule.beta_min;
            ckpt.beta_max = cfg.schedule.beta_max;
            ckpt.schedule_kind = cfg.schedule.kind;
            ckpt.axis_meta = train.axis_meta;
            ckpt.em = cfg.em;
            save_checkpoint(ckpt, (fs::path(cfg.output_dir) / "checkpoint.json").string());

            report.time_total_sec = now_sec() - t_start;
            report.report_path = (fs::path(cfg.output_dir) / "report.json").string();
            write_text(report.report_path, report_to_json(report));
            emit_plot_data(report, cfg.output_dir);
            return 0;
        });
    } catch (const std::exception& e) {
        write_partial(e.what());
        throw;
    }
    return report;
}

} // namespace prdim
