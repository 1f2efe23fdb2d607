#pragma once

#include <optional>

#include "prdim/dataset.hpp"
#include "prdim/diffusion.hpp"
#include "prdim/metrics.hpp"
#include "prdim/recognizer.hpp"

namespace prdim {

enum class GuidancePath {
    // Backpropagate the recognizer gradient through the denoiser into x_t.
    full_chain,
    // Approximate d(x0_hat)/d(x_t) by the Tweedie factor 1/sqrt(abar_t);
    // costs one recognizer backprop instead of a denoiser backprop.
    x0hat_only,
};

enum class EmMode { hard, soft };

struct EmConfig {
    std::size_t iterations = 100;           // K
    std::size_t maximization_epochs = 1;    // N_m
    double lr_theta = 1e-3;
    double lr_phi = 1e-3;
    double guidance_scale = 1.0;            // s
    GuidancePath guidance_path = GuidancePath::full_chain;
    EmMode mode = EmMode::hard;
    std::size_t soft_samples = 4;
    double grad_clip_norm = 0.0;            // <= 0 resolves to 10*sqrt(D)
    std::size_t batch = 128;
    OptimizerKind optimizer = OptimizerKind::adam;

    double clip_norm_for(std::size_t data_dim) const;
    void validate() const;
};

struct EmTrace {
    std::vector<double> l_diff;
    std::vector<double> l_pr;
    std::vector<double> mae_in;
    std::vector<double> rmse_in;
    std::vector<double> mre_in;
};

// Ground truth context for in-sample metric tracing: raw-space truth, the
// train normalization stats, and the entries to evaluate (original missing
// with known truth).
struct InSampleTruth {
    Tensor x_true_raw;
    NormStats stats;
    Tensor eval_mask;
};

struct EmState {
    Denoiser denoiser;
    PatternRecognizer recognizer;
    Tensor imputed;  // observed entries frozen to x0_obs
    std::size_t iteration = 0;
    EmTrace trace;
    OptimizerState opt_theta;
    OptimizerState opt_phi;
};

// Guided reverse chain: start from noise, per step predict the clean data,
// overwrite observed entries, subtract the scaled recognizer gradient
// (zeroed on observed coordinates, norm-clipped per row), then re-noise.
// Observed entries of the result equal x0_obs exactly. With s=0 the output
// is bitwise identical to sample_unguided under the same RNG stream.
Tensor e_step(const Denoiser& d, const PatternRecognizer& pr, const Tensor& x0_obs, const Tensor& m,
              const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng);

// Hard mode: one e_step draw (posterior mode). Soft mode: mean of
// cfg.soft_samples draws (posterior expectation), observed entries re-pinned.
Tensor e_step_expectation(const Denoiser& d, const PatternRecognizer& pr, const Tensor& x0_obs,
                          const Tensor& m, const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng);

struct MStepResult {
    double l_diff = 0.0;
    double l_pr = 0.0;
};

// Joint maximization: per minibatch draw (t, eps), noise the imputed data,
// step the denoiser on the unmasked reconstruction loss conditioned on the
// observed entries, and step the recognizer on the mask BCE.
MStepResult m_step(Denoiser& d, PatternRecognizer& pr, OptimizerState& opt_theta,
                   OptimizerState& opt_phi, const Tensor& imputed, const Tensor& x0_obs,
                   const Tensor& m, const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng);

// Alternate E and M for cfg.iterations rounds, then produce the final
// in-sample imputation with the trained pair. Per-stage RNG substreams are
// derived from one draw of rng via seed_for(base, "em_estep"/"em_mstep", k)
// and seed_for(base, "em_final", 0).
EmState run_em(const Denoiser& phase1_denoiser, const PatternRecognizer& fresh_recognizer,
               const MaskedDataset& train, const NoiseSchedule& sched, const EmConfig& cfg,
               Rng& rng, const InSampleTruth* truth = nullptr);

// E step on held-out rows with frozen parameters.
Tensor impute_out_of_sample(const EmState& state, const Tensor& test_x0_obs, const Tensor& test_m,
                            const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng);

} // namespace prdim
