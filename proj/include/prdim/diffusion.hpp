#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "prdim/dataset.hpp"
#include "prdim/mlp.hpp"
#include "prdim/optimizer.hpp"
#include "prdim/rng.hpp"

namespace prdim {

enum class ScheduleKind { quadratic, linear };

// Vectors are indexed by step-1 (steps run 1..T). alpha_bar_at(0) == 1 so
// the final reverse transition returns the clean estimate un-noised.
struct NoiseSchedule {
    std::size_t steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    double alpha_bar_at(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
};

// Quadratic: beta_t = (sqrt(beta_min) + (t-1)/(T-1) * (sqrt(beta_max)-sqrt(beta_min)))^2.
NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max, ScheduleKind kind);

// x_t = sqrt(abar_t) * x0 + sqrt(1-abar_t) * eps, 1 <= t <= T.
Tensor forward_sample(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);

// Conditional clean-data predictor. Input rows are the concatenation
// [x_t | observed values (zeros at hidden entries) | condition mask | time embedding].
struct Denoiser {
    Mlp net;
    std::size_t data_dim = 0;
    std::size_t embed_dim = 64;
};

Denoiser make_denoiser(std::size_t data_dim, const std::vector<std::size_t>& hidden_dims,
                       std::size_t embed_dim, Rng& rng);

std::vector<double> timestep_embedding(std::size_t t, std::size_t dim);

Tensor denoiser_input(const Denoiser& d, const Tensor& x_t, std::size_t t,
                      const Tensor& cond_values, const Tensor& cond_mask);

// Raw network prediction over all entries; observed-entry overwrite is the
// sampler's job.
Tensor denoise(const Denoiser& d, const Tensor& x_t, std::size_t t, const Tensor& cond_values,
               const Tensor& cond_mask, const NoiseSchedule& sched);

struct DiffLossResult {
    double loss = 0.0;
    Gradients grads;
};

// lambda_t * sum(((pred - x0) ⊙ target_mask)^2) / max(1, sum(target_mask)),
// with gradients for the denoiser parameters. A zero target mask yields
// loss 0 with zero gradients.
DiffLossResult diff_loss(const Tensor& x0, const Tensor& target_mask, const Tensor& x_t, std::size_t t,
                         const Denoiser& d, const Tensor& cond_values, const Tensor& cond_mask,
                         double lambda_t = 1.0);

struct Phase1Config {
    std::size_t epochs = 200;
    std::size_t batch = 128;
    double lr = 1e-3;
    double artificial_fraction = 0.1;
    bool resample_mask_per_epoch = true;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::vector<std::size_t> hidden_dims = {128, 128};
    std::size_t embed_dim = 64;
};

struct Phase1Result {
    Denoiser denoiser;
    std::vector<double> loss_trace;  // per-epoch mean loss
};

// Conditional pretraining: per epoch draw (or reuse) the artificial mask,
// per batch draw t and eps, condition on observed-minus-artificial entries
// and reconstruct all observed entries.
Phase1Result pretrain_phase1(const MaskedDataset& train, const Phase1Config& cfg,
                             const NoiseSchedule& sched, Rng& rng);

// Guidance hook for the reverse chain: receives (x_t, x0_hat after the
// observed-entry overwrite, t) and returns the update to subtract from
// x0_hat, already scaled, masked and clipped. Null means no guidance.
using GuidanceFn = std::function<Tensor(const Tensor& x_t, const Tensor& x0_hat, std::size_t t)>;

Tensor reverse_impute(const Denoiser& d, const Tensor& x0_obs, const Tensor& m,
                      const NoiseSchedule& sched, Rng& rng, const GuidanceFn* guidance);

// Reverse chain without guidance; observed entries of the result equal
// x0_obs exactly.
Tensor sample_unguided(const Denoiser& d, const Tensor& x0_obs, const Tensor& m,
                       const NoiseSchedule& sched, Rng& rng);

} // namespace prdim
