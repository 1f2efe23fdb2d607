#include "prdim/em.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace prdim {

namespace {

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
    Tensor out = Tensor::zeros({end - begin, x.cols()});
    for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(r - begin, j) = x.at(idx[r], j);
    }
    return out;
}

void clip_rows(Tensor& g, double max_norm) {
    for (std::size_t i = 0; i < g.rows(); ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) sq += g.at(i, j) * g.at(i, j);
        double norm = std::sqrt(sq);
        if (norm > max_norm) {
            double scale = max_norm / norm;
            for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) *= scale;
        }
    }
}

// Forward-only loss values used for tracing when a learning rate is zero.
double diff_loss_value(const Denoiser& d, const Tensor& x0, const Tensor& x_t, std::size_t t,
                       const Tensor& cond_values, const Tensor& cond_mask, const NoiseSchedule& sched) {
    Tensor pred = denoise(d, x_t, t, cond_values, cond_mask, sched);
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        double r = pred.values[i] - x0.values[i];
        loss += r * r;
    }
    return loss / (double)pred.numel();
}

} // namespace

double EmConfig::clip_norm_for(std::size_t data_dim) const {
    return grad_clip_norm > 0.0 ? grad_clip_norm : 10.0 * std::sqrt((double)data_dim);
}

void EmConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("em: iteration count must be at least 1");
    if (maximization_epochs < 1) throw std::invalid_argument("em: maximization epochs must be at least 1");
    if (guidance_scale < 0.0) throw std::invalid_argument("em: guidance scale must be non-negative");
    if (mode == EmMode::soft && soft_samples < 2) {
        throw std::invalid_argument("em: soft mode needs at least 2 samples");
    }
}

Tensor e_step(const Denoiser& d, const PatternRecognizer& pr, const Tensor& x0_obs, const Tensor& m,
              const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng) {
    const double s = cfg.guidance_scale;
    if (s == 0.0) {
        // Guidance consumes no randomness, so skipping it preserves the
        // stream; the output is bitwise identical to the unguided sampler.
        return sample_unguided(d, x0_obs, m, sched, rng);
    }
    const double clip = cfg.clip_norm_for(x0_obs.cols());
    // The guidance term applies the per-sample BCE in its sum form, so
    // pr_input_grad (normalized over all batch entries) is scaled back by
    // the entry count. The clip default of 10*sqrt(D) is calibrated to this
    // scale.
    const double entries = (double)x0_obs.numel();
    GuidanceFn guidance = [&](const Tensor& x_t, const Tensor& x0hat, std::size_t t) -> Tensor {
        Tensor u = pr_input_grad(m, x0hat, pr);
        for (std::size_t i = 0; i < u.numel(); ++i) {
            u.values[i] *= entries * (1.0 - m.values[i]);
        }
        Tensor g;
        double abar = sched.alpha_bar_at(t);
        if (cfg.guidance_path == GuidancePath::full_chain) {
            Tensor full = mlp_input_grad(d.net, denoiser_input(d, x_t, t, x0_obs, m), u);
            g = Tensor::zeros(x0hat.shape);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) = full.at(i, j);
            }
        } else {
            g = u;
            scale_inplace(g, 1.0 / std::sqrt(abar));
        }
        for (std::size_t i = 0; i < g.numel(); ++i) g.values[i] *= 1.0 - m.values[i];
        clip_rows(g, clip);
        scale_inplace(g, s * (1.0 - abar) / std::sqrt(abar));
        if (!g.all_finite()) {
            throw std::runtime_error("e_step: non-finite guidance update at t=" + std::to_string(t));
        }
        return g;
    };
    Tensor out = reverse_impute(d, x0_obs, m, sched, rng, &guidance);
    if (!out.all_finite()) throw std::runtime_error("e_step: non-finite imputation");
    return out;
}

Tensor e_step_expectation(const Denoiser& d, const PatternRecognizer& pr, const Tensor& x0_obs,
                          const Tensor& m, const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng) {
    if (cfg.mode == EmMode::hard) {
        return e_step(d, pr, x0_obs, m, sched, cfg, rng);
    }
    Tensor mean = Tensor::zeros(x0_obs.shape);
    for (std::size_t k = 0; k < cfg.soft_samples; ++k) {
        add_inplace(mean, e_step(d, pr, x0_obs, m, sched, cfg, rng));
    }
    scale_inplace(mean, 1.0 / (double)cfg.soft_samples);
    // Re-pin observed entries; averaging can lose the last ulp.
    for (std::size_t i = 0; i < mean.numel(); ++i) {
        if (m.values[i] == 1.0) mean.values[i] = x0_obs.values[i];
    }
    return mean;
}

MStepResult m_step(Denoiser& d, PatternRecognizer& pr, OptimizerState& opt_theta,
                   OptimizerState& opt_phi, const Tensor& imputed, const Tensor& x0_obs,
                   const Tensor& m, const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng) {
    if (!imputed.all_finite()) throw std::invalid_argument("m_step: imputed data must be finite");
    const std::size_t n = imputed.rows();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch);

    MStepResult res;
    std::size_t steps = 0;
    for (std::size_t epoch = 0; epoch < cfg.maximization_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t end = std::min(n, start + batch);
            Tensor xb = gather_rows(imputed, order, start, end);
            Tensor ob = gather_rows(x0_obs, order, start, end);
            Tensor mb = gather_rows(m, order, start, end);
            std::size_t t = (std::size_t)rng.uniform_int(1, sched.steps);
            Tensor eps = Tensor::zeros(xb.shape);
            rng.fill_normal(eps.values);
            Tensor xt = forward_sample(xb, t, eps, sched);
            if (cfg.lr_theta != 0.0) {
                DiffLossResult r =
                    diff_loss(xb, Tensor::full(xb.shape, 1.0), xt, t, d, ob, mb);
                optimizer_step(d.net, r.grads, opt_theta, cfg.lr_theta);
                res.l_diff += r.loss;
            } else {
                res.l_diff += diff_loss_value(d, xb, xt, t, ob, mb, sched);
            }
            if (cfg.lr_phi != 0.0) {
                res.l_pr += pr_train_step(pr, mb, xb, cfg.lr_phi, opt_phi);
            } else {
                res.l_pr += pr_loss(mb, xb, pr);
            }
            ++steps;
        }
    }
    if (steps > 0) {
        res.l_diff /= (double)steps;
        res.l_pr /= (double)steps;
    }
    return res;
}

EmState run_em(const Denoiser& phase1_denoiser, const PatternRecognizer& fresh_recognizer,
               const MaskedDataset& train, const NoiseSchedule& sched, const EmConfig& cfg,
               Rng& rng, const InSampleTruth* truth) {
    cfg.validate();
    if (train.rows() == 0) throw std::invalid_argument("run_em: empty training set");

    EmState state;
    state.denoiser = phase1_denoiser;
    state.recognizer = fresh_recognizer;
    state.opt_theta.kind = cfg.optimizer;
    state.opt_phi.kind = cfg.optimizer;

    const Tensor x0_obs = observed_fill(train.x, train.m);
    const std::uint64_t base = rng.next_u64();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t k = 1; k <= cfg.iterations; ++k) {
        Rng rng_e(seed_for(base, "em_estep", k));
        state.imputed = e_step_expectation(state.denoiser, state.recognizer, x0_obs, train.m, sched,
                                           cfg, rng_e);
        if (truth) {
            Tensor raw = unstandardize(state.imputed, truth->stats);
            MetricsReport r = compute_metrics(truth->x_true_raw, raw, truth->eval_mask, "original_in_sample");
            state.trace.mae_in.push_back(r.mae);
            state.trace.rmse_in.push_back(r.rmse);
            state.trace.mre_in.push_back(r.mre_percent);
        } else {
            state.trace.mae_in.push_back(nan);
            state.trace.rmse_in.push_back(nan);
            state.trace.mre_in.push_back(nan);
        }
        Rng rng_m(seed_for(base, "em_mstep", k));
        MStepResult mres = m_step(state.denoiser, state.recognizer, state.opt_theta, state.opt_phi,
                                  state.imputed, x0_obs, train.m, sched, cfg, rng_m);
        state.trace.l_diff.push_back(mres.l_diff);
        state.trace.l_pr.push_back(mres.l_pr);
        state.iteration = k;
    }

    Rng rng_final(seed_for(base, "em_final", 0));
    state.imputed = e_step_expectation(state.denoiser, state.recognizer, x0_obs, train.m, sched, cfg,
                                       rng_final);
    return state;
}

Tensor impute_out_of_sample(const EmState& state, const Tensor& test_x0_obs, const Tensor& test_m,
                            const NoiseSchedule& sched, const EmConfig& cfg, Rng& rng) {
    if (test_x0_obs.cols() != state.denoiser.data_dim) {
        throw std::invalid_argument("impute_out_of_sample: feature count " + std::to_string(test_x0_obs.cols()) +
                                    " does not match trained dimension " +
                                    std::to_string(state.denoiser.data_dim));
    }
    return e_step_expectation(state.denoiser, state.recognizer, test_x0_obs, test_m, sched, cfg, rng);
}

} // namespace prdim
