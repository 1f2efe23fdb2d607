#include "prdim/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "prdim/missing.hpp"

namespace prdim {

namespace {

void check_t(std::size_t t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps) {
        throw std::invalid_argument("timestep " + std::to_string(t) + " outside 1.." + std::to_string(sched.steps));
    }
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
    Tensor out = Tensor::zeros({end - begin, x.cols()});
    for (std::size_t r = begin; r < end; ++r) {
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(r - begin, j) = x.at(idx[r], j);
    }
    return out;
}

} // namespace

NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max, ScheduleKind kind) {
    if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
    if (!(beta_min > 0.0) || !(beta_min < beta_max) || !(beta_max < 1.0)) {
        throw std::invalid_argument("schedule bounds must satisfy 0 < beta_min < beta_max < 1");
    }
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha.resize(steps);
    s.alpha_bar.resize(steps);
    double smin = std::sqrt(beta_min), smax = std::sqrt(beta_max);
    for (std::size_t t = 1; t <= steps; ++t) {
        double frac = steps == 1 ? 0.0 : (double)(t - 1) / (double)(steps - 1);
        double b;
        if (kind == ScheduleKind::quadratic) {
            double r = smin + frac * (smax - smin);
            b = r * r;
        } else {
            b = beta_min + frac * (beta_max - beta_min);
        }
        s.beta[t - 1] = b;
        s.alpha[t - 1] = 1.0 - b;
        s.alpha_bar[t - 1] = (t == 1 ? 1.0 : s.alpha_bar[t - 2]) * s.alpha[t - 1];
    }
    return s;
}

Tensor forward_sample(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    check_t(t, sched);
    if (!x0.same_shape(eps)) throw std::invalid_argument("forward_sample: eps shape mismatch");
    double abar = sched.alpha_bar_at(t);
    double cs = std::sqrt(abar), cn = std::sqrt(1.0 - abar);
    Tensor xt = x0;
    for (std::size_t i = 0; i < xt.values.size(); ++i) {
        xt.values[i] = cs * xt.values[i] + cn * eps.values[i];
    }
    return xt;
}

Denoiser make_denoiser(std::size_t data_dim, const std::vector<std::size_t>& hidden_dims,
                       std::size_t embed_dim, Rng& rng) {
    Denoiser d;
    d.data_dim = data_dim;
    d.embed_dim = embed_dim;
    std::vector<std::size_t> dims;
    dims.push_back(3 * data_dim + embed_dim);
    for (std::size_t h : hidden_dims) dims.push_back(h);
    dims.push_back(data_dim);
    d.net = make_mlp(dims, Activation::silu, OutputActivation::identity, rng);
    return d;
}

std::vector<double> timestep_embedding(std::size_t t, std::size_t dim) {
    std::vector<double> emb(dim, 0.0);
    std::size_t half = dim / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double freq = std::pow(10000.0, -(double)i / (double)half);
        emb[2 * i] = std::sin((double)t * freq);
        emb[2 * i + 1] = std::cos((double)t * freq);
    }
    return emb;
}

Tensor denoiser_input(const Denoiser& d, const Tensor& x_t, std::size_t t,
                      const Tensor& cond_values, const Tensor& cond_mask) {
    const std::size_t n = x_t.rows(), dd = d.data_dim;
    if (x_t.cols() != dd || !x_t.same_shape(cond_values) || !x_t.same_shape(cond_mask)) {
        throw std::invalid_argument("denoiser input shapes inconsistent with data dim " + std::to_string(dd));
    }
    std::vector<double> emb = timestep_embedding(t, d.embed_dim);
    Tensor in = Tensor::zeros({n, 3 * dd + d.embed_dim});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dd; ++j) {
            in.at(i, j) = x_t.at(i, j);
            in.at(i, dd + j) = cond_values.at(i, j) * cond_mask.at(i, j);
            in.at(i, 2 * dd + j) = cond_mask.at(i, j);
        }
        for (std::size_t j = 0; j < d.embed_dim; ++j) in.at(i, 3 * dd + j) = emb[j];
    }
    return in;
}

Tensor denoise(const Denoiser& d, const Tensor& x_t, std::size_t t, const Tensor& cond_values,
               const Tensor& cond_mask, const NoiseSchedule& sched) {
    check_t(t, sched);
    return mlp_forward(d.net, denoiser_input(d, x_t, t, cond_values, cond_mask));
}

DiffLossResult diff_loss(const Tensor& x0, const Tensor& target_mask, const Tensor& x_t, std::size_t t,
                         const Denoiser& d, const Tensor& cond_values, const Tensor& cond_mask,
                         double lambda_t) {
    if (!x0.same_shape(target_mask) || !x0.same_shape(x_t)) {
        throw std::invalid_argument("diff_loss: shape mismatch");
    }
    double mask_count = 0.0;
    for (double v : target_mask.values) mask_count += v;
    Tensor input = denoiser_input(d, x_t, t, cond_values, cond_mask);

    DiffLossResult res;
    if (mask_count == 0.0) {
        res.grads.layers.resize(d.net.layers.size());
        for (std::size_t l = 0; l < d.net.layers.size(); ++l) {
            res.grads.layers[l].w = Tensor::zeros(d.net.layers[l].w.shape);
            res.grads.layers[l].b = Tensor::zeros(d.net.layers[l].b.shape);
        }
        res.grads.input_grad = Tensor::zeros(input.shape);
        return res;
    }

    Tensor pred = mlp_forward(d.net, input);
    double denom = std::max(1.0, mask_count);
    Tensor upstream = Tensor::zeros(pred.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        double r = (pred.values[i] - x0.values[i]) * target_mask.values[i];
        loss += r * r;
        upstream.values[i] = 2.0 * lambda_t * r / denom;
    }
    res.loss = lambda_t * loss / denom;
    res.grads = mlp_backward(d.net, input, upstream);
    return res;
}

Phase1Result pretrain_phase1(const MaskedDataset& train, const Phase1Config& cfg,
                             const NoiseSchedule& sched, Rng& rng) {
    if (train.rows() == 0) throw std::invalid_argument("phase 1: empty dataset");
    const std::size_t n = train.rows(), dd = train.cols();
    Phase1Result out;
    out.denoiser = make_denoiser(dd, cfg.hidden_dims, cfg.embed_dim, rng);
    OptimizerState opt;
    opt.kind = cfg.optimizer;

    Tensor x_fill = observed_fill(train);
    // The per-epoch resample flag wins over a dataset-provided artificial mask.
    Tensor art = train.has_artificial() ? train.a
                                        : gen_adjacent_artificial(train.m, cfg.artificial_fraction,
                                                                  train.axis_meta, rng);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::size_t batch = std::max<std::size_t>(1, cfg.batch);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.resample_mask_per_epoch) {
            art = gen_adjacent_artificial(train.m, cfg.artificial_fraction, train.axis_meta, rng);
        }
        // Condition mask reveals observed entries that were not artificially hidden.
        Tensor cond_mask = train.m;
        for (std::size_t i = 0; i < cond_mask.numel(); ++i) cond_mask.values[i] -= art.values[i];
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t end = std::min(n, start + batch);
            Tensor xb = gather_rows(x_fill, order, start, end);
            Tensor mb = gather_rows(train.m, order, start, end);
            Tensor cb = gather_rows(cond_mask, order, start, end);
            std::size_t t = (std::size_t)rng.uniform_int(1, sched.steps);
            Tensor eps = Tensor::zeros(xb.shape);
            rng.fill_normal(eps.values);
            Tensor xt = forward_sample(xb, t, eps, sched);
            DiffLossResult r = diff_loss(xb, mb, xt, t, out.denoiser, xb, cb);
            optimizer_step(out.denoiser.net, r.grads, opt, cfg.lr);
            epoch_loss += r.loss;
            ++batches;
        }
        out.loss_trace.push_back(batches ? epoch_loss / (double)batches : 0.0);
    }
    return out;
}

Tensor reverse_impute(const Denoiser& d, const Tensor& x0_obs, const Tensor& m,
                      const NoiseSchedule& sched, Rng& rng, const GuidanceFn* guidance) {
    if (!x0_obs.same_shape(m)) throw std::invalid_argument("reverse_impute: mask shape mismatch");
    if (x0_obs.cols() != d.data_dim) {
        throw std::invalid_argument("reverse_impute: data dim mismatch with denoiser");
    }
    Tensor x = Tensor::zeros(x0_obs.shape);
    rng.fill_normal(x.values);
    Tensor eps = Tensor::zeros(x.shape);
    for (std::size_t t = sched.steps; t >= 1; --t) {
        Tensor x0hat = denoise(d, x, t, x0_obs, m, sched);
        for (std::size_t i = 0; i < x0hat.values.size(); ++i) {
            x0hat.values[i] = x0hat.values[i] * (1.0 - m.values[i]) + x0_obs.values[i] * m.values[i];
        }
        if (guidance && *guidance) {
            Tensor delta = (*guidance)(x, x0hat, t);
            for (std::size_t i = 0; i < x0hat.values.size(); ++i) x0hat.values[i] -= delta.values[i];
        }
        rng.fill_normal(eps.values);
        double abar_prev = sched.alpha_bar_at(t - 1);
        double cs = std::sqrt(abar_prev), cn = std::sqrt(1.0 - abar_prev);
        for (std::size_t i = 0; i < x.values.size(); ++i) {
            x.values[i] = cs * x0hat.values[i] + cn * eps.values[i];
        }
    }
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        if (m.values[i] == 1.0) x.values[i] = x0_obs.values[i];
    }
    return x;
}

Tensor sample_unguided(const Denoiser& d, const Tensor& x0_obs, const Tensor& m,
                       const NoiseSchedule& sched, Rng& rng) {
    return reverse_impute(d, x0_obs, m, sched, rng, nullptr);
}

} // namespace prdim
