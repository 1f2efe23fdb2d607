#include "prdim/missing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prdim {

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

MaskSample finish(Tensor mask) {
    double missing = 0.0;
    for (double v : mask.values) missing += 1.0 - v;
    double ratio = mask.numel() ? missing / (double)mask.numel() : 0.0;
    return {std::move(mask), ratio};
}

void check_finite(const Tensor& x, const char* op) {
    if (!x.all_finite()) throw std::invalid_argument(std::string(op) + ": input values must be finite");
}

} // namespace

double logistic_missing_prob(double x, double w, double b) {
    return stable_sigmoid(w * (x - b));
}

MaskSample gen_mcar(std::size_t rows, std::size_t cols, double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("mcar probability must be in [0,1]");
    Tensor mask = Tensor::zeros({rows, cols});
    for (double& v : mask.values) v = rng.uniform() < p ? 0.0 : 1.0;
    return finish(std::move(mask));
}

MaskSample gen_mnar_logistic(const Tensor& x, double w, double b, Rng& rng) {
    check_finite(x, "mnar_logistic");
    Tensor mask = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        double pm = logistic_missing_prob(x.values[i], w, b);
        mask.values[i] = rng.uniform() < pm ? 0.0 : 1.0;
    }
    return finish(std::move(mask));
}

MaskSample gen_mnar_quantile(const Tensor& x, double q, double feature_fraction, Rng& rng) {
    check_finite(x, "mnar_quantile");
    if (q < 0.0 || q > 1.0 || feature_fraction < 0.0 || feature_fraction > 1.0) {
        throw std::invalid_argument("mnar_quantile: q and feature_fraction must be in [0,1]");
    }
    const std::size_t rows = x.rows(), cols = x.cols();
    std::size_t n_sel = (std::size_t)((double)cols * feature_fraction + 1e-9);
    if (n_sel == 0) throw std::invalid_argument("mnar_quantile: feature_fraction selects no column");
    std::vector<std::size_t> order(cols);
    for (std::size_t j = 0; j < cols; ++j) order[j] = j;
    rng.shuffle(order);
    Tensor mask = Tensor::full(x.shape, 1.0);
    std::vector<double> colvals(rows);
    for (std::size_t s = 0; s < n_sel; ++s) {
        std::size_t j = order[s];
        for (std::size_t i = 0; i < rows; ++i) colvals[i] = x.at(i, j);
        std::sort(colvals.begin(), colvals.end());
        // Top floor(q*n) entries of the column go missing.
        std::size_t k = (std::size_t)((double)rows * q + 1e-9);
        if (k == 0) continue;
        if (k >= rows) {
            for (std::size_t i = 0; i < rows; ++i) mask.at(i, j) = 0.0;
            continue;
        }
        double threshold = colvals[rows - k - 1];
        for (std::size_t i = 0; i < rows; ++i) {
            if (x.at(i, j) > threshold) mask.at(i, j) = 0.0;
        }
    }
    return finish(std::move(mask));
}

MaskSample gen_mnar_self_censor(const Tensor& x, double w, double b, Rng& rng) {
    return gen_mnar_logistic(x, w, b, rng);
}

MaskSample gen_mnar_latent(const Tensor& x, std::size_t latent_dim, double effect_scale,
                           double w, double b, Rng& rng) {
    check_finite(x, "mnar_latent");
    if (latent_dim == 0) throw std::invalid_argument("mnar_latent: latent_dim must be positive");
    // Fixed random projection of the per-row latent onto a scalar effect.
    std::vector<double> proj(latent_dim);
    for (double& v : proj) v = rng.normal() / std::sqrt((double)latent_dim);
    Tensor mask = Tensor::zeros(x.shape);
    std::vector<double> u(latent_dim);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (double& v : u) v = rng.normal();
        double effect = 0.0;
        for (std::size_t l = 0; l < latent_dim; ++l) effect += proj[l] * u[l];
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double pm = stable_sigmoid(effect_scale * effect + w * (x.at(i, j) - b));
            mask.at(i, j) = rng.uniform() < pm ? 0.0 : 1.0;
        }
    }
    return finish(std::move(mask));
}

MaskSample gen_mnar_truncation(const Tensor& x, double lower, double upper) {
    check_finite(x, "mnar_truncation");
    if (lower >= upper) throw std::invalid_argument("mnar_truncation: lower bound must be below upper bound");
    Tensor mask = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        double v = x.values[i];
        mask.values[i] = (v < lower || v > upper) ? 0.0 : 1.0;
    }
    return finish(std::move(mask));
}

MaskSample gen_mar(const Tensor& x, const std::vector<std::size_t>& driver_columns,
                   double slope, double offset, Rng& rng) {
    check_finite(x, "mar");
    if (driver_columns.empty()) throw std::invalid_argument("mar: driver column set is empty");
    const std::size_t cols = x.cols();
    std::vector<bool> is_driver(cols, false);
    for (std::size_t j : driver_columns) {
        if (j >= cols) throw std::invalid_argument("mar: driver column out of range");
        is_driver[j] = true;
    }
    std::size_t n_driver = 0;
    for (bool d : is_driver) n_driver += d ? 1 : 0;
    if (n_driver == cols) throw std::invalid_argument("mar: driver set covers all columns");
    Tensor mask = Tensor::full(x.shape, 1.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double driver_mean = 0.0;
        for (std::size_t j : driver_columns) driver_mean += x.at(i, j);
        driver_mean /= (double)driver_columns.size();
        double pm = stable_sigmoid(slope * driver_mean + offset);
        for (std::size_t j = 0; j < cols; ++j) {
            if (is_driver[j]) continue;
            if (rng.uniform() < pm) mask.at(i, j) = 0.0;
        }
    }
    return finish(std::move(mask));
}

MaskSample gen_mask(const MechanismSpec& spec, const Tensor& x, Rng& rng) {
    switch (spec.kind) {
        case MechanismKind::none: {
            Tensor mask = Tensor::zeros(x.shape);
            for (std::size_t i = 0; i < x.numel(); ++i) {
                mask.values[i] = std::isfinite(x.values[i]) ? 1.0 : 0.0;
            }
            return finish(std::move(mask));
        }
        case MechanismKind::mcar: return gen_mcar(x.rows(), x.cols(), spec.p, rng);
        case MechanismKind::mar: return gen_mar(x, spec.driver_columns, spec.slope, spec.offset, rng);
        case MechanismKind::mnar_logistic: return gen_mnar_logistic(x, spec.w, spec.b, rng);
        case MechanismKind::mnar_quantile: return gen_mnar_quantile(x, spec.q, spec.feature_fraction, rng);
        case MechanismKind::mnar_self_censor: return gen_mnar_self_censor(x, spec.w, spec.b, rng);
        case MechanismKind::mnar_latent:
            return gen_mnar_latent(x, spec.latent_dim, spec.effect_scale, spec.w, spec.b, rng);
        case MechanismKind::mnar_truncation: return gen_mnar_truncation(x, spec.lower, spec.upper);
    }
    throw std::logic_error("unknown mechanism kind");
}

Tensor gen_adjacent_artificial(const Tensor& m, double target_fraction,
                               const std::optional<AxisMeta>& axis_meta, Rng& rng) {
    if (target_fraction < 0.0 || target_fraction > 1.0) {
        throw std::invalid_argument("adjacent artificial masking fraction must be in [0,1]");
    }
    const std::size_t rows = m.rows(), cols = m.cols();
    Tensor a = Tensor::zeros(m.shape);
    std::size_t observed = 0;
    for (double v : m.values) observed += v == 1.0 ? 1 : 0;
    std::size_t budget = (std::size_t)((double)observed * target_fraction + 1e-9);
    if (budget == 0) return a;

    // Observed entries whose temporal neighbour within the window is missing.
    std::vector<std::size_t> candidates;
    if (axis_meta) {
        const std::size_t steps = axis_meta->steps;
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t f = 0; f < axis_meta->features; ++f) {
                for (std::size_t t = 0; t < steps; ++t) {
                    std::size_t j = f * steps + t;
                    if (m.at(i, j) != 1.0) continue;
                    bool adj = (t > 0 && m.at(i, j - 1) == 0.0) || (t + 1 < steps && m.at(i, j + 1) == 0.0);
                    if (adj) candidates.push_back(i * cols + j);
                }
            }
        }
    }
    rng.shuffle(candidates);
    std::size_t taken = std::min(budget, candidates.size());
    for (std::size_t s = 0; s < taken; ++s) a.values[candidates[s]] = 1.0;

    if (taken < budget) {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < m.numel(); ++i) {
            if (m.values[i] == 1.0 && a.values[i] == 0.0) rest.push_back(i);
        }
        rng.shuffle(rest);
        std::size_t extra = std::min(budget - taken, rest.size());
        for (std::size_t s = 0; s < extra; ++s) a.values[rest[s]] = 1.0;
    }
    return a;
}

} // namespace prdim
