#pragma once

#include <optional>
#include <vector>

#include "prdim/dataset.hpp"
#include "prdim/rng.hpp"
#include "prdim/tensor.hpp"

namespace prdim {

enum class MechanismKind {
    none,  // leave natural missing untouched
    mcar,
    mar,
    mnar_logistic,
    mnar_quantile,
    mnar_self_censor,
    mnar_latent,
    mnar_truncation,
};

struct MechanismSpec {
    MechanismKind kind = MechanismKind::mcar;
    double p = 0.1;            // mcar
    double w = 5.0;            // logistic slope (logistic / self_censor / latent)
    double b = 0.8;            // logistic offset
    double q = 0.25;           // quantile
    double feature_fraction = 1.0;
    std::size_t latent_dim = 4;
    double effect_scale = 1.0;
    double lower = 0.0;        // truncation bounds
    double upper = 0.0;
    std::vector<std::size_t> driver_columns;  // mar
    double slope = 0.0;        // mar
    double offset = 0.0;       // mar
};

struct MaskSample {
    Tensor mask;  // 1 = observed
    double realized_missing_ratio = 0.0;
};

// Probability that an entry with value x goes missing under the logistic
// mechanism. The mechanism's verbal behaviour in its source (larger values
// more likely missing) wins over the ambiguous formula, so this is
// sigmoid(w*(x - b)) as the probability of MISSING.
double logistic_missing_prob(double x, double w, double b);

MaskSample gen_mcar(std::size_t rows, std::size_t cols, double p, Rng& rng);
MaskSample gen_mnar_logistic(const Tensor& x, double w, double b, Rng& rng);
// Deterministic within selected columns: entries above the column's
// empirical (1-q)-quantile are missing with probability 1.
MaskSample gen_mnar_quantile(const Tensor& x, double q, double feature_fraction, Rng& rng);
MaskSample gen_mnar_self_censor(const Tensor& x, double w, double b, Rng& rng);
MaskSample gen_mnar_latent(const Tensor& x, std::size_t latent_dim, double effect_scale,
                           double w, double b, Rng& rng);
MaskSample gen_mnar_truncation(const Tensor& x, double lower, double upper);
MaskSample gen_mar(const Tensor& x, const std::vector<std::size_t>& driver_columns,
                   double slope, double offset, Rng& rng);

MaskSample gen_mask(const MechanismSpec& spec, const Tensor& x, Rng& rng);

// Artificial-missing selection for the pretraining phase. Candidates are
// observed entries temporally adjacent (t-1 / t+1, same feature) to an
// original-missing entry; the budget is floor(p * #observed). When the
// candidate pool is smaller than the budget the remainder is drawn MCAR
// from the remaining observed entries. Without axis_meta (tabular data)
// the pool is empty and the whole budget falls back to MCAR.
Tensor gen_adjacent_artificial(const Tensor& m, double target_fraction,
                               const std::optional<AxisMeta>& axis_meta, Rng& rng);

} // namespace prdim
