#pragma once

#include <string>

#include "prdim/tensor.hpp"

namespace prdim {

// Error metrics over the entries selected by an evaluation mask. mre_percent
// is NaN when the true values on the mask sum to zero absolute mass.
struct MetricsReport {
    double rmse = 0.0;
    double mae = 0.0;
    double mre_percent = 0.0;
    std::size_t eval_entry_count = 0;
    std::string scope;
};

MetricsReport compute_metrics(const Tensor& x_true, const Tensor& x_hat, const Tensor& eval_mask,
                              const std::string& scope = "");

// Exact 2-Wasserstein distance between two equal-size point sets under
// squared Euclidean cost: sqrt of the mean matched squared distance under
// the optimal assignment (shortest augmenting path on the dense cost
// matrix). O(n^3); n is capped.
double wasserstein2_exact(const Tensor& a, const Tensor& b, std::size_t cap = 512);

// Rank-based ROC-AUC with midrank tie handling; labels are 0/1.
double roc_auc(const std::vector<double>& scores, const std::vector<double>& labels);

} // namespace prdim
