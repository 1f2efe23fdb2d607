#include "prdim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace prdim {

MetricsReport compute_metrics(const Tensor& x_true, const Tensor& x_hat, const Tensor& eval_mask,
                              const std::string& scope) {
    if (!x_true.same_shape(x_hat) || !x_true.same_shape(eval_mask)) {
        throw std::invalid_argument("compute_metrics: shape mismatch");
    }
    double se = 0.0, ae = 0.0, true_mass = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x_true.numel(); ++i) {
        double mv = eval_mask.values[i];
        if (mv == 0.0) continue;
        if (mv != 1.0) throw std::invalid_argument("compute_metrics: eval mask is not binary");
        double diff = x_true.values[i] - x_hat.values[i];
        se += diff * diff;
        ae += std::abs(diff);
        true_mass += std::abs(x_true.values[i]);
        ++count;
    }
    if (count == 0) throw std::invalid_argument("compute_metrics: empty evaluation mask");
    MetricsReport r;
    r.scope = scope;
    r.eval_entry_count = count;
    r.rmse = std::sqrt(se / (double)count);
    r.mae = ae / (double)count;
    r.mre_percent = true_mass > 0.0 ? ae / true_mass * 100.0 : std::numeric_limits<double>::quiet_NaN();
    if (r.mae > r.rmse * (1.0 + 1e-12) + 1e-300) {
        throw std::logic_error("metrics inconsistency: MAE exceeds RMSE");
    }
    return r;
}

namespace {

// Dense shortest-augmenting-path assignment (Jonker-Volgenant family).
// Returns the optimal column for each row of the square cost matrix.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, n);  // p[j]: row matched to column j (n = free)
    std::vector<std::size_t> way(n + 1, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        std::size_t j0 = n;
        p[n] = i;
        do {
            used[j0] = true;
            std::size_t i0 = p[j0], j1 = n;
            double delta = inf;
            for (std::size_t j = 0; j < n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 * n + j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (p[j] < n) row_to_col[p[j]] = j;
    }
    return row_to_col;
}

} // namespace

double wasserstein2_exact(const Tensor& a, const Tensor& b, std::size_t cap) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
        throw std::invalid_argument("wasserstein2_exact: point sets must be [n x d] with equal d");
    }
    const std::size_t n = a.rows();
    if (n != b.rows()) {
        throw std::invalid_argument("wasserstein2_exact: point sets must have equal cardinality");
    }
    if (n == 0) throw std::invalid_argument("wasserstein2_exact: empty point sets");
    if (n > cap) {
        throw std::invalid_argument("wasserstein2_exact: " + std::to_string(n) + " points exceed cap " +
                                    std::to_string(cap));
    }
    const std::size_t d = a.cols();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                double diff = a.at(i, k) - b.at(j, k);
                sq += diff * diff;
            }
            cost[i * n + j] = sq;
        }
    }
    std::vector<std::size_t> match = solve_assignment(cost, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
    return std::sqrt(total / (double)n);
}

double roc_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw std::invalid_argument("roc_auc: scores/labels size mismatch");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
    // Midranks for ties.
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double mid = 0.5 * (double)(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == 1.0) {
            pos += 1.0;
            rank_sum += rank[k];
        }
    }
    double neg = (double)labels.size() - pos;
    if (pos == 0.0 || neg == 0.0) {
        throw std::invalid_argument("roc_auc: needs both positive and negative labels");
    }
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

} // namespace prdim
