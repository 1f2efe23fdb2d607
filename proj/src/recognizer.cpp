#include "prdim/recognizer.hpp"

#include <cmath>
#include <stdexcept>

namespace prdim {

namespace {

void check_shapes(const Tensor& m, const Tensor& x0, const PatternRecognizer& pr) {
    if (!m.same_shape(x0)) throw std::invalid_argument("recognizer: mask/input shape mismatch");
    if (x0.rank() != 2 || x0.cols() != pr.net.input_dim()) {
        throw std::invalid_argument("recognizer: input shape " + shape_str(x0) + " incompatible with width " +
                                    std::to_string(pr.net.input_dim()));
    }
}

// dL/dp for the entry-count-normalized BCE.
Tensor bce_upstream(const Tensor& m, const Tensor& probs) {
    Tensor up = Tensor::zeros(probs.shape);
    double count = (double)probs.numel();
    for (std::size_t i = 0; i < probs.numel(); ++i) {
        double p = probs.values[i];
        up.values[i] = (-m.values[i] / p + (1.0 - m.values[i]) / (1.0 - p)) / count;
    }
    return up;
}

} // namespace

std::vector<std::size_t> default_recognizer_hidden(std::size_t data_dim) {
    std::size_t w = std::min<std::size_t>(512, 8 * data_dim);
    return {w, w, w};
}

PatternRecognizer make_recognizer(std::size_t data_dim, const std::vector<std::size_t>& hidden_dims,
                                  Rng& rng) {
    std::vector<std::size_t> dims;
    dims.push_back(data_dim);
    for (std::size_t h : hidden_dims) dims.push_back(h);
    dims.push_back(data_dim);
    return {make_mlp(dims, Activation::silu, OutputActivation::sigmoid, rng)};
}

PatternRecognizer make_zero_recognizer(std::size_t data_dim, const std::vector<std::size_t>& hidden_dims) {
    std::vector<std::size_t> dims;
    dims.push_back(data_dim);
    for (std::size_t h : hidden_dims) dims.push_back(h);
    dims.push_back(data_dim);
    return {make_zero_mlp(dims, Activation::silu, OutputActivation::sigmoid)};
}

Tensor pr_predict(const PatternRecognizer& pr, const Tensor& x0) {
    if (x0.rank() != 2 || x0.cols() != pr.net.input_dim()) {
        throw std::invalid_argument("pr_predict: input shape " + shape_str(x0) + " incompatible with width " +
                                    std::to_string(pr.net.input_dim()));
    }
    return mlp_forward(pr.net, x0);
}

double pr_loss(const Tensor& m, const Tensor& x0, const PatternRecognizer& pr) {
    check_shapes(m, x0, pr);
    Tensor probs = pr_predict(pr, x0);
    double total = 0.0;
    for (std::size_t i = 0; i < probs.numel(); ++i) {
        double p = probs.values[i];
        total += -m.values[i] * std::log(p) - (1.0 - m.values[i]) * std::log(1.0 - p);
    }
    return total / (double)probs.numel();
}

Tensor pr_input_grad(const Tensor& m, const Tensor& x0, const PatternRecognizer& pr) {
    check_shapes(m, x0, pr);
    Tensor probs = pr_predict(pr, x0);
    return mlp_input_grad(pr.net, x0, bce_upstream(m, probs));
}

double pr_train_step(PatternRecognizer& pr, const Tensor& m, const Tensor& x0, double lr,
                     OptimizerState& opt) {
    check_shapes(m, x0, pr);
    Tensor probs = pr_predict(pr, x0);
    double total = 0.0;
    for (std::size_t i = 0; i < probs.numel(); ++i) {
        double p = probs.values[i];
        total += -m.values[i] * std::log(p) - (1.0 - m.values[i]) * std::log(1.0 - p);
    }
    Gradients g = mlp_backward(pr.net, x0, bce_upstream(m, probs));
    optimizer_step(pr.net, g, opt, lr);
    return total / (double)probs.numel();
}

} // namespace prdim
