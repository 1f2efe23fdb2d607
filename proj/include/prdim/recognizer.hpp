#pragma once

#include "prdim/mlp.hpp"
#include "prdim/optimizer.hpp"

namespace prdim {

// Per-entry observation-probability estimator D_phi: outputs, for every
// entry of a row, the probability that it is observed.
struct PatternRecognizer {
    Mlp net;  // sigmoid output, input and output width D
};

// Three SiLU hidden layers of width min(512, 8*D) unless overridden.
std::vector<std::size_t> default_recognizer_hidden(std::size_t data_dim);

PatternRecognizer make_recognizer(std::size_t data_dim, const std::vector<std::size_t>& hidden_dims,
                                  Rng& rng);
PatternRecognizer make_zero_recognizer(std::size_t data_dim, const std::vector<std::size_t>& hidden_dims);

// Observation probabilities in (0,1), one per entry.
Tensor pr_predict(const PatternRecognizer& pr, const Tensor& x0);

// Mean over all entries of per-entry binary cross-entropy against the mask.
double pr_loss(const Tensor& m, const Tensor& x0, const PatternRecognizer& pr);

// Gradient of pr_loss with respect to the input, backpropagated through the
// recognizer. Per-row guidance gradients are this times the row count.
Tensor pr_input_grad(const Tensor& m, const Tensor& x0, const PatternRecognizer& pr);

// One optimizer step on pr_loss; returns the pre-step loss value.
double pr_train_step(PatternRecognizer& pr, const Tensor& m, const Tensor& x0, double lr,
                     OptimizerState& opt);

} // namespace prdim
