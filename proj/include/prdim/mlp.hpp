#pragma once

#include <functional>
#include <vector>

#include "prdim/rng.hpp"
#include "prdim/tensor.hpp"

namespace prdim {

enum class Activation { relu, silu };
enum class OutputActivation { identity, sigmoid };

// Logits are clamped to [-kLogitClamp, kLogitClamp] before the output
// sigmoid, so probabilities stay strictly inside (0,1) and BCE never
// evaluates log(0).
inline constexpr double kLogitClamp = 30.0;

struct DenseLayer {
    Tensor w;  // [in x out]
    Tensor b;  // [out]
};

struct Mlp {
    std::vector<std::size_t> layer_dims;  // {in, hidden..., out}
    std::vector<DenseLayer> layers;       // layer_dims.size() - 1 entries
    Activation hidden_activation = Activation::silu;
    OutputActivation output_activation = OutputActivation::identity;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t param_count() const;
    bool all_zero() const;
};

// Parameter gradients mirroring an Mlp, plus the gradient with respect to
// the network input.
struct Gradients {
    std::vector<DenseLayer> layers;
    Tensor input_grad;  // [N x in]

    bool all_finite() const;
    // Index of the first layer with a non-finite gradient, or -1.
    int first_non_finite_layer() const;
};

// He-uniform weights, zero biases.
Mlp make_mlp(const std::vector<std::size_t>& layer_dims, Activation hidden,
             OutputActivation output, Rng& rng);
Mlp make_zero_mlp(const std::vector<std::size_t>& layer_dims, Activation hidden,
                  OutputActivation output);

// input [N x in] -> [N x out]; output activation applied to the last layer.
Tensor mlp_forward(const Mlp& net, const Tensor& input);

// upstream_grad is dL/d(output), post output-activation. Intermediates are
// recomputed rather than cached so the net itself stays immutable.
Gradients mlp_backward(const Mlp& net, const Tensor& input, const Tensor& upstream_grad);

// Same chain as mlp_backward but skips the parameter gradients; used on the
// guidance path where only dL/d(input) is needed.
Tensor mlp_input_grad(const Mlp& net, const Tensor& input, const Tensor& upstream_grad);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|),
// with NaN coordinates propagated into the result.
double finite_diff_check(const std::function<double(const Tensor&)>& objective,
                         const Tensor& point, const Tensor& analytic_grad, double h);

} // namespace prdim
