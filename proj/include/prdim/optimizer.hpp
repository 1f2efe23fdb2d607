#pragma once

#include "prdim/mlp.hpp"

namespace prdim {

enum class OptimizerKind { sgd, adam };

// Adam moments are allocated lazily on the first step so the same state
// object can be declared before the network it drives.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<DenseLayer> m;
    std::vector<DenseLayer> v;
};

// One descent step. Throws on non-finite gradients, naming the layer.
void optimizer_step(Mlp& net, const Gradients& grads, OptimizerState& state, double lr);

} // namespace prdim
