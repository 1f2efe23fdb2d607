#include "prdim/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prdim {

namespace {

void check_mirrors(const Mlp& net, const Gradients& grads) {
    if (grads.layers.size() != net.layers.size()) {
        throw std::invalid_argument("gradients do not mirror network: layer count mismatch");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!grads.layers[l].w.same_shape(net.layers[l].w) || !grads.layers[l].b.same_shape(net.layers[l].b)) {
            throw std::invalid_argument("gradients do not mirror network at layer " + std::to_string(l));
        }
    }
}

void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, const OptimizerState& st, double lr) {
    double bc1 = 1.0 - std::pow(st.beta1, (double)st.step);
    double bc2 = 1.0 - std::pow(st.beta2, (double)st.step);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        m.values[i] = st.beta1 * m.values[i] + (1.0 - st.beta1) * g.values[i];
        v.values[i] = st.beta2 * v.values[i] + (1.0 - st.beta2) * g.values[i] * g.values[i];
        double mhat = m.values[i] / bc1;
        double vhat = v.values[i] / bc2;
        p.values[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

} // namespace

void optimizer_step(Mlp& net, const Gradients& grads, OptimizerState& state, double lr) {
    check_mirrors(net, grads);
    int bad = grads.first_non_finite_layer();
    if (bad >= 0) {
        throw std::runtime_error("non-finite gradient in layer " + std::to_string(bad));
    }
    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            axpy_inplace(net.layers[l].w, -lr, grads.layers[l].w);
            axpy_inplace(net.layers[l].b, -lr, grads.layers[l].b);
        }
        state.step++;
        return;
    }
    if (state.m.empty()) {
        for (const auto& l : net.layers) {
            state.m.push_back({Tensor::zeros(l.w.shape), Tensor::zeros(l.b.shape)});
            state.v.push_back({Tensor::zeros(l.w.shape), Tensor::zeros(l.b.shape)});
        }
    }
    state.step++;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        adam_update(net.layers[l].w, grads.layers[l].w, state.m[l].w, state.v[l].w, state, lr);
        adam_update(net.layers[l].b, grads.layers[l].b, state.m[l].b, state.v[l].b, state, lr);
    }
}

} // namespace prdim
