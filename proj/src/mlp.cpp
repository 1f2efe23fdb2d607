#include "prdim/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace prdim {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

double apply_hidden(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::silu: return z * sigmoid(z);
    }
    return z;
}

double hidden_deriv(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::silu: {
            double s = sigmoid(z);
            return s * (1.0 + z * (1.0 - s));
        }
    }
    return 1.0;
}

double apply_output(OutputActivation act, double z) {
    if (act == OutputActivation::identity) return z;
    double zc = z < -kLogitClamp ? -kLogitClamp : (z > kLogitClamp ? kLogitClamp : z);
    return sigmoid(zc);
}

double output_deriv(OutputActivation act, double z) {
    if (act == OutputActivation::identity) return 1.0;
    if (z <= -kLogitClamp || z >= kLogitClamp) return 0.0;  // clamp region
    double p = sigmoid(z);
    return p * (1.0 - p);
}

void check_dims(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs at least input and output dims");
    for (std::size_t d : dims) {
        if (d == 0) throw std::invalid_argument("mlp layer width must be positive");
    }
}

void check_input(const Mlp& net, const Tensor& input) {
    if (input.rank() != 2 || input.shape[1] != net.input_dim()) {
        throw std::invalid_argument("mlp input shape " + shape_str(input) + " incompatible with input dim " +
                                    std::to_string(net.input_dim()));
    }
}

// Forward pass keeping pre-activations; z[l] is the pre-activation of layer l.
std::vector<Tensor> forward_preacts(const Mlp& net, const Tensor& input) {
    std::vector<Tensor> z;
    z.reserve(net.layers.size());
    const Tensor* cur = &input;
    Tensor act;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Tensor zl = matmul(*cur, net.layers[l].w);
        const Tensor& b = net.layers[l].b;
        for (std::size_t i = 0; i < zl.rows(); ++i) {
            for (std::size_t j = 0; j < zl.cols(); ++j) zl.at(i, j) += b.values[j];
        }
        z.push_back(std::move(zl));
        if (l + 1 < net.layers.size()) {
            act = z.back();
            for (double& v : act.values) v = apply_hidden(net.hidden_activation, v);
            cur = &act;
        }
    }
    return z;
}

Tensor activate(const Mlp& net, const Tensor& z, bool last) {
    Tensor a = z;
    if (last) {
        for (double& v : a.values) v = apply_output(net.output_activation, v);
    } else {
        for (double& v : a.values) v = apply_hidden(net.hidden_activation, v);
    }
    return a;
}

// Shared backward chain; parameter gradients are filled only when grads != nullptr.
Tensor backward_impl(const Mlp& net, const Tensor& input, const Tensor& upstream, Gradients* grads) {
    check_input(net, input);
    if (upstream.rank() != 2 || upstream.shape[0] != input.shape[0] || upstream.shape[1] != net.output_dim()) {
        throw std::invalid_argument("mlp upstream grad shape " + shape_str(upstream) + " incompatible with output dim " +
                                    std::to_string(net.output_dim()));
    }
    const std::size_t L = net.layers.size();
    std::vector<Tensor> z = forward_preacts(net, input);
    // Activations entering each layer: acts[0] = input, acts[l] = hidden act of z[l-1].
    std::vector<Tensor> acts(L);
    acts[0] = input;
    for (std::size_t l = 1; l < L; ++l) acts[l] = activate(net, z[l - 1], false);

    if (grads) grads->layers.resize(L);

    Tensor dz = upstream;
    for (std::size_t i = 0; i < dz.values.size(); ++i) {
        dz.values[i] *= output_deriv(net.output_activation, z[L - 1].values[i]);
    }
    Tensor dinput;
    for (std::size_t l = L; l-- > 0;) {
        if (grads) {
            grads->layers[l].w = matmul_tn(acts[l], dz);
            Tensor db = Tensor::zeros({net.layers[l].b.numel()});
            for (std::size_t i = 0; i < dz.rows(); ++i) {
                for (std::size_t j = 0; j < dz.cols(); ++j) db.values[j] += dz.at(i, j);
            }
            grads->layers[l].b = std::move(db);
        }
        Tensor da = matmul_nt(dz, net.layers[l].w);
        if (l == 0) {
            dinput = std::move(da);
        } else {
            dz = std::move(da);
            for (std::size_t i = 0; i < dz.values.size(); ++i) {
                dz.values[i] *= hidden_deriv(net.hidden_activation, z[l - 1].values[i]);
            }
        }
    }
    return dinput;
}

} // namespace

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.numel() + l.b.numel();
    return n;
}

bool Mlp::all_zero() const {
    for (const auto& l : layers) {
        for (double v : l.w.values) {
            if (v != 0.0) return false;
        }
        for (double v : l.b.values) {
            if (v != 0.0) return false;
        }
    }
    return true;
}

bool Gradients::all_finite() const { return first_non_finite_layer() < 0; }

int Gradients::first_non_finite_layer() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].w.all_finite() || !layers[l].b.all_finite()) return (int)l;
    }
    return -1;
}

Mlp make_mlp(const std::vector<std::size_t>& layer_dims, Activation hidden,
             OutputActivation output, Rng& rng) {
    check_dims(layer_dims);
    Mlp net;
    net.layer_dims = layer_dims;
    net.hidden_activation = hidden;
    net.output_activation = output;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        std::size_t in = layer_dims[l], out = layer_dims[l + 1];
        DenseLayer layer;
        layer.w = Tensor::zeros({in, out});
        double bound = std::sqrt(6.0 / (double)in);
        for (double& v : layer.w.values) v = (2.0 * rng.uniform() - 1.0) * bound;
        layer.b = Tensor::zeros({out});
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Mlp make_zero_mlp(const std::vector<std::size_t>& layer_dims, Activation hidden,
                  OutputActivation output) {
    check_dims(layer_dims);
    Mlp net;
    net.layer_dims = layer_dims;
    net.hidden_activation = hidden;
    net.output_activation = output;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        net.layers.push_back({Tensor::zeros({layer_dims[l], layer_dims[l + 1]}),
                              Tensor::zeros({layer_dims[l + 1]})});
    }
    return net;
}

Tensor mlp_forward(const Mlp& net, const Tensor& input) {
    check_input(net, input);
    std::vector<Tensor> z = forward_preacts(net, input);
    return activate(net, z.back(), true);
}

Gradients mlp_backward(const Mlp& net, const Tensor& input, const Tensor& upstream_grad) {
    Gradients g;
    g.input_grad = backward_impl(net, input, upstream_grad, &g);
    return g;
}

Tensor mlp_input_grad(const Mlp& net, const Tensor& input, const Tensor& upstream_grad) {
    return backward_impl(net, input, upstream_grad, nullptr);
}

double finite_diff_check(const std::function<double(const Tensor&)>& objective,
                         const Tensor& point, const Tensor& analytic_grad, double h) {
    if (!point.same_shape(analytic_grad)) {
        throw std::invalid_argument("finite_diff_check: point and gradient shapes differ");
    }
    Tensor x = point;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        double orig = x.values[i];
        x.values[i] = orig + h;
        double fp = objective(x);
        x.values[i] = orig - h;
        double fm = objective(x);
        x.values[i] = orig;
        double numeric = (fp - fm) / (2.0 * h);
        double analytic = analytic_grad.values[i];
        double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
        if (std::isnan(err)) return err;
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace prdim
