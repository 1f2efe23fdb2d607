#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "prdim/mlp.hpp"
#include "prdim/optimizer.hpp"

using namespace prdim;

namespace {

// Straight-line forward oracle, independent of mlp_forward's internals.
Tensor oracle_forward(const Mlp& net, const Tensor& input) {
    Tensor a = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Tensor& w = net.layers[l].w;
        const Tensor& b = net.layers[l].b;
        Tensor z = Tensor::zeros({a.rows(), w.cols()});
        for (std::size_t i = 0; i < a.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) {
                double s = b.values[j];
                for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * w.at(k, j);
                z.at(i, j) = s;
            }
        }
        bool last = l + 1 == net.layers.size();
        for (double& v : z.values) {
            if (!last) {
                double sig = 1.0 / (1.0 + std::exp(-v));
                v = net.hidden_activation == Activation::relu ? std::max(v, 0.0) : v * sig;
            } else if (net.output_activation == OutputActivation::sigmoid) {
                double c = std::clamp(v, -kLogitClamp, kLogitClamp);
                v = 1.0 / (1.0 + std::exp(-c));
            }
        }
        a = std::move(z);
    }
    return a;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.values) v = rng.normal() * scale;
    return t;
}

} // namespace

TEST_CASE("zero net maps to zeros (identity) and 0.5 (sigmoid)") {
    Mlp net = make_zero_mlp({3, 4, 2}, Activation::relu, OutputActivation::identity);
    Tensor x({2, 3}, {1, -2, 3, 0.5, 0, -1});
    Tensor y = mlp_forward(net, x);
    for (double v : y.values) CHECK(v == 0.0);

    Mlp sig = make_zero_mlp({3, 4, 2}, Activation::relu, OutputActivation::sigmoid);
    Tensor p = mlp_forward(sig, x);
    for (double v : p.values) CHECK(v == 0.5);
}

TEST_CASE("single identity layer is the identity map") {
    Mlp net = make_zero_mlp({3, 3}, Activation::relu, OutputActivation::identity);
    for (std::size_t i = 0; i < 3; ++i) net.layers[0].w.at(i, i) = 1.0;
    Tensor x({2, 3}, {1.5, -2.25, 3.0, 0.0, 7.0, -0.125});
    Tensor y = mlp_forward(net, x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values[i] == x.values[i]);
}

TEST_CASE("random nets match the straight-line oracle") {
    Rng rng(42);
    for (int rep = 0; rep < 5; ++rep) {
        auto hidden = rep % 2 ? Activation::relu : Activation::silu;
        auto out = rep % 3 ? OutputActivation::identity : OutputActivation::sigmoid;
        Mlp net = make_mlp({5, 8, 6, 3}, hidden, out, rng);
        Tensor x = random_tensor({4, 5}, rng);
        Tensor got = mlp_forward(net, x);
        Tensor want = oracle_forward(net, x);
        for (std::size_t i = 0; i < got.numel(); ++i) {
            CHECK(std::abs(got.values[i] - want.values[i]) < 1e-12);
        }
    }
}

TEST_CASE("forward is deterministic") {
    Rng rng(7);
    Mlp net = make_mlp({4, 6, 4}, Activation::silu, OutputActivation::identity, rng);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor a = mlp_forward(net, x);
    Tensor b = mlp_forward(net, x);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(3);
    Mlp net = make_mlp({4, 5, 2}, Activation::silu, OutputActivation::identity, rng);
    Tensor x = random_tensor({3, 4}, rng);
    Gradients g = mlp_backward(net, x, Tensor::zeros({3, 2}));
    for (const auto& l : g.layers) {
        for (double v : l.w.values) CHECK(v == 0.0);
        for (double v : l.b.values) CHECK(v == 0.0);
    }
    for (double v : g.input_grad.values) CHECK(v == 0.0);
}

TEST_CASE("linear layer input gradient is W g") {
    Rng rng(11);
    Mlp net = make_mlp({4, 3}, Activation::silu, OutputActivation::identity, rng);
    Tensor x = random_tensor({1, 4}, rng);
    Tensor up = random_tensor({1, 3}, rng);
    Gradients g = mlp_backward(net, x, up);
    for (std::size_t k = 0; k < 4; ++k) {
        double want = 0.0;
        for (std::size_t j = 0; j < 3; ++j) want += net.layers[0].w.at(k, j) * up.at(0, j);
        CHECK(g.input_grad.at(0, k) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("upstream scaling scales the input gradient linearly") {
    Rng rng(19);
    Mlp net = make_mlp({4, 6, 4}, Activation::silu, OutputActivation::sigmoid, rng);
    Tensor x = random_tensor({2, 4}, rng);
    Tensor up = random_tensor({2, 4}, rng);
    Tensor up2 = up;
    scale_inplace(up2, 2.5);
    Tensor g1 = mlp_input_grad(net, x, up);
    Tensor g2 = mlp_input_grad(net, x, up2);
    for (std::size_t i = 0; i < g1.numel(); ++i) {
        CHECK(g2.values[i] == doctest::Approx(2.5 * g1.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("parameter and input gradients match finite differences") {
    Rng rng(123);
    for (int rep = 0; rep < 4; ++rep) {
        Mlp net = make_mlp({3, 6, 5, 2}, Activation::silu,
                           rep % 2 ? OutputActivation::sigmoid : OutputActivation::identity, rng);
        Tensor x = random_tensor({2, 3}, rng);
        Tensor up = random_tensor({2, 2}, rng, 0.5);
        Gradients g = mlp_backward(net, x, up);

        // Scalar objective: sum(upstream ⊙ output). Its gradient w.r.t. any
        // quantity is exactly what backward reports for that upstream seed.
        auto objective_for_input = [&](const Tensor& xin) {
            Tensor y = mlp_forward(net, xin);
            double s = 0.0;
            for (std::size_t i = 0; i < y.numel(); ++i) s += up.values[i] * y.values[i];
            return s;
        };
        CHECK(finite_diff_check(objective_for_input, x, g.input_grad, 1e-5) < 1e-6);

        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto objective_for_w = [&](const Tensor& w) {
                Mlp tmp = net;
                tmp.layers[l].w = w;
                Tensor y = mlp_forward(tmp, x);
                double s = 0.0;
                for (std::size_t i = 0; i < y.numel(); ++i) s += up.values[i] * y.values[i];
                return s;
            };
            CHECK(finite_diff_check(objective_for_w, net.layers[l].w, g.layers[l].w, 1e-5) < 1e-6);
            auto objective_for_b = [&](const Tensor& b) {
                Mlp tmp = net;
                tmp.layers[l].b = b;
                Tensor y = mlp_forward(tmp, x);
                double s = 0.0;
                for (std::size_t i = 0; i < y.numel(); ++i) s += up.values[i] * y.values[i];
                return s;
            };
            CHECK(finite_diff_check(objective_for_b, net.layers[l].b, g.layers[l].b, 1e-5) < 1e-6);
        }
    }
}

TEST_CASE("finite_diff_check on closed-form objectives") {
    Tensor point = Tensor::full({4}, 1.0);
    auto sumsq = [](const Tensor& x) {
        double s = 0.0;
        for (double v : x.values) s += v * v;
        return s;
    };
    Tensor grad = Tensor::full({4}, 2.0);  // d/dx sum(x^2) = 2x at x=1
    CHECK(finite_diff_check(sumsq, point, grad, 1e-5) < 1e-8);

    auto constant = [](const Tensor&) { return 3.0; };
    CHECK(finite_diff_check(constant, point, Tensor::zeros({4}), 1e-5) == 0.0);
}

TEST_CASE("sigmoid outputs stay strictly inside (0,1) under extreme logits") {
    Mlp net = make_zero_mlp({1, 1}, Activation::relu, OutputActivation::sigmoid);
    net.layers[0].w.at(0, 0) = 1000.0;
    Tensor hi = mlp_forward(net, Tensor({1, 1}, {100.0}));
    Tensor lo = mlp_forward(net, Tensor({1, 1}, {-100.0}));
    CHECK(hi.values[0] < 1.0);
    CHECK(hi.values[0] > 0.999);
    CHECK(lo.values[0] > 0.0);
    CHECK(lo.values[0] < 0.001);
}

TEST_CASE("optimizer: lr 0 leaves parameters unchanged") {
    Rng rng(5);
    Mlp net = make_mlp({3, 4, 2}, Activation::silu, OutputActivation::identity, rng);
    Mlp before = net;
    Tensor x = random_tensor({2, 3}, rng);
    Gradients g = mlp_backward(net, x, random_tensor({2, 2}, rng));
    OptimizerState st;
    optimizer_step(net, g, st, 0.0);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t i = 0; i < net.layers[l].w.numel(); ++i) {
            CHECK(net.layers[l].w.values[i] == before.layers[l].w.values[i]);
        }
    }
}

TEST_CASE("plain SGD step on f(w)=w^2 from w=1, lr=0.1 gives 0.8") {
    Mlp net = make_zero_mlp({1, 1}, Activation::relu, OutputActivation::identity);
    net.layers[0].w.at(0, 0) = 1.0;
    Gradients g;
    g.layers.push_back({Tensor({1, 1}, {2.0}), Tensor({1}, {0.0})});  // df/dw = 2w
    OptimizerState st;
    st.kind = OptimizerKind::sgd;
    optimizer_step(net, g, st, 0.1);
    CHECK(net.layers[0].w.at(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("100 SGD steps on a convex quadratic never increase the loss") {
    // f(w) = sum((w - c)^2) over a 1x3 weight matrix.
    Mlp net = make_zero_mlp({1, 3}, Activation::relu, OutputActivation::identity);
    net.layers[0].w = Tensor({1, 3}, {2.0, -1.0, 0.5});
    Tensor c({1, 3}, {0.3, 0.7, -0.2});
    auto loss = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            double d = net.layers[0].w.values[i] - c.values[i];
            s += d * d;
        }
        return s;
    };
    OptimizerState st;
    st.kind = OptimizerKind::sgd;
    double prev = loss();
    for (int step = 0; step < 100; ++step) {
        Gradients g;
        Tensor gw = Tensor::zeros({1, 3});
        for (std::size_t i = 0; i < 3; ++i) gw.values[i] = 2.0 * (net.layers[0].w.values[i] - c.values[i]);
        g.layers.push_back({gw, Tensor::zeros({3})});
        optimizer_step(net, g, st, 0.1);
        double cur = loss();
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
    CHECK(prev < 1e-10);
}

TEST_CASE("non-finite gradient raises an error naming the layer") {
    Rng rng(9);
    Mlp net = make_mlp({2, 3, 2}, Activation::silu, OutputActivation::identity, rng);
    Gradients g;
    g.layers.push_back({Tensor::zeros({2, 3}), Tensor::zeros({3})});
    g.layers.push_back({Tensor::zeros({3, 2}), Tensor::zeros({2})});
    g.layers[1].w.values[0] = std::nan("");
    OptimizerState st;
    CHECK_THROWS_WITH_AS(optimizer_step(net, g, st, 0.1), "non-finite gradient in layer 1",
                         std::runtime_error);
}

TEST_CASE("adam is deterministic across identical runs") {
    auto train = [] {
        Rng rng(77);
        Mlp net = make_mlp({3, 5, 1}, Activation::silu, OutputActivation::identity, rng);
        OptimizerState st;
        Tensor x = random_tensor({4, 3}, rng);
        for (int i = 0; i < 20; ++i) {
            Tensor y = mlp_forward(net, x);
            Tensor up = y;  // minimize 0.5*sum(y^2)
            Gradients g = mlp_backward(net, x, up);
            optimizer_step(net, g, st, 1e-2);
        }
        return net;
    };
    Mlp a = train();
    Mlp b = train();
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t i = 0; i < a.layers[l].w.numel(); ++i) {
            CHECK(a.layers[l].w.values[i] == b.layers[l].w.values[i]);
        }
    }
}

TEST_CASE("mlp rejects mismatched input widths") {
    Mlp net = make_zero_mlp({3, 2}, Activation::relu, OutputActivation::identity);
    CHECK_THROWS_AS(mlp_forward(net, Tensor::zeros({2, 4})), std::invalid_argument);
    CHECK_THROWS_AS(mlp_backward(net, Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), std::invalid_argument);
}

TEST_CASE("param_count matches the dimension formula") {
    Mlp net = make_zero_mlp({7, 11, 3}, Activation::silu, OutputActivation::identity);
    CHECK(net.param_count() == 7 * 11 + 11 + 11 * 3 + 3);
}
