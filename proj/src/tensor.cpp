#include "prdim/tensor.hpp"

#include <cblas.h>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace prdim {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void require_2d(const Tensor& t, const char* name) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(name) + " must be rank-2, got shape " + shape_str(t));
    }
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
    if (shape_product(shape) != values.size()) {
        throw std::invalid_argument("tensor shape/value size mismatch: shape " + shape_str(*this) +
                                    " vs " + std::to_string(values.size()) + " values");
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_product(shape);
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    std::size_t n = shape_product(shape);
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(n, v);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) os << " x ";
        os << t.shape[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul lhs");
    require_2d(b, "matmul rhs");
    if (a.shape[1] != b.shape[0]) {
        throw std::invalid_argument("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
    }
    const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
    Tensor c = Tensor::zeros({n, m});
    if (n == 0 || k == 0 || m == 0) return c;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)n, (int)m, (int)k, 1.0,
                a.values.data(), (int)k, b.values.data(), (int)m, 0.0, c.values.data(), (int)m);
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt lhs");
    require_2d(b, "matmul_nt rhs");
    if (a.shape[1] != b.shape[1]) {
        throw std::invalid_argument("matmul_nt shape mismatch: " + shape_str(a) + " * " + shape_str(b) + "^T");
    }
    const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[0];
    Tensor c = Tensor::zeros({n, m});
    if (n == 0 || k == 0 || m == 0) return c;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)n, (int)m, (int)k, 1.0,
                a.values.data(), (int)k, b.values.data(), (int)k, 0.0, c.values.data(), (int)m);
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn lhs");
    require_2d(b, "matmul_tn rhs");
    if (a.shape[0] != b.shape[0]) {
        throw std::invalid_argument("matmul_tn shape mismatch: " + shape_str(a) + "^T * " + shape_str(b));
    }
    const std::size_t n = a.shape[1], k = a.shape[0], m = b.shape[1];
    Tensor c = Tensor::zeros({n, m});
    if (n == 0 || k == 0 || m == 0) return c;
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)n, (int)m, (int)k, 1.0,
                a.values.data(), (int)n, b.values.data(), (int)m, 0.0, c.values.data(), (int)m);
    return c;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add_inplace shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    }
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
}

void axpy_inplace(Tensor& a, double c, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("axpy_inplace shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    }
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += c * b.values[i];
}

void scale_inplace(Tensor& a, double c) {
    for (double& v : a.values) v *= c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("hadamard shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    }
    Tensor c = a;
    for (std::size_t i = 0; i < c.values.size(); ++i) c.values[i] *= b.values[i];
    return c;
}

} // namespace prdim
