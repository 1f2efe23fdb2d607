#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace prdim {

// Dense row-major tensor of 64-bit floats. Most of the library works with
// rank-2 tensors [rows x cols]; rank-1 is used for bias vectors and stats.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> values_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double v);

    std::size_t numel() const { return values.size(); }
    bool empty() const { return values.empty(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

std::string shape_str(const Tensor& t);

// C = A * B for 2-D tensors, [n x k] * [k x m] -> [n x m].
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A * B^T, [n x k] * [m x k]^T -> [n x m].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C = A^T * B, [k x n]^T * [k x m] -> [n x m].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

// Elementwise helpers used throughout the training loops.
void add_inplace(Tensor& a, const Tensor& b);        // a += b
void axpy_inplace(Tensor& a, double c, const Tensor& b);  // a += c*b
void scale_inplace(Tensor& a, double c);             // a *= c
Tensor hadamard(const Tensor& a, const Tensor& b);   // a ⊙ b

} // namespace prdim
