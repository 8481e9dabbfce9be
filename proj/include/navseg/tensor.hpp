#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace navseg {

// Dense N-dimensional array of 64-bit floats, row-major, no strides or
// views. Tensors are plain values: copy freely, never aliased.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor scalar(double v);

    int ndim() const { return static_cast<int>(shape.size()); }
    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }

    bool all_finite() const;
};

std::mt19937_64 make_rng(std::uint64_t seed);

// Uniform fill in [lo, hi), consuming the generator in row-major order.
Tensor uniform_tensor(std::vector<int> shape, double lo, double hi, std::mt19937_64& rng);

double max_abs_diff(const Tensor& a, const Tensor& b);

namespace kern {

// Accumulating GEMM kernels on raw row-major buffers: c is never cleared.
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n);  // c += a.b
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n);  // c += a.b^T, b is n x k
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n);  // c += a^T.b, a is k x m

}  // namespace kern

}  // namespace navseg
