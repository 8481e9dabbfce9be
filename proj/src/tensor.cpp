#include "navseg/tensor.hpp"

#include <cmath>
#include <sstream>

#include "navseg/errors.hpp"

namespace navseg {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> s, double fill)
    : shape(std::move(s)), data(checked_numel(shape), fill) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (checked_numel(shape) != data.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

Tensor uniform_tensor(std::vector<int> shape, double lo, double hi, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("max_abs_diff: shapes " + a.shape_str() + " vs " + b.shape_str());
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

namespace kern {

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = arow[p];
            if (aip == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void mm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<std::size_t>(p) * m;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double api = arow[i];
            if (api == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

}  // namespace kern

}  // namespace navseg
