#pragma once
// Minimal dense double tensor (rank 1 or 2, row major) plus the handful of
// matrix products the language model needs. Loops are ordered i-k-j so the
// inner accumulation is contiguous.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "descgen/common.hpp"
#include "descgen/rng.hpp"

namespace descgen {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    static Tensor zeros(std::size_t n) { return Tensor{{n}, std::vector<double>(n, 0.0)}; }
    static Tensor zeros(std::size_t r, std::size_t c) {
        return Tensor{{r, c}, std::vector<double>(r * c, 0.0)};
    }
    static Tensor full(std::size_t n, double v) {
        return Tensor{{n}, std::vector<double>(n, v)};
    }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    double* row(std::size_t i) { return data.data() + i * shape[1]; }
    const double* row(std::size_t i) const { return data.data() + i * shape[1]; }

    void fill_gaussian(Rng& rng, double stddev) {
        for (double& v : data) v = rng.next_gaussian() * stddev;
    }

    void set_zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// C = A (m x k) * B (k x n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    assert(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[0]);
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.row(p);
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// C = A^T (k x m)^T=(m x k) ... i.e. C = A^T * B with A (k x m), B (k x n)
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    assert(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[0] == b.shape[0]);
    const std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a.row(p);
        const double* brow = b.row(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.row(i);
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// C = A * B^T with A (m x k), B (n x k)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    assert(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[1]);
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor c = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
    return c;
}

inline void axpy(Tensor& y, double alpha, const Tensor& x) {
    assert(y.same_shape(x));
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline double squared_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

}  // namespace descgen
