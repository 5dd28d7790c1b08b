#pragma once

// Shared reference implementations for the test suites. Everything here is
// written independently of the library kernels (explicit padding buffers,
// reshape+matmul formulations, scalar recurrences) so tests compare two
// different routes to the same quantity.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cpnet/rng.hpp"
#include "cpnet/tensor.hpp"

namespace testsup {

// conv1d reference: materialize the zero-padded signal, then slide the
// kernel with explicit dot products.
inline std::vector<double> conv1d_reference(const std::vector<double>& x, int c_in, int length,
                                            const std::vector<double>& w, int c_out, int kernel,
                                            const std::vector<double>& bias, int stride,
                                            int dilation, int pad_left, int pad_right) {
    const int padded_len = length + pad_left + pad_right;
    std::vector<double> padded(static_cast<size_t>(c_in) * padded_len, 0.0);
    for (int c = 0; c < c_in; ++c) {
        for (int t = 0; t < length; ++t) {
            padded[static_cast<size_t>(c) * padded_len + pad_left + t] =
                x[static_cast<size_t>(c) * length + t];
        }
    }
    const int span = dilation * (kernel - 1) + 1;
    const int l_out = (padded_len - span) / stride + 1;
    std::vector<double> out(static_cast<size_t>(c_out) * l_out, 0.0);
    for (int co = 0; co < c_out; ++co) {
        for (int t = 0; t < l_out; ++t) {
            double acc = bias[co];
            for (int ci = 0; ci < c_in; ++ci) {
                for (int j = 0; j < kernel; ++j) {
                    acc += w[(static_cast<size_t>(co) * c_in + ci) * kernel + j] *
                           padded[static_cast<size_t>(ci) * padded_len + t * stride + j * dilation];
                }
            }
            out[static_cast<size_t>(co) * l_out + t] = acc;
        }
    }
    return out;
}

// Equispaced (kernel == stride, no padding) conv expressed as reshape to
// [L/SR, SR] followed by a matrix-vector product with the kernel.
inline std::vector<double> equispaced_reference(const std::vector<double>& x, int length,
                                                const std::vector<double>& kernel, double bias) {
    const int sr = static_cast<int>(kernel.size());
    const int m = length / sr;
    std::vector<double> out(m, 0.0);
    for (int r = 0; r < m; ++r) {
        double acc = bias;
        for (int j = 0; j < sr; ++j) acc += x[static_cast<size_t>(r) * sr + j] * kernel[j];
        out[r] = acc;
    }
    return out;
}

// 1x1 channel merge reference: per output cell, explicit weighted sum over
// input channels plus bias.
inline std::vector<double> merge_reference(const std::vector<double>& x, int c_in, int cells,
                                           const std::vector<double>& w, int c_out,
                                           const std::vector<double>& bias) {
    std::vector<double> out(static_cast<size_t>(c_out) * cells, 0.0);
    for (int co = 0; co < c_out; ++co) {
        for (int i = 0; i < cells; ++i) {
            double acc = bias[co];
            for (int ci = 0; ci < c_in; ++ci) {
                acc += w[static_cast<size_t>(co) * c_in + ci] *
                       x[static_cast<size_t>(ci) * cells + i];
            }
            out[static_cast<size_t>(co) * cells + i] = acc;
        }
    }
    return out;
}

// Adam single-parameter recurrence, straight from the update equations.
struct AdamScalarRef {
    double m = 0.0, v = 0.0;
    int t = 0;
    double step(double param, double grad, double lr, double beta1, double beta2, double eps) {
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        const double mhat = m / (1.0 - std::pow(beta1, t));
        const double vhat = v / (1.0 - std::pow(beta2, t));
        return param - lr * mhat / (std::sqrt(vhat) + eps);
    }
};

inline double mse_flat(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

inline double mae_flat(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

inline std::vector<double> to_vec(const cpnet::Tensor& t) {
    return std::vector<double>(t.array().data(), t.array().data() + t.numel());
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = a.size() == b.size() ? 0.0 : 1e300;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]));
    }
    return worst;
}

inline cpnet::Tensor random_tensor(cpnet::Shape shape, cpnet::Rng& rng, double lo = -1.0,
                                   double hi = 1.0) {
    std::vector<double> v(static_cast<size_t>(cpnet::shape_numel(shape)));
    for (double& x : v) x = rng.uniform(lo, hi);
    return cpnet::tensor_from(std::move(shape), std::move(v));
}

// Scaled relative error between analytic and finite-difference gradients:
// |g_ad - g_fd| / max(1, |g_ad|, |g_fd|), maximized over elements.
inline double gradcheck(const std::function<double(const std::vector<cpnet::Tensor>&)>& f,
                        const std::vector<cpnet::Tensor>& inputs,
                        const std::function<cpnet::Tensor(const std::vector<cpnet::Tensor>&)>& fwd,
                        double eps = 1e-6) {
    // analytic gradients from one tape pass
    cpnet::Graph graph;
    std::vector<cpnet::Tensor> tracked;
    tracked.reserve(inputs.size());
    for (const auto& t : inputs) tracked.push_back(graph.leaf(t));
    cpnet::Tensor loss = fwd(tracked);
    cpnet::backward(loss);

    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        const cpnet::Array& g_ad = graph.grad(tracked[k]);
        // finite differences on input k with the others fixed
        cpnet::Tensor g_fd = cpnet::finite_diff_grad(
            [&](const cpnet::Tensor& probe) {
                std::vector<cpnet::Tensor> args = inputs;
                args[k] = probe;
                return f(args);
            },
            inputs[k], eps);
        for (std::int64_t i = 0; i < g_fd.numel(); ++i) {
            const double ad = g_ad(i), fd = g_fd.array()(i);
            const double denom = std::max({1.0, std::fabs(ad), std::fabs(fd)});
            worst = std::max(worst, std::fabs(ad - fd) / denom);
        }
    }
    return worst;
}

}  // namespace testsup
