#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpnet/rng.hpp"
#include "cpnet/tensor.hpp"

namespace cpnet {

// Named parameter registry. Canonical (detached) parameter values live here
// between optimizer steps; each training step tracks them as graph leaves
// through a ParamView.
class ParamStore {
public:
    void add(const std::string& name, Tensor value);
    const Tensor& get(const std::string& name) const;
    void set(const std::string& name, Tensor value);  // shape must match
    bool has(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }  // registration order
    std::size_t size() const { return order_.size(); }
    std::int64_t total_params() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> values_;
};

// Name -> tensor lookup used by forward passes: either plain values
// (inference) or graph-tracked leaves (training / gradient checks).
class ParamView {
public:
    explicit ParamView(const ParamStore& store);          // plain values
    ParamView(const ParamStore& store, Graph& graph);     // tracked leaves
    const Tensor& operator[](const std::string& name) const;

private:
    std::unordered_map<std::string, Tensor> vals_;
};

// Weights ~ Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)), the usual fan-in rule.
Tensor init_uniform(Shape shape, int fan_in, Rng& rng);

// Layer descriptors hold parameter names plus geometry; values live in the
// store so that checkpointing and the optimizer see one flat list.
struct LinearLayer {
    std::string weight, bias;
    int in = 0, out = 0;
};

LinearLayer make_linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng);
Tensor linear_forward(const LinearLayer& layer, const ParamView& view, const Tensor& x);

// y = fc2(relu(fc1(x))) along the trailing axis, shared over leading axes.
struct Mlp2 {
    LinearLayer fc1, fc2;
};

Mlp2 make_mlp2(ParamStore& store, const std::string& prefix, int in, int hidden, int out, Rng& rng);
// Optional inverted dropout on the hidden activation: active only when both
// dropout_p > 0 and dropout_rng != nullptr (training steps); inference passes
// neither and runs the plain deterministic path.
Tensor mlp2_forward(const Mlp2& mlp, const ParamView& view, const Tensor& x,
                    double dropout_p = 0.0, Rng* dropout_rng = nullptr);

// Inverted dropout: each element is zeroed with probability p, survivors are
// scaled by 1/(1-p) so the expected activation is unchanged. The mask is a
// plain value tensor, so gradients flow only through the kept elements.
Tensor dropout(const Tensor& x, double p, Rng& rng);

struct Conv1dLayer {
    std::string weight, bias;
    int c_in = 0, c_out = 0, kernel = 0;
    int stride = 1, dilation = 1, pad_left = 0, pad_right = 0;
};

Conv1dLayer make_conv1d(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                        int kernel, int stride, int dilation, int pad_left, int pad_right,
                        Rng& rng);
Tensor conv1d_forward(const Conv1dLayer& layer, const ParamView& view, const Tensor& x);

struct Conv2dLayer {
    std::string weight, bias;
    int c_in = 0, c_out = 0;  // 1x1 kernel
};

Conv2dLayer make_conv2d(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                        Rng& rng);
Tensor conv2d_forward(const Conv2dLayer& layer, const ParamView& view, const Tensor& x);

// Adam with bias correction. Moment buffers are kept per parameter name in
// registration order; the update order is therefore deterministic.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 0.0;      // global max-norm; 0 disables clipping
    double weight_decay = 0.0;   // L2 coefficient added to the (clipped) gradient; 0 disables
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // Read gradients of the tracked leaves from the graph (after backward)
    // and write updated values into the store.
    void step(ParamStore& store, Graph& graph, const ParamView& tracked);

    int steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    int t_ = 0;
    std::unordered_map<std::string, Array> m_, v_;
};

}  // namespace cpnet
