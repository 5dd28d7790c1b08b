#include "cpnet/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace cpnet {

void ParamStore::add(const std::string& name, Tensor value) {
    if (values_.count(name)) {
        throw std::invalid_argument("param store: duplicate parameter '" + name + "'");
    }
    if (!value.defined()) {
        throw std::invalid_argument("param store: empty tensor for '" + name + "'");
    }
    order_.push_back(name);
    values_.emplace(name, std::move(value));
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) {
        throw std::invalid_argument("param store: unknown parameter '" + name + "'");
    }
    return it->second;
}

void ParamStore::set(const std::string& name, Tensor value) {
    auto it = values_.find(name);
    if (it == values_.end()) {
        throw std::invalid_argument("param store: unknown parameter '" + name + "'");
    }
    if (value.shape() != it->second.shape()) {
        throw std::invalid_argument("param store: shape mismatch setting '" + name + "': " +
                                    shape_to_string(it->second.shape()) + " vs " +
                                    shape_to_string(value.shape()));
    }
    it->second = std::move(value);
}

bool ParamStore::has(const std::string& name) const { return values_.count(name) != 0; }

std::int64_t ParamStore::total_params() const {
    std::int64_t n = 0;
    for (const auto& name : order_) n += values_.at(name).numel();
    return n;
}

ParamView::ParamView(const ParamStore& store) {
    for (const auto& name : store.names()) vals_.emplace(name, store.get(name));
}

ParamView::ParamView(const ParamStore& store, Graph& graph) {
    for (const auto& name : store.names()) vals_.emplace(name, graph.leaf(store.get(name)));
}

const Tensor& ParamView::operator[](const std::string& name) const {
    auto it = vals_.find(name);
    if (it == vals_.end()) {
        throw std::invalid_argument("param view: unknown parameter '" + name + "'");
    }
    return it->second;
}

Tensor init_uniform(Shape shape, int fan_in, Rng& rng) {
    if (fan_in < 1) throw std::invalid_argument("init: fan_in must be >= 1");
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Array v(shape_numel(shape));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v));
}

LinearLayer make_linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng) {
    if (in < 1 || out < 1) throw std::invalid_argument("linear layer: dims must be >= 1");
    LinearLayer layer{prefix + ".weight", prefix + ".bias", in, out};
    store.add(layer.weight, init_uniform({out, in}, in, rng));
    store.add(layer.bias, Tensor::zeros({out}));
    return layer;
}

Tensor linear_forward(const LinearLayer& layer, const ParamView& view, const Tensor& x) {
    return linear(x, view[layer.weight], view[layer.bias]);
}

Mlp2 make_mlp2(ParamStore& store, const std::string& prefix, int in, int hidden, int out,
               Rng& rng) {
    Mlp2 mlp;
    mlp.fc1 = make_linear(store, prefix + ".fc1", in, hidden, rng);
    mlp.fc2 = make_linear(store, prefix + ".fc2", hidden, out, rng);
    return mlp;
}

Tensor mlp2_forward(const Mlp2& mlp, const ParamView& view, const Tensor& x,
                    double dropout_p, Rng* dropout_rng) {
    Tensor h = relu(linear_forward(mlp.fc1, view, x));
    if (dropout_p > 0.0 && dropout_rng != nullptr) h = dropout(h, dropout_p, *dropout_rng);
    return linear_forward(mlp.fc2, view, h);
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
    if (p == 0.0) return x;
    const double scale = 1.0 / (1.0 - p);
    Array mask(x.numel());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : scale;
    }
    return mul(x, Tensor(x.shape(), std::move(mask)));
}

Conv1dLayer make_conv1d(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                        int kernel, int stride, int dilation, int pad_left, int pad_right,
                        Rng& rng) {
    if (kernel < 1) throw std::invalid_argument("conv1d layer: kernel must be >= 1");
    Conv1dLayer layer{prefix + ".weight", prefix + ".bias", c_in,     c_out,
                      kernel,             stride,           dilation, pad_left,
                      pad_right};
    store.add(layer.weight, init_uniform({c_out, c_in, kernel}, c_in * kernel, rng));
    store.add(layer.bias, Tensor::zeros({c_out}));
    return layer;
}

Tensor conv1d_forward(const Conv1dLayer& layer, const ParamView& view, const Tensor& x) {
    return conv1d(x, view[layer.weight], view[layer.bias], layer.stride, layer.dilation,
                  layer.pad_left, layer.pad_right);
}

Conv2dLayer make_conv2d(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                        Rng& rng) {
    Conv2dLayer layer{prefix + ".weight", prefix + ".bias", c_in, c_out};
    store.add(layer.weight, init_uniform({c_out, c_in, 1, 1}, c_in, rng));
    store.add(layer.bias, Tensor::zeros({c_out}));
    return layer;
}

Tensor conv2d_forward(const Conv2dLayer& layer, const ParamView& view, const Tensor& x) {
    return conv2d(x, view[layer.weight], view[layer.bias]);
}

void Adam::step(ParamStore& store, Graph& graph, const ParamView& tracked) {
    // optional global max-norm clip: scan first, scale once
    double clip_scale = 1.0;
    if (cfg_.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& name : store.names()) {
            const Array& g = graph.grad(tracked[name]);
            sq += (g * g).sum();
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
    }

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (const auto& name : store.names()) {
        const Array& g_raw = graph.grad(tracked[name]);
        if (!g_raw.allFinite()) {
            throw std::runtime_error("adam: non-finite gradient for parameter '" + name + "'");
        }
        const Tensor& cur = store.get(name);
        Array g = g_raw * clip_scale;
        if (cfg_.weight_decay > 0.0) g += cfg_.weight_decay * cur.array();
        auto [mit, m_new] = m_.try_emplace(name, Array::Zero(g.size()));
        auto [vit, v_new] = v_.try_emplace(name, Array::Zero(g.size()));
        Array& m = mit->second;
        Array& v = vit->second;
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
        Array upd = cur.array() - cfg_.lr * (m / bc1) / ((v / bc2).sqrt() + cfg_.eps);
        store.set(name, Tensor(cur.shape(), std::move(upd)));
    }
}

}  // namespace cpnet
