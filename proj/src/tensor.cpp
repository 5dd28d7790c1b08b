#include "cpnet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace cpnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

[[noreturn]] void fail_shape(const std::string& msg) {
    throw std::invalid_argument(msg);
}

std::string describe(const char* op, const Tensor& t) {
    return std::string(op) + ": " + shape_to_string(t.shape());
}

// Graph an op result belongs to: the unique graph among tracked inputs.
Graph* result_graph(std::initializer_list<const Tensor*> inputs, const char* op) {
    Graph* g = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->tracked()) continue;
        if (g == nullptr) {
            g = t->graph();
        } else if (g != t->graph()) {
            fail_shape(std::string(op) + ": inputs belong to different graphs");
        }
    }
    return g;
}

std::vector<int> tracked_nodes(std::initializer_list<const Tensor*> inputs) {
    std::vector<int> ids;
    for (const Tensor* t : inputs) {
        if (t->tracked()) ids.push_back(t->node());
    }
    return ids;
}

std::int64_t prod(const Shape& s, int begin, int end) {
    std::int64_t p = 1;
    for (int i = begin; i < end; ++i) p *= s[i];
    return p;
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

const char* op_kind_name(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::matmul: return "matmul";
        case OpKind::linear: return "linear";
        case OpKind::conv1d: return "conv1d";
        case OpKind::conv2d: return "conv2d";
        case OpKind::relu: return "relu";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::reshape: return "reshape";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
    }
    return "?";
}

// ---- Tensor ----

Tensor::Tensor(Shape shape, Array values) {
    for (int e : shape) {
        if (e <= 0) fail_shape("tensor: extents must be positive, got " + shape_to_string(shape));
    }
    if (shape_numel(shape) != values.size()) {
        fail_shape("tensor: shape " + shape_to_string(shape) + " does not match value count " +
                   std::to_string(values.size()));
    }
    if (!values.allFinite()) {
        throw std::runtime_error("tensor: non-finite input values");
    }
    shape_ = std::move(shape);
    data_ = std::make_shared<const Array>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
    Array v = Array::Zero(shape_numel(shape));
    return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::full(Shape shape, double value) {
    Array v = Array::Constant(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

int Tensor::extent(int axis) const {
    if (axis < 0 || axis >= rank()) fail_shape("tensor: axis out of range");
    return shape_[axis];
}

const Array& Tensor::array() const {
    if (!data_) throw std::logic_error("tensor: empty");
    return *data_;
}

double Tensor::value_at(std::int64_t flat_index) const { return array()(flat_index); }

double Tensor::at(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != rank()) fail_shape("tensor: index rank mismatch");
    std::int64_t flat = 0;
    for (int i = 0; i < rank(); ++i) {
        if (idx[i] < 0 || idx[i] >= shape_[i]) fail_shape("tensor: index out of bounds");
        flat = flat * shape_[i] + idx[i];
    }
    return array()(flat);
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.graph_ = nullptr;
    t.node_ = -1;
    t.requires_grad_ = false;
    return t;
}

Tensor tensor_from(Shape shape, std::vector<double> values) {
    Array v = Eigen::Map<const Array>(values.data(), static_cast<Eigen::Index>(values.size()));
    return Tensor(std::move(shape), std::move(v));
}


// Assemble an op result, attaching it to the recording graph and checking
// the engine invariant that op outputs are finite.
Tensor make_op_result(Shape shape, Array values, Graph* graph, int node, const char* op_name) {
    if (!values.allFinite()) {
        throw std::runtime_error(std::string(op_name) + ": non-finite values produced");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const Array>(std::move(values));
    t.graph_ = graph;
    t.node_ = node;
    t.requires_grad_ = graph != nullptr;
    return t;
}

// ---- Graph ----

Tensor Graph::leaf(const Tensor& t) {
    if (!t.defined()) fail_shape("graph: cannot track an empty tensor");
    Tensor out = t;
    out.graph_ = this;
    out.node_ = record(OpKind::leaf, {}, t.numel(), nullptr);
    out.requires_grad_ = true;
    return out;
}

int Graph::record(OpKind kind, std::vector<int> inputs, std::int64_t numel, BackwardFn fn) {
    Node n;
    n.kind = kind;
    n.inputs = std::move(inputs);
    n.numel = numel;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Array& Graph::grad_buffer(int node) {
    Node& n = nodes_.at(node);
    if (!n.grad_set) {
        n.grad = Array::Zero(n.numel);
        n.grad_set = true;
    }
    return n.grad;
}

void Graph::accumulate(int node, const Array& g) {
    Array& buf = grad_buffer(node);
    if (buf.size() != g.size()) {
        throw std::logic_error("graph: gradient size mismatch on accumulate");
    }
    buf += g;
}

const Array& Graph::grad(const Tensor& t) {
    if (t.graph() != this || t.node() < 0) {
        fail_shape("graph: tensor is not tracked by this graph");
    }
    if (!backward_done_) {
        throw std::logic_error("graph: backward() has not run");
    }
    return grad_buffer(t.node());
}

void backward(const Tensor& loss) {
    Graph* g = loss.graph();
    if (g == nullptr) {
        fail_shape("backward: loss tensor is detached from any graph");
    }
    if (loss.numel() != 1) {
        fail_shape("backward: loss must be scalar, got shape " + shape_to_string(loss.shape()));
    }
    for (auto& n : g->nodes_) {
        n.grad_set = false;
    }
    g->grad_buffer(loss.node())(0) = 1.0;
    for (int i = static_cast<int>(g->nodes_.size()) - 1; i >= 0; --i) {
        Graph::Node& n = g->nodes_[i];
        if (n.backward && n.grad_set) {
            n.backward(*g, n.grad);
        }
    }
    g->backward_done_ = true;
}

// ---- elementwise ----

namespace {

// Broadcast layout: `small` may have extent 1 on a trailing block of axes.
// outer = matched leading extents, inner = broadcast trailing extents.
struct EwLayout {
    bool swap = false;     // true if `a` is the broadcast (small) side
    std::int64_t outer = 0;
    std::int64_t inner = 0;
};

bool trailing_ones_match(const Shape& small, const Shape& big, std::int64_t& outer, std::int64_t& inner) {
    if (small.size() != big.size()) return false;
    int s = static_cast<int>(small.size());
    while (s > 0 && small[s - 1] == 1) --s;
    for (int i = 0; i < s; ++i) {
        if (small[i] != big[i]) return false;
    }
    outer = prod(small, 0, s);
    inner = prod(big, s, static_cast<int>(big.size()));
    return true;
}

Array reduce_trailing(const Array& g, std::int64_t outer, std::int64_t inner) {
    Array out(outer);
    for (std::int64_t o = 0; o < outer; ++o) {
        out(o) = g.segment(o * inner, inner).sum();
    }
    return out;
}

}  // namespace

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind) {
    const char* name = kind == EwKind::add ? "add" : kind == EwKind::sub ? "sub" : "mul";
    Graph* g = result_graph({&a, &b}, name);

    bool equal = a.shape() == b.shape();
    EwLayout lay;
    if (!equal) {
        if (trailing_ones_match(b.shape(), a.shape(), lay.outer, lay.inner)) {
            lay.swap = false;
        } else if (trailing_ones_match(a.shape(), b.shape(), lay.outer, lay.inner)) {
            lay.swap = true;
        } else {
            fail_shape(std::string(name) + ": incompatible shapes " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()));
        }
    }

    const Tensor& big = (!equal && lay.swap) ? b : a;
    const Tensor& small = (!equal && lay.swap) ? a : b;
    Array out;
    if (equal) {
        switch (kind) {
            case EwKind::add: out = a.array() + b.array(); break;
            case EwKind::sub: out = a.array() - b.array(); break;
            case EwKind::mul: out = a.array() * b.array(); break;
        }
    } else {
        out.resize(big.numel());
        for (std::int64_t o = 0; o < lay.outer; ++o) {
            auto seg = big.array().segment(o * lay.inner, lay.inner);
            double sv = small.array()(o);
            double bsign = lay.swap ? -1.0 : 1.0;  // sub orientation
            switch (kind) {
                case EwKind::add: out.segment(o * lay.inner, lay.inner) = seg + sv; break;
                case EwKind::sub:
                    out.segment(o * lay.inner, lay.inner) = bsign * (seg - sv);
                    break;
                case EwKind::mul: out.segment(o * lay.inner, lay.inner) = seg * sv; break;
            }
        }
    }

    Shape out_shape = big.shape();
    int node = -1;
    OpKind op = kind == EwKind::add ? OpKind::add : kind == EwKind::sub ? OpKind::sub : OpKind::mul;
    if (g) {
        Tensor av = a, bv = b;
        bool eq = equal;
        EwLayout l = lay;
        node = g->record(op, tracked_nodes({&a, &b}), shape_numel(out_shape),
                         [av, bv, kind, eq, l](Graph& gr, const Array& gout) {
            const Tensor& bigT = (!eq && l.swap) ? bv : av;
            const Tensor& smallT = (!eq && l.swap) ? av : bv;
            bool big_is_a = !(!eq && l.swap);
            // gradient w.r.t. the full-shape operand
            if (bigT.tracked()) {
                Array gb;
                switch (kind) {
                    case EwKind::add: gb = gout; break;
                    case EwKind::sub: gb = big_is_a ? gout : Array(-gout); break;
                    case EwKind::mul: {
                        if (eq) {
                            gb = gout * smallT.array();
                        } else {
                            gb.resize(gout.size());
                            for (std::int64_t o = 0; o < l.outer; ++o) {
                                gb.segment(o * l.inner, l.inner) =
                                    gout.segment(o * l.inner, l.inner) * smallT.array()(o);
                            }
                        }
                        break;
                    }
                }
                gr.accumulate(bigT.node(), gb);
            }
            if (smallT.tracked()) {
                Array gs;
                switch (kind) {
                    case EwKind::add: gs = eq ? gout : reduce_trailing(gout, l.outer, l.inner); break;
                    case EwKind::sub: {
                        Array base = eq ? gout : reduce_trailing(gout, l.outer, l.inner);
                        gs = big_is_a ? Array(-base) : base;
                        break;
                    }
                    case EwKind::mul: {
                        if (eq) {
                            gs = gout * bigT.array();
                        } else {
                            gs.resize(l.outer);
                            for (std::int64_t o = 0; o < l.outer; ++o) {
                                gs(o) = (gout.segment(o * l.inner, l.inner) *
                                         bigT.array().segment(o * l.inner, l.inner))
                                            .sum();
                            }
                        }
                        break;
                    }
                }
                gr.accumulate(smallT.node(), gs);
            }
        });
    }
    return make_op_result(std::move(out_shape), std::move(out), g, node, name);
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::mul); }

Tensor scale(const Tensor& a, double c) {
    if (!std::isfinite(c)) throw std::runtime_error("scale: non-finite factor");
    Graph* g = result_graph({&a}, "scale");
    Array out = a.array() * c;
    int node = -1;
    if (g) {
        Tensor av = a;
        node = g->record(OpKind::scale, tracked_nodes({&a}), a.numel(),
                         [av, c](Graph& gr, const Array& gout) {
            gr.accumulate(av.node(), Array(gout * c));
        });
    }
    return make_op_result(a.shape(), std::move(out), g, node, "scale");
}

// ---- matmul / linear ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        fail_shape("matmul: expects rank-2 operands, got " + describe("a", a) + " and " +
                   describe("b", b));
    }
    const int m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2) {
        fail_shape("matmul: inner extents differ, " + shape_to_string(a.shape()) + " vs " +
                   shape_to_string(b.shape()));
    }
    Array out(static_cast<std::int64_t>(m) * n);
    {
        CMapRM A(a.array().data(), m, k), B(b.array().data(), k, n);
        MapRM C(out.data(), m, n);
        C.noalias() = A * B;
    }
    Graph* g = result_graph({&a, &b}, "matmul");
    int node = -1;
    if (g) {
        Tensor av = a, bv = b;
        node = g->record(OpKind::matmul, tracked_nodes({&a, &b}), static_cast<std::int64_t>(m) * n,
                         [av, bv, m, k, n](Graph& gr, const Array& gout) {
            CMapRM G(gout.data(), m, n);
            if (av.tracked()) {
                Array da(static_cast<std::int64_t>(m) * k);
                CMapRM B(bv.array().data(), k, n);
                MapRM(da.data(), m, k).noalias() = G * B.transpose();
                gr.accumulate(av.node(), da);
            }
            if (bv.tracked()) {
                Array db(static_cast<std::int64_t>(k) * n);
                CMapRM A(av.array().data(), m, k);
                MapRM(db.data(), k, n).noalias() = A.transpose() * G;
                gr.accumulate(bv.node(), db);
            }
        });
    }
    return make_op_result({m, n}, std::move(out), g, node, "matmul");
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2) fail_shape("linear: weight must be [out, in]");
    const int out_dim = weight.extent(0), in_dim = weight.extent(1);
    if (bias.rank() != 1 || bias.extent(0) != out_dim) {
        fail_shape("linear: bias must be [out] matching weight");
    }
    if (x.rank() < 1 || x.extent(x.rank() - 1) != in_dim) {
        fail_shape("linear: trailing extent of x " + shape_to_string(x.shape()) +
                   " must equal weight in-dim " + std::to_string(in_dim));
    }
    const std::int64_t rows = x.numel() / in_dim;
    Array out(rows * out_dim);
    {
        CMapRM X(x.array().data(), rows, in_dim), W(weight.array().data(), out_dim, in_dim);
        MapRM Y(out.data(), rows, out_dim);
        Y.noalias() = X * W.transpose();
        Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.array().data(), out_dim);
    }
    Shape out_shape = x.shape();
    out_shape.back() = out_dim;
    Graph* g = result_graph({&x, &weight, &bias}, "linear");
    int node = -1;
    if (g) {
        Tensor xv = x, wv = weight, bv = bias;
        node = g->record(OpKind::linear, tracked_nodes({&x, &weight, &bias}), rows * out_dim,
                         [xv, wv, bv, rows, in_dim, out_dim](Graph& gr, const Array& gout) {
            CMapRM G(gout.data(), rows, out_dim);
            if (xv.tracked()) {
                Array dx(rows * in_dim);
                CMapRM W(wv.array().data(), out_dim, in_dim);
                MapRM(dx.data(), rows, in_dim).noalias() = G * W;
                gr.accumulate(xv.node(), dx);
            }
            if (wv.tracked()) {
                Array dw(static_cast<std::int64_t>(out_dim) * in_dim);
                CMapRM X(xv.array().data(), rows, in_dim);
                MapRM(dw.data(), out_dim, in_dim).noalias() = G.transpose() * X;
                gr.accumulate(wv.node(), dw);
            }
            if (bv.tracked()) {
                Array db(out_dim);
                Eigen::Map<Eigen::RowVectorXd>(db.data(), out_dim) = G.colwise().sum();
                gr.accumulate(bv.node(), db);
            }
        });
    }
    return make_op_result(std::move(out_shape), std::move(out), g, node, "linear");
}

// ---- conv1d ----

std::int64_t conv1d_output_length(std::int64_t length, int kernel, int stride, int dilation,
                                  int pad_left, int pad_right) {
    const std::int64_t padded = length + pad_left + pad_right;
    const std::int64_t span = static_cast<std::int64_t>(dilation) * (kernel - 1) + 1;
    if (padded < span) return 0;
    return (padded - span) / stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int dilation, int pad_left, int pad_right) {
    if (weight.rank() != 3) fail_shape("conv1d: weight must be [C_out, C_in, K]");
    const int c_out = weight.extent(0), c_in = weight.extent(1), kernel = weight.extent(2);
    if (bias.rank() != 1 || bias.extent(0) != c_out) fail_shape("conv1d: bias must be [C_out]");
    if (stride < 1 || dilation < 1) fail_shape("conv1d: stride and dilation must be >= 1");
    if (pad_left < 0 || pad_right < 0) fail_shape("conv1d: negative padding");

    const bool batched = input.rank() == 3;
    if (!batched && input.rank() != 2) {
        fail_shape("conv1d: input must be [C_in, L] or [B, C_in, L], got " +
                   shape_to_string(input.shape()));
    }
    const int b_count = batched ? input.extent(0) : 1;
    const int ci = input.extent(batched ? 1 : 0);
    const std::int64_t length = input.extent(batched ? 2 : 1);
    if (ci != c_in) {
        fail_shape("conv1d: input channels " + std::to_string(ci) + " != weight C_in " +
                   std::to_string(c_in));
    }
    const std::int64_t l_out = conv1d_output_length(length, kernel, stride, dilation, pad_left, pad_right);
    if (l_out <= 0) {
        fail_shape("conv1d: receptive field dilation*(K-1)+1 = " +
                   std::to_string(static_cast<std::int64_t>(dilation) * (kernel - 1) + 1) +
                   " exceeds padded length " + std::to_string(length + pad_left + pad_right));
    }

    Array out(static_cast<std::int64_t>(b_count) * c_out * l_out);
    {
        const double* xp = input.array().data();
        const double* wp = weight.array().data();
        const double* bp = bias.array().data();
        double* op = out.data();
        for (int b = 0; b < b_count; ++b) {
            const double* xb = xp + static_cast<std::int64_t>(b) * c_in * length;
            for (int co = 0; co < c_out; ++co) {
                double* ob = op + (static_cast<std::int64_t>(b) * c_out + co) * l_out;
                const double* wc = wp + static_cast<std::int64_t>(co) * c_in * kernel;
                for (std::int64_t t = 0; t < l_out; ++t) {
                    double acc = bp[co];
                    const std::int64_t base = t * stride - pad_left;
                    for (int c = 0; c < c_in; ++c) {
                        const double* xc = xb + static_cast<std::int64_t>(c) * length;
                        const double* wk = wc + static_cast<std::int64_t>(c) * kernel;
                        for (int j = 0; j < kernel; ++j) {
                            const std::int64_t pos = base + static_cast<std::int64_t>(j) * dilation;
                            if (pos >= 0 && pos < length) acc += wk[j] * xc[pos];
                        }
                    }
                    ob[t] = acc;
                }
            }
        }
    }

    Shape out_shape = batched ? Shape{b_count, c_out, static_cast<int>(l_out)}
                              : Shape{c_out, static_cast<int>(l_out)};
    Graph* g = result_graph({&input, &weight, &bias}, "conv1d");
    int node = -1;
    if (g) {
        Tensor xv = input, wv = weight, bv = bias;
        node = g->record(
            OpKind::conv1d, tracked_nodes({&input, &weight, &bias}), shape_numel(out_shape),
            [xv, wv, bv, b_count, c_in, c_out, kernel, length, l_out, stride, dilation,
             pad_left](Graph& gr, const Array& gout) {
                const double* xp = xv.array().data();
                const double* wp = wv.array().data();
                const bool want_dx = xv.tracked(), want_dw = wv.tracked(), want_db = bv.tracked();
                Array dx, dw, db;
                if (want_dx) dx = Array::Zero(xv.numel());
                if (want_dw) dw = Array::Zero(wv.numel());
                if (want_db) db = Array::Zero(c_out);
                for (int b = 0; b < b_count; ++b) {
                    const double* xb = xp + static_cast<std::int64_t>(b) * c_in * length;
                    double* dxb = want_dx ? dx.data() + static_cast<std::int64_t>(b) * c_in * length
                                          : nullptr;
                    for (int co = 0; co < c_out; ++co) {
                        const double* gb =
                            gout.data() + (static_cast<std::int64_t>(b) * c_out + co) * l_out;
                        const double* wc = wp + static_cast<std::int64_t>(co) * c_in * kernel;
                        double* dwc = want_dw
                                          ? dw.data() + static_cast<std::int64_t>(co) * c_in * kernel
                                          : nullptr;
                        for (std::int64_t t = 0; t < l_out; ++t) {
                            const double go = gb[t];
                            if (want_db) db(co) += go;
                            const std::int64_t base = t * stride - pad_left;
                            for (int c = 0; c < c_in; ++c) {
                                for (int j = 0; j < kernel; ++j) {
                                    const std::int64_t pos =
                                        base + static_cast<std::int64_t>(j) * dilation;
                                    if (pos < 0 || pos >= length) continue;
                                    const std::int64_t xoff =
                                        static_cast<std::int64_t>(c) * length + pos;
                                    const std::int64_t woff =
                                        static_cast<std::int64_t>(c) * kernel + j;
                                    if (want_dw) dwc[woff] += go * xb[xoff];
                                    if (want_dx) dxb[xoff] += go * wc[woff];
                                }
                            }
                        }
                    }
                }
                if (want_dx) gr.accumulate(xv.node(), dx);
                if (want_dw) gr.accumulate(wv.node(), dw);
                if (want_db) gr.accumulate(bv.node(), db);
            });
    }
    return make_op_result(std::move(out_shape), std::move(out), g, node, "conv1d");
}

// ---- conv2d (1x1) ----

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 3) fail_shape("conv2d: input must be [C_in, H, W]");
    if (weight.rank() != 4) fail_shape("conv2d: weight must be [C_out, C_in, 1, 1]");
    if (weight.extent(2) != 1 || weight.extent(3) != 1) {
        fail_shape("conv2d: only 1x1 kernels are supported, got " +
                   shape_to_string(weight.shape()));
    }
    const int c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
    const int c_out = weight.extent(0);
    if (weight.extent(1) != c_in) fail_shape("conv2d: weight C_in mismatch");
    if (bias.rank() != 1 || bias.extent(0) != c_out) fail_shape("conv2d: bias must be [C_out]");

    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Array out(static_cast<std::int64_t>(c_out) * hw);
    {
        CMapRM X(input.array().data(), c_in, hw), W(weight.array().data(), c_out, c_in);
        MapRM Y(out.data(), c_out, hw);
        Y.noalias() = W * X;
        Y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.array().data(), c_out);
    }
    Graph* g = result_graph({&input, &weight, &bias}, "conv2d");
    int node = -1;
    if (g) {
        Tensor xv = input, wv = weight, bv = bias;
        node = g->record(OpKind::conv2d, tracked_nodes({&input, &weight, &bias}),
                         static_cast<std::int64_t>(c_out) * hw,
                         [xv, wv, bv, c_in, c_out, hw](Graph& gr, const Array& gout) {
            CMapRM G(gout.data(), c_out, hw);
            if (xv.tracked()) {
                Array dx(static_cast<std::int64_t>(c_in) * hw);
                CMapRM W(wv.array().data(), c_out, c_in);
                MapRM(dx.data(), c_in, hw).noalias() = W.transpose() * G;
                gr.accumulate(xv.node(), dx);
            }
            if (wv.tracked()) {
                Array dw(static_cast<std::int64_t>(c_out) * c_in);
                CMapRM X(xv.array().data(), c_in, hw);
                MapRM(dw.data(), c_out, c_in).noalias() = G * X.transpose();
                gr.accumulate(wv.node(), dw);
            }
            if (bv.tracked()) {
                Array db(c_out);
                Eigen::Map<Eigen::VectorXd>(db.data(), c_out) = G.rowwise().sum();
                gr.accumulate(bv.node(), db);
            }
        });
    }
    return make_op_result({c_out, h, w}, std::move(out), g, node, "conv2d");
}

// ---- shape ops ----

Tensor relu(const Tensor& x) {
    Graph* g = result_graph({&x}, "relu");
    Array out = x.array().max(0.0);
    int node = -1;
    if (g) {
        Tensor xv = x;
        node = g->record(OpKind::relu, tracked_nodes({&x}), x.numel(),
                         [xv](Graph& gr, const Array& gout) {
            Array dx = gout * (xv.array() > 0.0).cast<double>();
            gr.accumulate(xv.node(), dx);
        });
    }
    return make_op_result(x.shape(), std::move(out), g, node, "relu");
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) fail_shape("concat: empty input list");
    const int rank = parts[0].rank();
    if (axis < 0 || axis >= rank) fail_shape("concat: axis out of range");
    int axis_total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank) fail_shape("concat: rank mismatch");
        for (int i = 0; i < rank; ++i) {
            if (i != axis && p.extent(i) != parts[0].extent(i)) {
                fail_shape("concat: extents differ on non-concat axis " + std::to_string(i));
            }
        }
        axis_total += p.extent(axis);
    }
    Shape out_shape = parts[0].shape();
    out_shape[axis] = axis_total;
    const std::int64_t outer = prod(out_shape, 0, axis);
    const std::int64_t inner = prod(out_shape, axis + 1, rank);

    Array out(shape_numel(out_shape));
    {
        std::int64_t off = 0;  // offset along the concat axis
        for (const Tensor& p : parts) {
            const std::int64_t pa = p.extent(axis);
            for (std::int64_t o = 0; o < outer; ++o) {
                out.segment((o * axis_total + off) * inner, pa * inner) =
                    p.array().segment(o * pa * inner, pa * inner);
            }
            off += pa;
        }
    }

    Graph* g = nullptr;
    for (const Tensor& p : parts) {
        if (!p.tracked()) continue;
        if (!g) {
            g = p.graph();
        } else if (g != p.graph()) {
            fail_shape("concat: inputs belong to different graphs");
        }
    }
    int node = -1;
    if (g) {
        std::vector<int> ids;
        for (const Tensor& p : parts) {
            if (p.tracked()) ids.push_back(p.node());
        }
        std::vector<Tensor> pv = parts;
        node = g->record(OpKind::concat, std::move(ids), shape_numel(out_shape),
                         [pv, axis_total, outer, inner](Graph& gr, const Array& gout) {
            // route gradient slices back to each part; accumulate handles a
            // tensor appearing several times in the input list
            std::int64_t off = 0;
            for (const Tensor& p : pv) {
                const std::int64_t pa = p.numel() / (outer * inner);
                if (p.tracked()) {
                    Array gp(p.numel());
                    for (std::int64_t o = 0; o < outer; ++o) {
                        gp.segment(o * pa * inner, pa * inner) =
                            gout.segment((o * axis_total + off) * inner, pa * inner);
                    }
                    gr.accumulate(p.node(), gp);
                }
                off += pa;
            }
        });
    }
    return make_op_result(std::move(out_shape), std::move(out), g, node, "concat");
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
    if (axis < 0 || axis >= x.rank()) fail_shape("slice: axis out of range");
    if (len < 1 || start < 0 || start + len > x.extent(axis)) {
        fail_shape("slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                   ") out of bounds for extent " + std::to_string(x.extent(axis)));
    }
    Shape out_shape = x.shape();
    out_shape[axis] = len;
    const std::int64_t outer = prod(x.shape(), 0, axis);
    const std::int64_t inner = prod(x.shape(), axis + 1, x.rank());
    const std::int64_t ax = x.extent(axis);

    Array out(shape_numel(out_shape));
    for (std::int64_t o = 0; o < outer; ++o) {
        out.segment(o * len * inner, len * inner) =
            x.array().segment((o * ax + start) * inner, len * inner);
    }
    Graph* g = result_graph({&x}, "slice");
    int node = -1;
    if (g) {
        Tensor xv = x;
        node = g->record(OpKind::slice, tracked_nodes({&x}), shape_numel(out_shape),
                         [xv, axis, start, len, outer, inner, ax](Graph& gr, const Array& gout) {
            (void)axis;
            Array dx = Array::Zero(xv.numel());
            for (std::int64_t o = 0; o < outer; ++o) {
                dx.segment((o * ax + start) * inner, len * inner) =
                    gout.segment(o * len * inner, len * inner);
            }
            gr.accumulate(xv.node(), dx);
        });
    }
    return make_op_result(std::move(out_shape), std::move(out), g, node, "slice");
}

Tensor reshape(const Tensor& x, Shape shape) {
    for (int e : shape) {
        if (e <= 0) fail_shape("reshape: extents must be positive");
    }
    if (shape_numel(shape) != x.numel()) {
        fail_shape("reshape: element count mismatch, " + shape_to_string(x.shape()) + " -> " +
                   shape_to_string(shape));
    }
    Graph* g = result_graph({&x}, "reshape");
    Array out = x.array();
    int node = -1;
    if (g) {
        Tensor xv = x;
        node = g->record(OpKind::reshape, tracked_nodes({&x}), x.numel(),
                         [xv](Graph& gr, const Array& gout) { gr.accumulate(xv.node(), gout); });
    }
    return make_op_result(std::move(shape), std::move(out), g, node, "reshape");
}

Tensor sum(const Tensor& x) {
    Graph* g = result_graph({&x}, "sum");
    Array out(1);
    out(0) = x.array().sum();
    int node = -1;
    if (g) {
        Tensor xv = x;
        node = g->record(OpKind::sum, tracked_nodes({&x}), 1, [xv](Graph& gr, const Array& gout) {
            gr.accumulate(xv.node(), Array(Array::Constant(xv.numel(), gout(0))));
        });
    }
    return make_op_result({1}, std::move(out), g, node, "sum");
}

Tensor mean(const Tensor& x) {
    Graph* g = result_graph({&x}, "mean");
    Array out(1);
    out(0) = x.array().mean();
    int node = -1;
    if (g) {
        Tensor xv = x;
        const double inv = 1.0 / static_cast<double>(x.numel());
        node = g->record(OpKind::mean, tracked_nodes({&x}), 1,
                         [xv, inv](Graph& gr, const Array& gout) {
            gr.accumulate(xv.node(), Array(Array::Constant(xv.numel(), gout(0) * inv)));
        });
    }
    return make_op_result({1}, std::move(out), g, node, "mean");
}

Tensor mse(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return mean(mul(d, d));
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
    if (eps <= 0.0) fail_shape("finite_diff_grad: eps must be positive");
    const Array& base = x.array();
    Array out(x.numel());
    Array probe = base;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        probe(i) = base(i) + eps;
        const double fp = f(Tensor(x.shape(), probe));
        probe(i) = base(i) - eps;
        const double fm = f(Tensor(x.shape(), probe));
        probe(i) = base(i);
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("finite_diff_grad: non-finite function output");
        }
        out(i) = (fp - fm) / (2.0 * eps);
    }
    return Tensor(x.shape(), std::move(out));
}

}  // namespace cpnet
