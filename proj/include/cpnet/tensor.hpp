#ifndef CPNET_TENSOR_HPP
#define CPNET_TENSOR_HPP

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cpnet {

using Array = Eigen::ArrayXd;
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Graph;

/**
 * Dense n-dimensional array of doubles, stored flat in row-major order.
 *
 * Tensors are value types with shared immutable storage: copies are cheap
 * and never alias mutable state, so they are safe to hand across threads.
 * A tensor optionally carries a handle into a Graph; any op whose inputs
 * carry a handle records itself onto that graph for reverse-mode
 * differentiation.
 */
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, Array values);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const;
    std::int64_t numel() const { return data_ ? data_->size() : 0; }
    bool defined() const { return static_cast<bool>(data_); }

    // Flat row-major view of the values.
    const Array& array() const;
    double value_at(std::int64_t flat_index) const;
    // Convenience accessor for tests and debugging; idx must match rank().
    double at(const std::vector<int>& idx) const;

    bool requires_grad() const { return requires_grad_; }
    Graph* graph() const { return graph_; }
    int node() const { return node_; }
    bool tracked() const { return graph_ != nullptr; }
    // Copy without any graph association.
    Tensor detached() const;

private:
    Shape shape_;
    std::shared_ptr<const Array> data_;
    bool requires_grad_ = false;
    Graph* graph_ = nullptr;
    int node_ = -1;

    friend class Graph;
    friend Tensor make_op_result(Shape shape, Array values, Graph* graph,
                                 int node, const char* op_name);
};

// shape/values pair -> leaf tensor (no graph). Throws std::invalid_argument
// on shape/length mismatch and std::runtime_error on non-finite input.
Tensor tensor_from(Shape shape, std::vector<double> values);

enum class OpKind {
    leaf,
    add,
    sub,
    mul,
    scale,
    matmul,
    linear,
    conv1d,
    conv2d,
    relu,
    concat,
    slice,
    reshape,
    sum,
    mean,
};

const char* op_kind_name(OpKind kind);

/**
 * Tape for one forward pass. Nodes are appended in execution order, so the
 * append order is already topological; backward() walks it once in reverse.
 * Graphs are independent: passes on distinct graphs may run concurrently.
 */
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, const Array& out_grad)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Register a differentiable leaf (a parameter). Returns a copy of t
    // bound to this graph; the original tensor is untouched.
    Tensor leaf(const Tensor& t);

    int size() const { return static_cast<int>(nodes_.size()); }
    OpKind op_kind(int node) const { return nodes_.at(node).kind; }
    const std::vector<int>& inputs(int node) const { return nodes_.at(node).inputs; }

    // Gradient of the last backward() pass w.r.t. a tensor tracked by this
    // graph. Zero for tracked tensors the loss does not depend on.
    const Array& grad(const Tensor& t);
    bool backward_done() const { return backward_done_; }

    // Low-level tape access used by the op implementations.
    int record(OpKind kind, std::vector<int> inputs, std::int64_t numel, BackwardFn fn);
    void accumulate(int node, const Array& g);

private:
    struct Node {
        OpKind kind;
        std::vector<int> inputs;
        std::int64_t numel = 0;
        BackwardFn backward;  // null for leaves
        Array grad;
        bool grad_set = false;
    };

    Array& grad_buffer(int node);

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    friend void backward(const Tensor& loss);
};

// Reverse-mode sweep from a scalar loss. Deterministic: identical graphs
// give bit-identical gradients.
void backward(const Tensor& loss);

// ---- differentiable ops (free functions) ----

enum class EwKind { add, sub, mul };

// Elementwise op. Shapes must be equal, or one operand may broadcast by
// having extent 1 on a trailing block of axes (same rank).
Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[..., in] with weight[out, in], bias[out] -> [..., out]; the affine map
// is applied along the trailing axis and shared over all leading axes.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// 1D convolution. input [C_in, L] or [B, C_in, L]; weight [C_out, C_in, K];
// bias [C_out]. Output position t covers input positions
// t*stride - pad_left + j*dilation, j in [0, K). Padding values are zeros.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int dilation, int pad_left, int pad_right);
std::int64_t conv1d_output_length(std::int64_t length, int kernel, int stride,
                                  int dilation, int pad_left, int pad_right);

// Pointwise 2D convolution: input [C_in, H, W], weight [C_out, C_in, 1, 1],
// bias [C_out] -> [C_out, H, W]. Kernels other than 1x1 are rejected.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);  // subgradient at 0 is 0
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);   // -> [1]
Tensor mean(const Tensor& x);  // -> [1]

// mean((a - b)^2) as a composite of sub/mul/mean.
Tensor mse(const Tensor& a, const Tensor& b);

// Central-difference gradient oracle: per element i,
// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). Uses only forward
// evaluations of f; independent of the tape machinery.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps);

}  // namespace cpnet

#endif
