#pragma once

#include <string>
#include <vector>

#include "advtopk/tensor.hpp"

namespace advtopk {

// Stable softmax / argmax helpers shared by the graph, the classifier and the
// attack bookkeeping. Ties in argmax resolve to the lowest index.
std::vector<float> stable_softmax(std::span<const float> z);
int argmax_low_id(std::span<const float> v);

enum class Op {
    Value,
    MatMul,
    Add,
    Sub,
    Mul,
    ScaleAdd,
    Relu,
    Tanh,
    Arctanh,
    Exp,
    Log,
    Softmax,
    LogSoftmax,
    MaxReduce,
    SumReduce,
    Clamp,
    Sign,
    Pick,
    Conv3x3,
    Reshape,
};

const char* op_name(Op op);

using NodeId = int;

// Retained-mode computation DAG with reverse-mode differentiation.
//
// Nodes are appended in topological order (parents always exist before their
// consumers), so forward() is a single in-order sweep and backward() the
// reverse sweep. Leaves are created with value()/placeholder(); everything
// else derives from them. Rebinding a leaf and rerunning forward() reuses all
// buffers, which keeps per-iteration cost of optimization loops flat.
//
// A graph instance is single-threaded. Gradients are only propagated along
// paths that reach a leaf created with requires_grad=true.
class Graph {
public:
    // Leaves. A placeholder must be bound with set_value before forward().
    NodeId value(Tensor v, std::string name = "", bool requires_grad = false);
    NodeId placeholder(Shape shape, std::string name = "", bool requires_grad = false);
    void set_value(NodeId id, Tensor v);
    Tensor& leaf_data(NodeId id);  // in-place update of a bound leaf

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale_add(NodeId a, float scale, float shift);
    NodeId relu(NodeId a);
    NodeId tanh(NodeId a);
    NodeId arctanh(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId softmax(NodeId a);
    NodeId log_softmax(NodeId a);
    NodeId max_reduce(NodeId a);
    NodeId sum_reduce(NodeId a);
    NodeId clamp(NodeId a, float lo, float hi);
    NodeId sign(NodeId a);
    NodeId pick(NodeId a, int index);
    NodeId conv3x3(NodeId x, NodeId w, NodeId bias);
    NodeId reshape(NodeId a, Shape shape);

    // Recomputes every derived node. Throws if a placeholder is unbound.
    void forward();
    // Chain rule from root down to every requires_grad leaf. Default seed is
    // all ones in the root's shape. Requires a prior forward().
    void backward(NodeId root);
    void backward(NodeId root, const Tensor& seed);

    const Tensor& value(NodeId id) const;
    const Tensor& grad(NodeId id) const;
    // Static shape information, available as soon as the node exists.
    const Shape& shape(NodeId id) const;
    std::size_t size(NodeId id) const;
    bool forward_ran() const { return forward_ran_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    const std::string& node_name(NodeId id) const;

private:
    struct Node {
        Op op = Op::Value;
        int p0 = -1, p1 = -1, p2 = -1;
        Tensor out;
        Tensor grad;
        float a0 = 0.0f, a1 = 0.0f;  // scale_add coefficients / clamp bounds
        int index = -1;              // pick index; max_reduce caches argmax here
        bool bound = false;
        bool requires_grad = false;  // leaves only
        bool needs_grad = false;     // reachable from a requires_grad leaf
        std::string name;
    };

    NodeId add_node(Node n);
    Node& at(NodeId id);
    const Node& at(NodeId id) const;
    std::string describe(NodeId id) const;
    void compute(Node& n);
    void propagate(Node& n);

    std::vector<Node> nodes_;
    bool forward_ran_ = false;
    bool backward_ran_ = false;
    Tensor scratch_;
};

}  // namespace advtopk
