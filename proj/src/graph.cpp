#include "advtopk/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advtopk/kernels.hpp"

namespace advtopk {

namespace {
// exp(x) overflows float32 just above this; callers must stay below.
constexpr float kExpArgLimit = 88.0f;

void accumulate(Tensor& dst, const Tensor& src) {
    float* d = dst.data();
    const float* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}
}  // namespace

std::vector<float> stable_softmax(std::span<const float> z) {
    std::vector<float> p(z.size());
    float m = z[0];
    for (float v : z) m = std::max(m, v);
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        denom += p[i];
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (float& v : p) v *= inv;
    return p;
}

int argmax_low_id(std::span<const float> v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Value: return "value";
        case Op::MatMul: return "matmul";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::ScaleAdd: return "scale_add";
        case Op::Relu: return "relu";
        case Op::Tanh: return "tanh";
        case Op::Arctanh: return "arctanh";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Softmax: return "softmax";
        case Op::LogSoftmax: return "log_softmax";
        case Op::MaxReduce: return "max_reduce";
        case Op::SumReduce: return "sum_reduce";
        case Op::Clamp: return "clamp";
        case Op::Sign: return "sign";
        case Op::Pick: return "pick";
        case Op::Conv3x3: return "conv3x3";
        case Op::Reshape: return "reshape";
    }
    return "?";
}

Graph::Node& Graph::at(NodeId id) {
    if (id < 0 || id >= node_count()) throw std::invalid_argument("unknown node id " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::at(NodeId id) const {
    if (id < 0 || id >= node_count()) throw std::invalid_argument("unknown node id " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
}

std::string Graph::describe(NodeId id) const {
    const Node& n = at(id);
    return std::string(op_name(n.op)) + " node '" + n.name + "'";
}

NodeId Graph::add_node(Node n) {
    if (n.name.empty()) n.name = std::string(op_name(n.op)) + "#" + std::to_string(nodes_.size());
    if (n.op != Op::Value) {
        n.needs_grad = at(n.p0).needs_grad || (n.p1 >= 0 && at(n.p1).needs_grad) ||
                       (n.p2 >= 0 && at(n.p2).needs_grad);
        forward_ran_ = false;  // new derived node has no cached value yet
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::value(Tensor v, std::string name, bool requires_grad) {
    Node n;
    n.op = Op::Value;
    n.out = std::move(v);
    n.bound = true;
    n.requires_grad = requires_grad;
    n.needs_grad = requires_grad;
    n.name = std::move(name);
    return add_node(std::move(n));
}

NodeId Graph::placeholder(Shape shape, std::string name, bool requires_grad) {
    Node n;
    n.op = Op::Value;
    n.out = Tensor(std::move(shape));
    n.bound = false;
    n.requires_grad = requires_grad;
    n.needs_grad = requires_grad;
    n.name = std::move(name);
    return add_node(std::move(n));
}

void Graph::set_value(NodeId id, Tensor v) {
    Node& n = at(id);
    if (n.op != Op::Value) throw std::invalid_argument("set_value on derived " + describe(id));
    if (!same_shape(v.shape(), n.out.shape())) {
        throw std::invalid_argument("set_value shape " + shape_str(v.shape()) + " does not match " +
                                    shape_str(n.out.shape()) + " of " + describe(id));
    }
    n.out = std::move(v);
    n.bound = true;
    forward_ran_ = false;
}

Tensor& Graph::leaf_data(NodeId id) {
    Node& n = at(id);
    if (n.op != Op::Value || !n.bound) throw std::invalid_argument("leaf_data needs a bound leaf, got " + describe(id));
    forward_ran_ = false;
    return n.out;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = at(a).out;
    const Tensor& tb = at(b).out;
    if (ta.rank() != 2) throw std::invalid_argument("matmul: left operand must be a matrix, got " +
                                                    shape_str(ta.shape()) + " at " + describe(a));
    Shape out;
    if (tb.rank() == 2) {
        if (ta.dim(1) != tb.dim(0))
            throw std::invalid_argument("matmul: inner dimensions differ: " + shape_str(ta.shape()) + " vs " +
                                        shape_str(tb.shape()) + " at " + describe(b));
        out = {ta.dim(0), tb.dim(1)};
    } else if (tb.rank() == 1) {
        if (ta.dim(1) != tb.dim(0))
            throw std::invalid_argument("matmul: matrix " + shape_str(ta.shape()) + " cannot multiply vector " +
                                        shape_str(tb.shape()) + " at " + describe(b));
        out = {ta.dim(0)};
    } else {
        throw std::invalid_argument("matmul: right operand must be matrix or vector at " + describe(b));
    }
    Node n;
    n.op = Op::MatMul;
    n.p0 = a;
    n.p1 = b;
    n.out = Tensor(out);
    return add_node(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    if (!same_shape(at(a).out.shape(), at(b).out.shape()))
        throw std::invalid_argument("add: shape " + shape_str(at(a).out.shape()) + " vs " +
                                    shape_str(at(b).out.shape()) + " at " + describe(b));
    Node n;
    n.op = Op::Add;
    n.p0 = a;
    n.p1 = b;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    if (!same_shape(at(a).out.shape(), at(b).out.shape()))
        throw std::invalid_argument("sub: shape " + shape_str(at(a).out.shape()) + " vs " +
                                    shape_str(at(b).out.shape()) + " at " + describe(b));
    Node n;
    n.op = Op::Sub;
    n.p0 = a;
    n.p1 = b;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    if (!same_shape(at(a).out.shape(), at(b).out.shape()))
        throw std::invalid_argument("mul: shape " + shape_str(at(a).out.shape()) + " vs " +
                                    shape_str(at(b).out.shape()) + " at " + describe(b));
    Node n;
    n.op = Op::Mul;
    n.p0 = a;
    n.p1 = b;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

NodeId Graph::scale_add(NodeId a, float scale, float shift) {
    Node n;
    n.op = Op::ScaleAdd;
    n.p0 = a;
    n.a0 = scale;
    n.a1 = shift;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

#define ADVTOPK_UNARY(method, opkind)                \
    NodeId Graph::method(NodeId a) {                 \
        Node n;                                      \
        n.op = opkind;                               \
        n.p0 = a;                                    \
        n.out = Tensor(at(a).out.shape());           \
        return add_node(std::move(n));               \
    }

ADVTOPK_UNARY(relu, Op::Relu)
ADVTOPK_UNARY(tanh, Op::Tanh)
ADVTOPK_UNARY(arctanh, Op::Arctanh)
ADVTOPK_UNARY(exp, Op::Exp)
ADVTOPK_UNARY(log, Op::Log)
ADVTOPK_UNARY(sign, Op::Sign)
#undef ADVTOPK_UNARY

NodeId Graph::softmax(NodeId a) {
    if (at(a).out.rank() != 1)
        throw std::invalid_argument("softmax: needs a vector, got " + shape_str(at(a).out.shape()) +
                                    " at " + describe(a));
    Node n;
    n.op = Op::Softmax;
    n.p0 = a;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

NodeId Graph::log_softmax(NodeId a) {
    if (at(a).out.rank() != 1)
        throw std::invalid_argument("log_softmax: needs a vector, got " + shape_str(at(a).out.shape()) +
                                    " at " + describe(a));
    Node n;
    n.op = Op::LogSoftmax;
    n.p0 = a;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

NodeId Graph::max_reduce(NodeId a) {
    Node n;
    n.op = Op::MaxReduce;
    n.p0 = a;
    n.out = Tensor({1});
    return add_node(std::move(n));
}

NodeId Graph::sum_reduce(NodeId a) {
    Node n;
    n.op = Op::SumReduce;
    n.p0 = a;
    n.out = Tensor({1});
    return add_node(std::move(n));
}

NodeId Graph::clamp(NodeId a, float lo, float hi) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
    Node n;
    n.op = Op::Clamp;
    n.p0 = a;
    n.a0 = lo;
    n.a1 = hi;
    n.out = Tensor(at(a).out.shape());
    return add_node(std::move(n));
}

NodeId Graph::pick(NodeId a, int index) {
    const Tensor& ta = at(a).out;
    if (ta.rank() != 1 || index < 0 || index >= ta.dim(0))
        throw std::invalid_argument("pick: index " + std::to_string(index) + " out of range for " +
                                    shape_str(ta.shape()) + " at " + describe(a));
    Node n;
    n.op = Op::Pick;
    n.p0 = a;
    n.index = index;
    n.out = Tensor({1});
    return add_node(std::move(n));
}

NodeId Graph::conv3x3(NodeId x, NodeId w, NodeId bias) {
    const Tensor& tx = at(x).out;
    const Tensor& tw = at(w).out;
    const Tensor& tb = at(bias).out;
    if (tx.rank() != 3)
        throw std::invalid_argument("conv3x3: input must be (channels,h,w), got " + shape_str(tx.shape()) +
                                    " at " + describe(x));
    if (tw.rank() != 4 || tw.dim(2) != 3 || tw.dim(3) != 3 || tw.dim(1) != tx.dim(0))
        throw std::invalid_argument("conv3x3: weights must be (cout," + std::to_string(tx.dim(0)) +
                                    ",3,3), got " + shape_str(tw.shape()) + " at " + describe(w));
    if (tb.rank() != 1 || tb.dim(0) != tw.dim(0))
        throw std::invalid_argument("conv3x3: bias must be (cout), got " + shape_str(tb.shape()) + " at " +
                                    describe(bias));
    Node n;
    n.op = Op::Conv3x3;
    n.p0 = x;
    n.p1 = w;
    n.p2 = bias;
    n.out = Tensor({tw.dim(0), tx.dim(1), tx.dim(2)});
    return add_node(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape shape) {
    if (shape_size(shape) != at(a).out.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(at(a).out.shape()) + " as " +
                                    shape_str(shape) + " at " + describe(a));
    Node n;
    n.op = Op::Reshape;
    n.p0 = a;
    n.out = Tensor(std::move(shape));
    return add_node(std::move(n));
}

void Graph::compute(Node& n) {
    const Tensor& a = nodes_[static_cast<std::size_t>(n.p0)].out;
    const float* pa = a.data();
    float* po = n.out.data();
    const std::size_t sz = n.out.size();
    switch (n.op) {
        case Op::Value:
            break;
        case Op::MatMul: {
            const Tensor& b = nodes_[static_cast<std::size_t>(n.p1)].out;
            if (b.rank() == 1) {
                kernels::matvec(pa, b.data(), po, a.dim(0), a.dim(1));
            } else {
                kernels::matmul(pa, b.data(), po, a.dim(0), a.dim(1), b.dim(1));
            }
            break;
        }
        case Op::Add: {
            const float* pb = nodes_[static_cast<std::size_t>(n.p1)].out.data();
            for (std::size_t i = 0; i < sz; ++i) po[i] = pa[i] + pb[i];
            break;
        }
        case Op::Sub: {
            const float* pb = nodes_[static_cast<std::size_t>(n.p1)].out.data();
            for (std::size_t i = 0; i < sz; ++i) po[i] = pa[i] - pb[i];
            break;
        }
        case Op::Mul: {
            const float* pb = nodes_[static_cast<std::size_t>(n.p1)].out.data();
            for (std::size_t i = 0; i < sz; ++i) po[i] = pa[i] * pb[i];
            break;
        }
        case Op::ScaleAdd:
            for (std::size_t i = 0; i < sz; ++i) po[i] = n.a0 * pa[i] + n.a1;
            break;
        case Op::Relu:
            for (std::size_t i = 0; i < sz; ++i) po[i] = pa[i] > 0.0f ? pa[i] : 0.0f;
            break;
        case Op::Tanh:
            for (std::size_t i = 0; i < sz; ++i) po[i] = std::tanh(pa[i]);
            break;
        case Op::Arctanh:
            for (std::size_t i = 0; i < sz; ++i) {
                if (!(pa[i] > -1.0f && pa[i] < 1.0f))
                    throw std::invalid_argument("arctanh: input outside (-1,1) at " + describe(n.p0));
                po[i] = std::atanh(pa[i]);
            }
            break;
        case Op::Exp:
            for (std::size_t i = 0; i < sz; ++i) {
                if (pa[i] > kExpArgLimit)
                    throw std::invalid_argument("exp: input above overflow limit at " + describe(n.p0));
                po[i] = std::exp(pa[i]);
            }
            break;
        case Op::Log:
            for (std::size_t i = 0; i < sz; ++i) {
                if (!(pa[i] > 0.0f))
                    throw std::invalid_argument("log: input must be positive at " + describe(n.p0));
                po[i] = std::log(pa[i]);
            }
            break;
        case Op::Softmax: {
            std::vector<float> p = stable_softmax(a.values());
            std::copy(p.begin(), p.end(), po);
            break;
        }
        case Op::LogSoftmax: {
            float m = pa[0];
            for (std::size_t i = 1; i < sz; ++i) m = std::max(m, pa[i]);
            double denom = 0.0;
            for (std::size_t i = 0; i < sz; ++i) denom += std::exp(static_cast<double>(pa[i]) - m);
            const float lse = m + static_cast<float>(std::log(denom));
            for (std::size_t i = 0; i < sz; ++i) po[i] = pa[i] - lse;
            break;
        }
        case Op::MaxReduce: {
            int best = 0;
            for (std::size_t i = 1; i < a.size(); ++i) {
                if (pa[i] > pa[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
            }
            n.index = best;
            po[0] = pa[static_cast<std::size_t>(best)];
            break;
        }
        case Op::SumReduce:
            po[0] = static_cast<float>(kernels::sum(pa, a.size()));
            break;
        case Op::Clamp:
            for (std::size_t i = 0; i < sz; ++i) po[i] = std::min(n.a1, std::max(n.a0, pa[i]));
            break;
        case Op::Sign:
            for (std::size_t i = 0; i < sz; ++i) po[i] = pa[i] > 0.0f ? 1.0f : (pa[i] < 0.0f ? -1.0f : 0.0f);
            break;
        case Op::Pick:
            po[0] = pa[static_cast<std::size_t>(n.index)];
            break;
        case Op::Conv3x3: {
            const Tensor& w = nodes_[static_cast<std::size_t>(n.p1)].out;
            const Tensor& b = nodes_[static_cast<std::size_t>(n.p2)].out;
            kernels::conv3x3(pa, w.data(), b.data(), po, a.dim(0), w.dim(0), a.dim(1), a.dim(2));
            break;
        }
        case Op::Reshape:
            std::copy(pa, pa + sz, po);
            break;
    }
}

void Graph::forward() {
    for (Node& n : nodes_) {
        if (n.op == Op::Value) {
            if (!n.bound) throw std::runtime_error("forward: unbound placeholder '" + n.name + "'");
            continue;
        }
        compute(n);
    }
    forward_ran_ = true;
}

void Graph::backward(NodeId root) { backward(root, Tensor::filled(at(root).out.shape(), 1.0f)); }

void Graph::backward(NodeId root, const Tensor& seed) {
    if (!forward_ran_) throw std::runtime_error("backward: forward has not been run on this graph");
    const Node& r = at(root);
    if (!same_shape(seed.shape(), r.out.shape()))
        throw std::invalid_argument("backward: seed shape " + shape_str(seed.shape()) +
                                    " does not match output of " + describe(root));
    for (Node& n : nodes_) {
        if (!n.needs_grad) continue;
        if (n.grad.empty()) n.grad = Tensor(n.out.shape());
        else n.grad.fill(0.0f);
    }
    if (r.needs_grad) {
        Node& rr = at(root);
        std::copy(seed.data(), seed.data() + seed.size(), rr.grad.data());
        for (int id = root; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.needs_grad || n.op == Op::Value) continue;
            propagate(n);
        }
    }
    backward_ran_ = true;
}

void Graph::propagate(Node& n) {
    Node& a = nodes_[static_cast<std::size_t>(n.p0)];
    const float* pa = a.out.data();
    const float* g = n.grad.data();
    const std::size_t sz = n.out.size();
    const bool need_a = a.needs_grad;
    switch (n.op) {
        case Op::Value:
            break;
        case Op::MatMul: {
            Node& b = nodes_[static_cast<std::size_t>(n.p1)];
            const int m = a.out.dim(0);
            const int k = a.out.dim(1);
            if (b.out.rank() == 1) {
                if (need_a) kernels::ger(g, b.out.data(), a.grad.data(), m, k);
                if (b.needs_grad) {
                    scratch_ = Tensor({k});
                    kernels::matvec_t(pa, g, scratch_.data(), m, k);
                    accumulate(b.grad, scratch_);
                }
            } else {
                const int nn = b.out.dim(1);
                if (need_a) {
                    scratch_ = Tensor({m, k});
                    kernels::matmul_nt(g, b.out.data(), scratch_.data(), m, nn, k);
                    accumulate(a.grad, scratch_);
                }
                if (b.needs_grad) {
                    scratch_ = Tensor({k, nn});
                    kernels::matmul_tn(pa, g, scratch_.data(), k, m, nn);
                    accumulate(b.grad, scratch_);
                }
            }
            break;
        }
        case Op::Add: {
            Node& b = nodes_[static_cast<std::size_t>(n.p1)];
            if (need_a) accumulate(a.grad, n.grad);
            if (b.needs_grad) accumulate(b.grad, n.grad);
            break;
        }
        case Op::Sub: {
            Node& b = nodes_[static_cast<std::size_t>(n.p1)];
            if (need_a) accumulate(a.grad, n.grad);
            if (b.needs_grad) {
                float* gb = b.grad.data();
                for (std::size_t i = 0; i < sz; ++i) gb[i] -= g[i];
            }
            break;
        }
        case Op::Mul: {
            Node& b = nodes_[static_cast<std::size_t>(n.p1)];
            if (need_a) {
                float* ga = a.grad.data();
                const float* pb = b.out.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * pb[i];
            }
            if (b.needs_grad) {
                float* gb = b.grad.data();
                for (std::size_t i = 0; i < sz; ++i) gb[i] += g[i] * pa[i];
            }
            break;
        }
        case Op::ScaleAdd:
            if (need_a) {
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += n.a0 * g[i];
            }
            break;
        case Op::Relu:
            if (need_a) {
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += pa[i] > 0.0f ? g[i] : 0.0f;
            }
            break;
        case Op::Tanh:
            if (need_a) {
                float* ga = a.grad.data();
                const float* po = n.out.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * (1.0f - po[i] * po[i]);
            }
            break;
        case Op::Arctanh:
            if (need_a) {
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] / (1.0f - pa[i] * pa[i]);
            }
            break;
        case Op::Exp:
            if (need_a) {
                float* ga = a.grad.data();
                const float* po = n.out.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] * po[i];
            }
            break;
        case Op::Log:
            if (need_a) {
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += g[i] / pa[i];
            }
            break;
        case Op::Softmax:
            if (need_a) {
                const float* p = n.out.data();
                double s = 0.0;
                for (std::size_t i = 0; i < sz; ++i) s += static_cast<double>(g[i]) * p[i];
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i) ga[i] += p[i] * (g[i] - static_cast<float>(s));
            }
            break;
        case Op::LogSoftmax:
            if (need_a) {
                const float* lp = n.out.data();
                double s = 0.0;
                for (std::size_t i = 0; i < sz; ++i) s += g[i];
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i)
                    ga[i] += g[i] - std::exp(lp[i]) * static_cast<float>(s);
            }
            break;
        case Op::MaxReduce:
            if (need_a) a.grad[static_cast<std::size_t>(n.index)] += g[0];
            break;
        case Op::SumReduce:
            if (need_a) {
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < a.out.size(); ++i) ga[i] += g[0];
            }
            break;
        case Op::Clamp:
            if (need_a) {
                float* ga = a.grad.data();
                for (std::size_t i = 0; i < sz; ++i)
                    ga[i] += (pa[i] >= n.a0 && pa[i] <= n.a1) ? g[i] : 0.0f;
            }
            break;
        case Op::Sign:
            break;  // gradient treated as zero
        case Op::Pick:
            if (need_a) a.grad[static_cast<std::size_t>(n.index)] += g[0];
            break;
        case Op::Conv3x3: {
            Node& w = nodes_[static_cast<std::size_t>(n.p1)];
            Node& b = nodes_[static_cast<std::size_t>(n.p2)];
            const int cin = a.out.dim(0);
            const int cout = w.out.dim(0);
            const int h = a.out.dim(1);
            const int wd = a.out.dim(2);
            if (need_a) kernels::conv3x3_grad_input(g, w.out.data(), a.grad.data(), cin, cout, h, wd);
            if (w.needs_grad || b.needs_grad) {
                float* dw = nullptr;
                if (w.needs_grad) {
                    dw = w.grad.data();
                } else {
                    scratch_ = Tensor(w.out.shape());
                    dw = scratch_.data();
                }
                kernels::conv3x3_grad_weights(pa, g, dw, b.needs_grad ? b.grad.data() : nullptr,
                                              cin, cout, h, wd);
            }
            break;
        }
        case Op::Reshape:
            if (need_a) accumulate(a.grad, n.grad);
            break;
    }
}

const Tensor& Graph::value(NodeId id) const {
    const Node& n = at(id);
    if (n.op == Op::Value) {
        if (!n.bound) throw std::runtime_error("value: unbound placeholder '" + n.name + "'");
        return n.out;
    }
    if (!forward_ran_) throw std::runtime_error("value: forward has not been run for " + describe(id));
    return n.out;
}

const Tensor& Graph::grad(NodeId id) const {
    const Node& n = at(id);
    if (!backward_ran_) throw std::runtime_error("grad: backward has not been run");
    if (!n.needs_grad)
        throw std::runtime_error("grad: " + describe(id) + " does not track gradients");
    return n.grad;
}

const Shape& Graph::shape(NodeId id) const { return at(id).out.shape(); }

std::size_t Graph::size(NodeId id) const { return at(id).out.size(); }

const std::string& Graph::node_name(NodeId id) const { return at(id).name; }

}  // namespace advtopk
