#include "nis/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace nis::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using MapConst = Eigen::Map<const EMat>;

const char* op_name(Op op) {
    switch (op) {
        case Op::input: return "input";
        case Op::matmul: return "matmul";
        case Op::add: return "add";
        case Op::mul: return "mul";
        case Op::relu: return "relu";
        case Op::exp: return "exp";
        case Op::neg: return "neg";
        case Op::concat: return "concat";
        case Op::slice: return "slice";
        case Op::sum: return "sum";
        case Op::scale: return "scale";
        case Op::tanh: return "tanh";
    }
    return "?";
}

[[noreturn]] void shape_fail(Op op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + a.shape_str() +
                     " and " + b.shape_str());
}

} // namespace

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::input;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    if (ta.rank() == 2 && tb.rank() == 2) {
        if (ta.shape[1] != tb.shape[0]) shape_fail(Op::matmul, ta, tb);
        n.value = Tensor({ta.shape[0], tb.shape[1]});
    } else if (ta.rank() == 2 && tb.rank() == 1) {
        if (ta.shape[1] != tb.shape[0]) shape_fail(Op::matmul, ta, tb);
        n.value = Tensor({ta.shape[0]});
    } else if (ta.rank() == 1 && tb.rank() == 2) {
        if (ta.shape[0] != tb.shape[0]) shape_fail(Op::matmul, ta, tb);
        n.value = Tensor({tb.shape[1]});
    } else {
        shape_fail(Op::matmul, ta, tb);
    }
    MapConst ma(ta.data.data(), static_cast<Eigen::Index>(ta.rows()),
                static_cast<Eigen::Index>(ta.rank() == 1 ? ta.shape[0] : ta.cols()));
    // Vector operands are treated as 1xN (left) or Nx1 (right).
    if (ta.rank() == 1) {
        MapConst va(ta.data.data(), 1, static_cast<Eigen::Index>(ta.shape[0]));
        MapConst mb(tb.data.data(), static_cast<Eigen::Index>(tb.shape[0]),
                    static_cast<Eigen::Index>(tb.shape[1]));
        MapMat out(n.value.data.data(), 1, static_cast<Eigen::Index>(tb.shape[1]));
        out = va * mb;
    } else if (tb.rank() == 1) {
        MapConst va(ta.data.data(), static_cast<Eigen::Index>(ta.shape[0]),
                    static_cast<Eigen::Index>(ta.shape[1]));
        MapConst mb(tb.data.data(), static_cast<Eigen::Index>(tb.shape[0]), 1);
        MapMat out(n.value.data.data(), static_cast<Eigen::Index>(ta.shape[0]), 1);
        out = va * mb;
    } else {
        MapConst va(ta.data.data(), static_cast<Eigen::Index>(ta.shape[0]),
                    static_cast<Eigen::Index>(ta.shape[1]));
        MapConst mb(tb.data.data(), static_cast<Eigen::Index>(tb.shape[0]),
                    static_cast<Eigen::Index>(tb.shape[1]));
        MapMat out(n.value.data.data(), static_cast<Eigen::Index>(ta.shape[0]),
                   static_cast<Eigen::Index>(tb.shape[1]));
        out = va * mb;
    }
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) shape_fail(Op::add, ta, tb);
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + tb[i];
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) shape_fail(Op::mul, ta, tb);
    Node n;
    n.op = Op::mul;
    n.a = a;
    n.b = b;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] * tb[i];
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::relu;
    n.a = a;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = ta[i] > 0.0 ? ta[i] : 0.0;
    return push(std::move(n));
}

NodeId Graph::exp(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::exp;
    n.a = a;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = std::exp(ta[i]);
    return push(std::move(n));
}

NodeId Graph::neg(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::neg;
    n.a = a;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = -ta[i];
    return push(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    Node n;
    n.op = Op::concat;
    n.a = a;
    n.b = b;
    if (ta.rank() == 1 && tb.rank() == 1) {
        n.value = Tensor({ta.shape[0] + tb.shape[0]});
        std::size_t i = 0;
        for (double v : ta.data) n.value[i++] = v;
        for (double v : tb.data) n.value[i++] = v;
    } else if (ta.rank() == 2 && tb.rank() == 2 && ta.shape[0] == tb.shape[0]) {
        std::size_t rows = ta.shape[0], ca = ta.shape[1], cb = tb.shape[1];
        n.value = Tensor({rows, ca + cb});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < ca; ++c) n.value.at(r, c) = ta.at(r, c);
            for (std::size_t c = 0; c < cb; ++c) n.value.at(r, ca + c) = tb.at(r, c);
        }
    } else {
        shape_fail(Op::concat, ta, tb);
    }
    return push(std::move(n));
}

NodeId Graph::slice(NodeId a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = value(a);
    std::size_t width = ta.rank() == 1 ? ta.shape[0] : ta.shape[1];
    if (c0 >= c1 || c1 > width) {
        throw ShapeError("slice: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") out of bounds for " + ta.shape_str());
    }
    Node n;
    n.op = Op::slice;
    n.a = a;
    n.c0 = c0;
    n.c1 = c1;
    if (ta.rank() == 1) {
        n.value = Tensor({c1 - c0});
        for (std::size_t c = c0; c < c1; ++c) n.value[c - c0] = ta[c];
    } else {
        std::size_t rows = ta.shape[0];
        n.value = Tensor({rows, c1 - c0});
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = c0; c < c1; ++c) n.value.at(r, c - c0) = ta.at(r, c);
    }
    return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::sum;
    n.a = a;
    n.value = Tensor({1});
    double s = 0.0;
    for (double v : ta.data) s += v;
    n.value[0] = s;
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.factor = factor;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = factor * ta[i];
    return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
    const Tensor& ta = value(a);
    Node n;
    n.op = Op::tanh;
    n.a = a;
    n.value = Tensor(ta.shape);
    for (std::size_t i = 0; i < ta.size(); ++i) n.value[i] = std::tanh(ta[i]);
    return push(std::move(n));
}

void Graph::backward(NodeId root) {
    Node& r = at(root);
    if (r.value.size() != 1) {
        throw ShapeError("backward: root must be scalar, got " + r.value.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor(n.value.shape);
    r.grad[0] = 1.0;

    for (int id = root; id >= 0; --id) {
        Node& n = at(id);
        if (n.grad.size() == 0) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::input:
                break;
            case Op::matmul: {
                Node& pa = at(n.a);
                Node& pb = at(n.b);
                // Shapes as 2-D: vectors are 1xN on the left, Nx1 on the right.
                std::size_t ar = pa.value.rank() == 1 ? 1 : pa.value.shape[0];
                std::size_t ac = pa.value.rank() == 1 ? pa.value.shape[0] : pa.value.shape[1];
                std::size_t bc = pb.value.rank() == 1 ? 1 : pb.value.shape[1];
                MapConst A(pa.value.data.data(), static_cast<Eigen::Index>(ar),
                           static_cast<Eigen::Index>(ac));
                MapConst B(pb.value.data.data(), static_cast<Eigen::Index>(ac),
                           static_cast<Eigen::Index>(bc));
                MapConst G(g.data.data(), static_cast<Eigen::Index>(ar),
                           static_cast<Eigen::Index>(bc));
                MapMat GA(pa.grad.data.data(), static_cast<Eigen::Index>(ar),
                          static_cast<Eigen::Index>(ac));
                MapMat GB(pb.grad.data.data(), static_cast<Eigen::Index>(ac),
                          static_cast<Eigen::Index>(bc));
                GA.noalias() += G * B.transpose();
                GB.noalias() += A.transpose() * G;
                break;
            }
            case Op::add:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    at(n.a).grad[i] += g[i];
                    at(n.b).grad[i] += g[i];
                }
                break;
            case Op::mul:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    at(n.a).grad[i] += g[i] * at(n.b).value[i];
                    at(n.b).grad[i] += g[i] * at(n.a).value[i];
                }
                break;
            case Op::relu:
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (at(n.a).value[i] > 0.0) at(n.a).grad[i] += g[i];
                break;
            case Op::exp:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += g[i] * n.value[i];
                break;
            case Op::neg:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] -= g[i];
                break;
            case Op::concat: {
                Node& pa = at(n.a);
                Node& pb = at(n.b);
                if (n.value.rank() == 1) {
                    std::size_t na = pa.value.shape[0];
                    for (std::size_t i = 0; i < na; ++i) pa.grad[i] += g[i];
                    for (std::size_t i = 0; i < pb.value.shape[0]; ++i) pb.grad[i] += g[na + i];
                } else {
                    std::size_t rows = n.value.shape[0];
                    std::size_t ca = pa.value.shape[1], cb = pb.value.shape[1];
                    for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < ca; ++c) pa.grad.at(r, c) += g.at(r, c);
                        for (std::size_t c = 0; c < cb; ++c) pb.grad.at(r, c) += g.at(r, ca + c);
                    }
                }
                break;
            }
            case Op::slice: {
                Node& pa = at(n.a);
                if (n.value.rank() == 1) {
                    for (std::size_t c = n.c0; c < n.c1; ++c) pa.grad[c] += g[c - n.c0];
                } else {
                    std::size_t rows = n.value.shape[0];
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = n.c0; c < n.c1; ++c)
                            pa.grad.at(r, c) += g.at(r, c - n.c0);
                }
                break;
            }
            case Op::sum:
                for (std::size_t i = 0; i < at(n.a).grad.size(); ++i) at(n.a).grad[i] += g[0];
                break;
            case Op::scale:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += n.factor * g[i];
                break;
            case Op::tanh:
                for (std::size_t i = 0; i < g.size(); ++i)
                    at(n.a).grad[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                break;
        }
    }
}

} // namespace nis::ad
