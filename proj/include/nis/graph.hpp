// Reverse-mode automatic differentiation on a tape of tensor ops.
// One Graph instance is single-threaded; distinct instances are independent.
#pragma once

#include <cstddef>
#include <vector>

#include "nis/tensor.hpp"

namespace nis::ad {

using NodeId = int;

enum class Op {
    input,
    matmul,
    add,
    mul,
    relu,
    exp,
    neg,
    concat,
    slice,
    sum,
    scale,
    tanh,
};

class Graph {
public:
    // Leaf node. requires_grad marks it as a parameter whose gradient is wanted.
    NodeId input(Tensor value, bool requires_grad = false);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId relu(NodeId a);
    NodeId exp(NodeId a);
    NodeId neg(NodeId a);
    // Concatenation along the last axis (vectors: axis 0; matrices: columns).
    NodeId concat(NodeId a, NodeId b);
    // Half-open column range [c0, c1) along the last axis.
    NodeId slice(NodeId a, std::size_t c0, std::size_t c1);
    // Sum of all entries, producing a scalar (shape {1}).
    NodeId sum(NodeId a);
    NodeId scale(NodeId a, double factor);
    NodeId tanh(NodeId a);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    // Clears all gradients, then propagates from a scalar root through the
    // tape in reverse creation order (a valid reverse topological order).
    void backward(NodeId root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Op op;
        Tensor value;
        Tensor grad;
        NodeId a = -1;
        NodeId b = -1;
        std::size_t c0 = 0; // slice bounds
        std::size_t c1 = 0;
        double factor = 1.0; // scale
        bool requires_grad = false;
    };

    NodeId push(Node n);
    Node& at(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

// Jacobian of the map x -> f(x) at x, computed by one backward pass per output
// component. `build` receives the graph and the input node and returns the
// output node; input and output must be rank-1.
template <typename BuildFn>
Tensor jacobian(BuildFn&& build, const Tensor& x) {
    Graph g;
    NodeId in = g.input(x, true);
    NodeId out = build(g, in);
    const Tensor& y = g.value(out);
    if (y.rank() == 2 && y.shape[0] != 1)
        throw ShapeError("jacobian: output must be a vector, got " + y.shape_str());
    std::size_t m = y.size();
    std::size_t n = x.size();
    Tensor jac({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        NodeId row = g.sum(g.slice(out, i, i + 1));
        g.backward(row);
        const Tensor& gx = g.grad(in);
        for (std::size_t j = 0; j < n; ++j) jac.at(i, j) = gx[j];
    }
    return jac;
}

} // namespace nis::ad
