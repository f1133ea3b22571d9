// Parametric building blocks: feed-forward MLP, affine coupling block, and
// the invertible bijector with exact inverse and log-det-Jacobian.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nis/graph.hpp"
#include "nis/rng.hpp"
#include "nis/tensor.hpp"

namespace nis {

// Named view of a parameter tensor, used by the optimizer and checkpointing.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};

// Three weight layers (two ReLU hidden layers, identity output). A hidden
// width of 0 degenerates to a single affine layer with no activation.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::size_t in, std::size_t hidden, std::size_t out);

    // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero_last zeroes the
    // output layer so the net starts as the constant-zero map.
    void init(RngStream& rng, bool zero_last = false);

    struct Bound {
        ad::NodeId w1, b1, w2, b2, w3, b3;
    };

    // Registers the current parameter values as graph inputs.
    Bound bind(ad::Graph& g) const;

    // x: (B x in) matrix; returns (B x out). ones_col: (B x 1) constant ones
    // node used to broadcast biases across the batch.
    ad::NodeId apply(ad::Graph& g, const Bound& b, ad::NodeId x, ad::NodeId ones_col) const;

    Tensor forward(const Tensor& x) const; // rank-1 convenience path

    std::size_t param_count() const;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

    std::size_t in_dim() const { return in_; }
    std::size_t hidden_dim() const { return hidden_; }
    std::size_t out_dim() const { return out_; }

private:
    std::size_t in_ = 0, hidden_ = 0, out_ = 0;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_; // biases stored as (1 x n)
};

// RealNVP-style affine coupling step. One block transforms both halves: the
// second half conditioned on the first, then the first conditioned on the
// updated second. `swapped` exchanges the roles of the two halves so stacked
// blocks alternate conditioning order.
class CouplingBlock {
public:
    CouplingBlock() = default;
    CouplingBlock(std::size_t p, std::size_t hidden, bool swapped);

    void init(RngStream& rng);

    struct Bound {
        Mlp::Bound s1, t1, s2, t2;
    };

    Bound bind(ad::Graph& g) const;

    // Returns (y, logdet_total) where logdet_total is the sum over ALL rows
    // of the per-row log-det-Jacobian (for a single-row input it is the
    // per-sample log-det).
    std::pair<ad::NodeId, ad::NodeId> forward(ad::Graph& g, const Bound& b, ad::NodeId x,
                                              ad::NodeId ones_col) const;
    ad::NodeId inverse(ad::Graph& g, const Bound& b, ad::NodeId y, ad::NodeId ones_col) const;

    std::size_t param_count() const;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

    std::size_t dim() const { return p_; }
    std::size_t split() const { return k_; }
    bool swapped() const { return swapped_; }

private:
    // Column ranges of the conditioning half (a) and transformed-first half (b).
    void halves(std::size_t& a0, std::size_t& a1, std::size_t& b0, std::size_t& b1) const;
    ad::NodeId squash(ad::Graph& g, ad::NodeId raw) const; // smooth clamp to [-5, 5]

    std::size_t p_ = 0, k_ = 0;
    bool swapped_ = false;
    Mlp s1_, t1_, s2_, t2_;
};

// Stack of coupling blocks with alternating halves. Invertible for any
// parameter values; log|det J| is the sum of the applied scale-net outputs.
class Bijector {
public:
    Bijector() = default;
    Bijector(std::size_t p, std::size_t n_blocks = 3, std::size_t hidden = 64);

    void init(RngStream& rng);

    using Bound = std::vector<CouplingBlock::Bound>;

    Bound bind(ad::Graph& g) const;
    std::pair<ad::NodeId, ad::NodeId> forward(ad::Graph& g, const Bound& b, ad::NodeId x,
                                              ad::NodeId ones_col) const;
    ad::NodeId inverse(ad::Graph& g, const Bound& b, ad::NodeId y, ad::NodeId ones_col) const;

    // Plain-value paths for evaluation of a frozen model.
    std::pair<Tensor, double> forward(const Tensor& x) const;
    Tensor inverse(const Tensor& y) const;

    std::size_t param_count() const;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

    std::size_t dim() const { return p_; }
    std::size_t n_blocks() const { return blocks_.size(); }

private:
    std::size_t p_ = 0;
    std::vector<CouplingBlock> blocks_;
};

} // namespace nis
