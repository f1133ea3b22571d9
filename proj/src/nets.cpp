#include "nis/nets.hpp"

#include <cmath>

namespace nis {

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out)
    : in_(in), hidden_(hidden), out_(out) {
    if (hidden == 0) {
        // Affine mode: a single linear layer, no hidden activations.
        w1_ = Tensor({in, out});
        b1_ = Tensor({1, out});
    } else {
        w1_ = Tensor({in, hidden});
        b1_ = Tensor({1, hidden});
        w2_ = Tensor({hidden, hidden});
        b2_ = Tensor({1, hidden});
        w3_ = Tensor({hidden, out});
        b3_ = Tensor({1, out});
    }
}

void Mlp::init(RngStream& rng, bool zero_last) {
    auto fill = [&rng](Tensor& t, std::size_t fan_in) {
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : t.data) v = rng.uniform(-bound, bound);
    };
    if (hidden_ == 0) {
        if (zero_last) {
            for (double& v : w1_.data) v = 0.0;
            for (double& v : b1_.data) v = 0.0;
        } else {
            fill(w1_, in_);
            fill(b1_, in_);
        }
        return;
    }
    fill(w1_, in_);
    fill(b1_, in_);
    fill(w2_, hidden_);
    fill(b2_, hidden_);
    if (zero_last) {
        for (double& v : w3_.data) v = 0.0;
        for (double& v : b3_.data) v = 0.0;
    } else {
        fill(w3_, hidden_);
        fill(b3_, hidden_);
    }
}

Mlp::Bound Mlp::bind(ad::Graph& g) const {
    if (hidden_ == 0) return Bound{g.input(w1_, true), g.input(b1_, true), -1, -1, -1, -1};
    return Bound{g.input(w1_, true), g.input(b1_, true), g.input(w2_, true),
                 g.input(b2_, true), g.input(w3_, true), g.input(b3_, true)};
}

ad::NodeId Mlp::apply(ad::Graph& g, const Bound& b, ad::NodeId x, ad::NodeId ones_col) const {
    if (hidden_ == 0) return g.add(g.matmul(x, b.w1), g.matmul(ones_col, b.b1));
    ad::NodeId h1 = g.relu(g.add(g.matmul(x, b.w1), g.matmul(ones_col, b.b1)));
    ad::NodeId h2 = g.relu(g.add(g.matmul(h1, b.w2), g.matmul(ones_col, b.b2)));
    return g.add(g.matmul(h2, b.w3), g.matmul(ones_col, b.b3));
}

Tensor Mlp::forward(const Tensor& x) const {
    if (x.size() != in_) {
        throw ShapeError("mlp: input " + x.shape_str() + " expected length " +
                         std::to_string(in_));
    }
    auto layer = [](const Tensor& v, const Tensor& w, const Tensor& b, bool relu) {
        std::size_t n = w.shape[0], m = w.shape[1];
        Tensor out({m});
        for (std::size_t j = 0; j < m; ++j) {
            double s = b[j];
            for (std::size_t i = 0; i < n; ++i) s += v[i] * w.at(i, j);
            out[j] = relu && s < 0.0 ? 0.0 : s;
        }
        return out;
    };
    if (hidden_ == 0) return layer(x, w1_, b1_, false);
    Tensor h = layer(x, w1_, b1_, true);
    h = layer(h, w2_, b2_, true);
    return layer(h, w3_, b3_, false);
}

std::size_t Mlp::param_count() const {
    if (hidden_ == 0) return in_ * out_ + out_;
    return in_ * hidden_ + hidden_ + hidden_ * hidden_ + hidden_ + hidden_ * out_ + out_;
}

void Mlp::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w1", &w1_});
    out.push_back({prefix + ".b1", &b1_});
    if (hidden_ == 0) return;
    out.push_back({prefix + ".w2", &w2_});
    out.push_back({prefix + ".b2", &b2_});
    out.push_back({prefix + ".w3", &w3_});
    out.push_back({prefix + ".b3", &b3_});
}

// ------------------------------------------------------- CouplingBlock

CouplingBlock::CouplingBlock(std::size_t p, std::size_t hidden, bool swapped)
    : p_(p), k_((p + 1) / 2), swapped_(swapped) {
    if (p < 2) throw ConfigError("coupling block needs dimension >= 2");
    std::size_t da = swapped_ ? p_ - k_ : k_;
    std::size_t db = p_ - da;
    s1_ = Mlp(da, hidden, db);
    t1_ = Mlp(da, hidden, db);
    s2_ = Mlp(db, hidden, da);
    t2_ = Mlp(db, hidden, da);
}

void CouplingBlock::init(RngStream& rng) {
    // Zeroed final layers make the block start exactly at the identity.
    s1_.init(rng, true);
    t1_.init(rng, true);
    s2_.init(rng, true);
    t2_.init(rng, true);
}

void CouplingBlock::halves(std::size_t& a0, std::size_t& a1, std::size_t& b0,
                           std::size_t& b1) const {
    if (!swapped_) {
        a0 = 0, a1 = k_, b0 = k_, b1 = p_;
    } else {
        a0 = k_, a1 = p_, b0 = 0, b1 = k_;
    }
}

ad::NodeId CouplingBlock::squash(ad::Graph& g, ad::NodeId raw) const {
    return g.scale(g.tanh(g.scale(raw, 0.2)), 5.0);
}

CouplingBlock::Bound CouplingBlock::bind(ad::Graph& g) const {
    return Bound{s1_.bind(g), t1_.bind(g), s2_.bind(g), t2_.bind(g)};
}

std::pair<ad::NodeId, ad::NodeId> CouplingBlock::forward(ad::Graph& g, const Bound& b,
                                                         ad::NodeId x,
                                                         ad::NodeId ones_col) const {
    std::size_t a0, a1, b0, b1;
    halves(a0, a1, b0, b1);
    ad::NodeId ha = g.slice(x, a0, a1);
    ad::NodeId hb = g.slice(x, b0, b1);
    ad::NodeId s1o = squash(g, s1_.apply(g, b.s1, ha, ones_col));
    ad::NodeId hb2 = g.add(g.mul(hb, g.exp(s1o)), t1_.apply(g, b.t1, ha, ones_col));
    ad::NodeId s2o = squash(g, s2_.apply(g, b.s2, hb2, ones_col));
    ad::NodeId ha2 = g.add(g.mul(ha, g.exp(s2o)), t2_.apply(g, b.t2, hb2, ones_col));
    ad::NodeId y = swapped_ ? g.concat(hb2, ha2) : g.concat(ha2, hb2);
    ad::NodeId logdet = g.add(g.sum(s1o), g.sum(s2o));
    return {y, logdet};
}

ad::NodeId CouplingBlock::inverse(ad::Graph& g, const Bound& b, ad::NodeId y,
                                  ad::NodeId ones_col) const {
    std::size_t a0, a1, b0, b1;
    halves(a0, a1, b0, b1);
    ad::NodeId ha2 = g.slice(y, a0, a1);
    ad::NodeId hb2 = g.slice(y, b0, b1);
    ad::NodeId s2o = squash(g, s2_.apply(g, b.s2, hb2, ones_col));
    ad::NodeId ha =
        g.mul(g.add(ha2, g.neg(t2_.apply(g, b.t2, hb2, ones_col))), g.exp(g.neg(s2o)));
    ad::NodeId s1o = squash(g, s1_.apply(g, b.s1, ha, ones_col));
    ad::NodeId hb =
        g.mul(g.add(hb2, g.neg(t1_.apply(g, b.t1, ha, ones_col))), g.exp(g.neg(s1o)));
    return swapped_ ? g.concat(hb, ha) : g.concat(ha, hb);
}

std::size_t CouplingBlock::param_count() const {
    return s1_.param_count() + t1_.param_count() + s2_.param_count() + t2_.param_count();
}

void CouplingBlock::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    s1_.collect_params(prefix + ".s1", out);
    t1_.collect_params(prefix + ".t1", out);
    s2_.collect_params(prefix + ".s2", out);
    t2_.collect_params(prefix + ".t2", out);
}

// ------------------------------------------------------------ Bijector

Bijector::Bijector(std::size_t p, std::size_t n_blocks, std::size_t hidden) : p_(p) {
    if (p < 2) throw ConfigError("bijector needs dimension >= 2, got " + std::to_string(p));
    blocks_.reserve(n_blocks);
    for (std::size_t i = 0; i < n_blocks; ++i) blocks_.emplace_back(p, hidden, i % 2 == 1);
}

void Bijector::init(RngStream& rng) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        RngStream s = rng.derive(i);
        blocks_[i].init(s);
    }
}

Bijector::Bound Bijector::bind(ad::Graph& g) const {
    Bound b;
    b.reserve(blocks_.size());
    for (const auto& blk : blocks_) b.push_back(blk.bind(g));
    return b;
}

std::pair<ad::NodeId, ad::NodeId> Bijector::forward(ad::Graph& g, const Bound& b, ad::NodeId x,
                                                    ad::NodeId ones_col) const {
    ad::NodeId cur = x;
    ad::NodeId logdet = -1;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto [y, ld] = blocks_[i].forward(g, b[i], cur, ones_col);
        cur = y;
        logdet = i == 0 ? ld : g.add(logdet, ld);
    }
    return {cur, logdet};
}

ad::NodeId Bijector::inverse(ad::Graph& g, const Bound& b, ad::NodeId y,
                             ad::NodeId ones_col) const {
    ad::NodeId cur = y;
    for (std::size_t i = blocks_.size(); i-- > 0;) cur = blocks_[i].inverse(g, b[i], cur, ones_col);
    return cur;
}

std::pair<Tensor, double> Bijector::forward(const Tensor& x) const {
    if (x.size() != p_) {
        throw ShapeError("bijector forward: input " + x.shape_str() + " expected length " +
                         std::to_string(p_));
    }
    ad::Graph g;
    ad::NodeId in = g.input(Tensor({1, p_}, x.data));
    ad::NodeId ones = g.input(Tensor::ones({1, 1}));
    Bound b = bind(g);
    auto [y, ld] = forward(g, b, in, ones);
    Tensor out = Tensor::vector(g.value(y).data);
    if (!out.all_finite()) throw NumericError("bijector forward produced non-finite output");
    return {out, g.value(ld)[0]};
}

Tensor Bijector::inverse(const Tensor& y) const {
    if (y.size() != p_) {
        throw ShapeError("bijector inverse: input " + y.shape_str() + " expected length " +
                         std::to_string(p_));
    }
    ad::Graph g;
    ad::NodeId in = g.input(Tensor({1, p_}, y.data));
    ad::NodeId ones = g.input(Tensor::ones({1, 1}));
    Bound b = bind(g);
    ad::NodeId x = inverse(g, b, in, ones);
    Tensor out = Tensor::vector(g.value(x).data);
    if (!out.all_finite()) throw NumericError("bijector inverse produced non-finite output");
    return out;
}

std::size_t Bijector::param_count() const {
    std::size_t n = 0;
    for (const auto& blk : blocks_) n += blk.param_count();
    return n;
}

void Bijector::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].collect_params(prefix + ".block" + std::to_string(i), out);
}

} // namespace nis
