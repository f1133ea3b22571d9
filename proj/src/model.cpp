#include "nis/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nis {

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (l_norm != 1 && l_norm != 2) throw ConfigError("l_norm must be 1 or 2");
    if (grad_clip <= 0.0) throw ConfigError("gradient clip must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("validation fraction must be in (0,1)");
    if (optimizer != "adam" && optimizer != "sgd")
        throw ConfigError("unknown optimizer: " + optimizer);
    if (lr_schedule != "constant" && lr_schedule != "cosine")
        throw ConfigError("unknown lr schedule: " + lr_schedule);
}

NisModel::NisModel(std::size_t p, std::size_t q, std::size_t n_blocks, std::size_t hidden,
                   std::size_t dyn_hidden)
    : p_(p), q_(q), hidden_(hidden), psi_(p, n_blocks, hidden), f_(q, dyn_hidden, q) {
    if (q == 0 || q > p) throw ConfigError("macro dimension q must satisfy 1 <= q <= p");
}

void NisModel::init(RngStream& rng) {
    RngStream s_psi = rng.derive("bijector");
    RngStream s_dyn = rng.derive("dynamics");
    psi_.init(s_psi);
    // Affine dynamics start at zero drift (macro step = identity) so the
    // encoder, not the drift term, absorbs the initial fitting pressure.
    f_.init(s_dyn, f_.hidden_dim() == 0);
}

Tensor NisModel::encode(const Tensor& x) const {
    Tensor full = encode_full(x);
    return Tensor::vector({full.data.begin(), full.data.begin() + static_cast<long>(q_)});
}

Tensor NisModel::encode_full(const Tensor& x) const {
    if (x.size() != p_) {
        throw ShapeError("encode: input " + x.shape_str() + " expected length " +
                         std::to_string(p_));
    }
    return psi_.forward(x).first;
}

Tensor NisModel::macro_step(const Tensor& y) const {
    if (y.size() != q_) {
        throw ShapeError("macro_step: input " + y.shape_str() + " expected length " +
                         std::to_string(q_));
    }
    Tensor drift = f_.forward(y);
    Tensor out({q_});
    for (std::size_t i = 0; i < q_; ++i) out[i] = y[i] + drift[i];
    return out;
}

Tensor NisModel::decode(const Tensor& y, const Tensor* z, RngStream* rng) const {
    if (y.size() != q_) {
        throw ShapeError("decode: input " + y.shape_str() + " expected length " +
                         std::to_string(q_));
    }
    Tensor full({p_});
    for (std::size_t i = 0; i < q_; ++i) full[i] = y[i];
    if (q_ < p_) {
        if (z != nullptr) {
            if (z->size() != p_ - q_) {
                throw ShapeError("decode: noise " + z->shape_str() + " expected length " +
                                 std::to_string(p_ - q_));
            }
            for (std::size_t i = q_; i < p_; ++i) full[i] = (*z)[i - q_];
        } else if (rng != nullptr) {
            for (std::size_t i = q_; i < p_; ++i) full[i] = rng->normal();
        } else {
            throw ConfigError("decode: q < p requires either explicit noise or an RNG");
        }
    } else if (z != nullptr && z->size() != 0) {
        throw ShapeError("decode: q = p admits no noise component");
    }
    return psi_.inverse(full);
}

Tensor NisModel::predict_micro(const Tensor& x, RngStream& rng) const {
    return decode(macro_step(encode(x)), nullptr, &rng);
}

NisModel::Trajectory NisModel::rollout(const Tensor& x0, std::size_t steps, bool zero_noise,
                                       RngStream& rng) const {
    if (steps < 1) throw ConfigError("rollout: steps must be >= 1");
    Trajectory traj;
    Tensor zeros({p_ - q_});
    Tensor y = encode(x0);
    for (std::size_t s = 0; s <= steps; ++s) {
        for (double v : y.data) {
            if (!std::isfinite(v) || std::abs(v) > 1e12) {
                throw NumericError("rollout diverged at step " + std::to_string(s));
            }
        }
        traj.macro.push_back(y);
        Tensor micro = q_ == p_ ? decode(y, nullptr, nullptr)
                       : zero_noise ? decode(y, &zeros, nullptr)
                                    : decode(y, nullptr, &rng);
        traj.micro.push_back(std::move(micro));
        if (s < steps) y = macro_step(y);
    }
    return traj;
}

std::size_t NisModel::param_count() const { return psi_.param_count() + f_.param_count(); }

std::vector<ParamRef> NisModel::params() {
    std::vector<ParamRef> out;
    psi_.collect_params("psi", out);
    f_.collect_params("dynamics", out);
    return out;
}

NisModel::Bound NisModel::bind(ad::Graph& g) const {
    Bound b;
    b.first = static_cast<ad::NodeId>(g.size());
    b.psi = psi_.bind(g);
    b.dyn = f_.bind(g);
    return b;
}

// ----------------------------------------------------------- training

namespace {

// Adam with bias correction; grads pre-clipped by global norm.
struct Adam {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.0; // decoupled (applied directly to weights, not via grads)
    std::vector<std::vector<double>> m, v;
    std::size_t t = 0;

    Adam(double lr_, const std::vector<ParamRef>& params) : lr(lr_) {
        for (const auto& p : params) {
            m.emplace_back(p.tensor->size(), 0.0);
            v.emplace_back(p.tensor->size(), 0.0);
        }
    }

    void step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& w = *params[i].tensor;
            const Tensor& gr = grads[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                double g = gr[j];
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
                w[j] -= lr * ((m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps) +
                              weight_decay * w[j]);
            }
        }
    }
};

void clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (double v : g.data) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        double f = max_norm / norm;
        for (Tensor& g : grads)
            for (double& v : g.data) v *= f;
    }
}

void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = rng.uniform_int(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

Tensor gather_rows(const std::vector<double>& flat, std::size_t p,
                   const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
    Tensor out({hi - lo, p});
    for (std::size_t r = lo; r < hi; ++r) {
        const double* src = flat.data() + idx[r] * p;
        std::copy(src, src + p, out.data.begin() + static_cast<long>((r - lo) * p));
    }
    return out;
}

// Builds the full predict-and-compare graph for one minibatch and returns the
// mean-loss node. X: (B x p) inputs, Xn: (B x p) targets, Z: fresh noise.
ad::NodeId build_loss(ad::Graph& g, const NisModel& model, const NisModel::Bound& bound,
                      ad::NodeId x, ad::NodeId xn, ad::NodeId ones, ad::NodeId z, int l_norm,
                      std::size_t batch) {
    std::size_t p = model.p(), q = model.q();
    auto [xp, ld] = model.bijector().forward(g, bound.psi, x, ones);
    (void)ld;
    ad::NodeId y = q == p ? xp : g.slice(xp, 0, q);
    ad::NodeId y1 = g.add(y, model.dynamics().apply(g, bound.dyn, y, ones));
    ad::NodeId full = q == p ? y1 : g.concat(y1, z);
    ad::NodeId xhat = model.bijector().inverse(g, bound.psi, full, ones);
    ad::NodeId diff = g.add(xhat, g.neg(xn));
    ad::NodeId total = l_norm == 2 ? g.sum(g.mul(diff, diff))
                                   : g.sum(g.add(g.relu(diff), g.relu(g.neg(diff))));
    return g.scale(total, 1.0 / static_cast<double>(batch));
}

Tensor draw_noise(std::size_t rows, std::size_t cols, RngStream& rng) {
    Tensor z({rows, cols});
    for (double& v : z.data) v = rng.normal();
    return z;
}

} // namespace

Checkpoint train(NisModel& model, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.p != model.p()) {
        throw ConfigError("dataset dimension " + std::to_string(ds.p) +
                          " does not match model p=" + std::to_string(model.p()));
    }
    if (ds.n < 2) throw ConfigError("dataset too small to split");
    model.set_l_norm(cfg.l_norm);

    RngStream root = RngStream::root(cfg.seed).derive("trainer");
    std::vector<std::size_t> idx(ds.n);
    std::iota(idx.begin(), idx.end(), 0);
    RngStream split_rng = root.derive("split");
    shuffle_indices(idx, split_rng);
    std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                     std::llround(cfg.val_fraction *
                                                                  static_cast<double>(ds.n))));
    if (n_val >= ds.n) n_val = ds.n - 1;
    std::vector<std::size_t> val_idx(idx.end() - static_cast<long>(n_val), idx.end());
    idx.resize(ds.n - n_val);

    std::vector<ParamRef> params = model.params();
    Adam adam(cfg.learning_rate, params);
    adam.weight_decay = cfg.weight_decay;
    RngStream noise_rng = root.derive("noise");
    std::size_t p = model.p(), q = model.q();

    std::vector<double> history;
    double best = std::numeric_limits<double>::infinity();
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_params;

    // Quick validation pass on frozen parameters (used by restore_best).
    auto quick_val = [&](RngStream rng) {
        double total = 0.0;
        for (std::size_t lo = 0; lo < val_idx.size(); lo += 256) {
            std::size_t hi = std::min(lo + 256, val_idx.size());
            std::size_t batch = hi - lo;
            ad::Graph g;
            NisModel::Bound bound = model.bind(g);
            ad::NodeId x = g.input(gather_rows(ds.x, p, val_idx, lo, hi));
            ad::NodeId xn = g.input(gather_rows(ds.xn, p, val_idx, lo, hi));
            ad::NodeId ones = g.input(Tensor::ones({batch, 1}));
            ad::NodeId z = q < p ? g.input(cfg.train_noise ? draw_noise(batch, p - q, rng)
                                                           : Tensor::zeros({batch, p - q}))
                                 : -1;
            ad::NodeId loss = build_loss(g, model, bound, x, xn, ones, z, cfg.l_norm, batch);
            total += g.value(loss)[0] * static_cast<double>(batch);
        }
        return total / static_cast<double>(val_idx.size());
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.lr_schedule == "cosine") {
            adam.lr = cfg.learning_rate * 0.5 *
                      (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                      static_cast<double>(cfg.epochs)));
        }
        RngStream ep_rng = root.derive("shuffle").derive(epoch);
        shuffle_indices(idx, ep_rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t lo = 0; lo < idx.size(); lo += cfg.batch_size) {
            std::size_t hi = std::min(lo + cfg.batch_size, idx.size());
            std::size_t batch = hi - lo;
            ad::Graph g;
            NisModel::Bound bound = model.bind(g);
            ad::NodeId x = g.input(gather_rows(ds.x, p, idx, lo, hi));
            ad::NodeId xn = g.input(gather_rows(ds.xn, p, idx, lo, hi));
            ad::NodeId ones = g.input(Tensor::ones({batch, 1}));
            ad::NodeId z = q < p ? g.input(cfg.train_noise ? draw_noise(batch, p - q, noise_rng)
                                                           : Tensor::zeros({batch, p - q}))
                                 : -1;
            ad::NodeId loss = build_loss(g, model, bound, x, xn, ones, z, cfg.l_norm, batch);
            double loss_val = g.value(loss)[0];
            if (!std::isfinite(loss_val)) {
                std::ostringstream msg;
                msg << "training aborted: non-finite loss at epoch " << epoch << " (lr="
                    << cfg.learning_rate << ", grad_clip=" << cfg.grad_clip
                    << "); consider lowering the learning rate";
                throw NumericError(msg.str());
            }
            g.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(params.size());
            for (std::size_t i = 0; i < params.size(); ++i)
                grads.push_back(g.grad(bound.first + static_cast<ad::NodeId>(i)));
            clip_global_norm(grads, cfg.grad_clip);
            adam.step(params, grads);
            epoch_loss += loss_val;
            ++n_batches;
        }
        best = std::min(best, epoch_loss / static_cast<double>(n_batches));
        history.push_back(best);

        if (cfg.restore_best) {
            double val = quick_val(root.derive("val-epoch").derive(epoch));
            if (val < best_val) {
                best_val = val;
                best_params.clear();
                for (const auto& pr : params) best_params.push_back(pr.tensor->data);
            }
        }
    }
    if (cfg.restore_best && !best_params.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor->data = best_params[i];
    }

    // Final losses on frozen parameters, fresh noise from a fixed stream.
    auto eval_loss = [&](const std::vector<std::size_t>& which, RngStream rng) {
        double total = 0.0;
        for (std::size_t lo = 0; lo < which.size(); lo += 256) {
            std::size_t hi = std::min(lo + 256, which.size());
            std::size_t batch = hi - lo;
            ad::Graph g;
            NisModel::Bound bound = model.bind(g);
            ad::NodeId x = g.input(gather_rows(ds.x, p, which, lo, hi));
            ad::NodeId xn = g.input(gather_rows(ds.xn, p, which, lo, hi));
            ad::NodeId ones = g.input(Tensor::ones({batch, 1}));
            ad::NodeId z = q < p ? g.input(cfg.train_noise ? draw_noise(batch, p - q, rng)
                                                           : Tensor::zeros({batch, p - q}))
                                 : -1;
            ad::NodeId loss = build_loss(g, model, bound, x, xn, ones, z, cfg.l_norm, batch);
            total += g.value(loss)[0] * static_cast<double>(batch);
        }
        return total / static_cast<double>(which.size());
    };

    // Macro residual variances on the validation split:
    // sigma_i^2 = mean of (macro_step(encode(x_t))_i - encode(x_{t+1})_i)^2.
    std::vector<double> sigma_sq(q, 0.0);
    for (std::size_t lo = 0; lo < val_idx.size(); lo += 256) {
        std::size_t hi = std::min(lo + 256, val_idx.size());
        std::size_t batch = hi - lo;
        ad::Graph g;
        NisModel::Bound bound = model.bind(g);
        ad::NodeId x = g.input(gather_rows(ds.x, p, val_idx, lo, hi));
        ad::NodeId xn = g.input(gather_rows(ds.xn, p, val_idx, lo, hi));
        ad::NodeId ones = g.input(Tensor::ones({batch, 1}));
        ad::NodeId y = g.slice(model.bijector().forward(g, bound.psi, x, ones).first, 0, q);
        ad::NodeId y1 = g.add(y, model.dynamics().apply(g, bound.dyn, y, ones));
        ad::NodeId yn = g.slice(model.bijector().forward(g, bound.psi, xn, ones).first, 0, q);
        const Tensor& pred = g.value(y1);
        const Tensor& target = g.value(yn);
        for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t i = 0; i < q; ++i) {
                double d = pred.at(r, i) - target.at(r, i);
                sigma_sq[i] += d * d;
            }
    }
    for (double& v : sigma_sq) v /= static_cast<double>(val_idx.size());

    Checkpoint ck;
    ck.model = model;
    ck.config = cfg;
    ck.final_train_loss = eval_loss(idx, root.derive("eval-train"));
    ck.final_val_loss = eval_loss(val_idx, root.derive("eval-val"));
    ck.sigma_sq = std::move(sigma_sq);
    ck.loss_history = std::move(history);
    return ck;
}

// ----------------------------------------------------------- baseline

std::size_t baseline_hidden_for_budget(std::size_t p, std::size_t budget) {
    // params(h) = h^2 + (2p + 2) h + p
    double b = static_cast<double>(2 * p + 2);
    double c = static_cast<double>(p) - static_cast<double>(budget);
    double h = (-b + std::sqrt(b * b - 4.0 * c)) / 2.0;
    std::size_t best = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(h)));
    auto count = [p](std::size_t hh) { return hh * hh + (2 * p + 2) * hh + p; };
    // llround can land one off after integer truncation of the quadratic root
    for (std::size_t cand : {best - 1, best, best + 1}) {
        if (cand >= 1 && std::llabs(static_cast<long long>(count(cand)) -
                                    static_cast<long long>(budget)) <
                             std::llabs(static_cast<long long>(count(best)) -
                                        static_cast<long long>(budget)))
            best = cand;
    }
    double rel = std::abs(static_cast<double>(count(best)) - static_cast<double>(budget)) /
                 static_cast<double>(budget);
    if (rel > 0.02) {
        throw ConfigError("cannot match parameter budget " + std::to_string(budget) +
                          " within 2% (closest " + std::to_string(count(best)) + ")");
    }
    return best;
}

Baseline train_baseline(const Dataset& ds, const TrainConfig& cfg, std::size_t param_budget) {
    cfg.validate();
    std::size_t hidden = baseline_hidden_for_budget(ds.p, param_budget);
    Baseline base;
    base.net = Mlp(ds.p, hidden, ds.p);
    base.l_norm = cfg.l_norm;
    RngStream root = RngStream::root(cfg.seed).derive("baseline");
    RngStream init_rng = root.derive("init");
    base.net.init(init_rng);

    std::vector<std::size_t> idx(ds.n);
    std::iota(idx.begin(), idx.end(), 0);
    RngStream split_rng = root.derive("split");
    shuffle_indices(idx, split_rng);
    std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                     std::llround(cfg.val_fraction *
                                                                  static_cast<double>(ds.n))));
    if (n_val >= ds.n) n_val = ds.n - 1;
    std::vector<std::size_t> val_idx(idx.end() - static_cast<long>(n_val), idx.end());
    idx.resize(ds.n - n_val);

    std::vector<ParamRef> params;
    base.net.collect_params("baseline", params);
    Adam adam(cfg.learning_rate, params);
    adam.weight_decay = cfg.weight_decay;

    auto run_loss = [&](const std::vector<std::size_t>& which, std::size_t lo, std::size_t hi,
                        bool update) {
        std::size_t batch = hi - lo;
        ad::Graph g;
        ad::NodeId first = static_cast<ad::NodeId>(g.size());
        Mlp::Bound bound = base.net.bind(g);
        ad::NodeId x = g.input(gather_rows(ds.x, ds.p, which, lo, hi));
        ad::NodeId xn = g.input(gather_rows(ds.xn, ds.p, which, lo, hi));
        ad::NodeId ones = g.input(Tensor::ones({batch, 1}));
        ad::NodeId diff = g.add(base.net.apply(g, bound, x, ones), g.neg(xn));
        ad::NodeId total = cfg.l_norm == 2 ? g.sum(g.mul(diff, diff))
                                           : g.sum(g.add(g.relu(diff), g.relu(g.neg(diff))));
        ad::NodeId loss = g.scale(total, 1.0 / static_cast<double>(batch));
        double loss_val = g.value(loss)[0];
        if (!std::isfinite(loss_val)) throw NumericError("baseline training: non-finite loss");
        if (update) {
            g.backward(loss);
            std::vector<Tensor> grads;
            for (std::size_t i = 0; i < params.size(); ++i)
                grads.push_back(g.grad(first + static_cast<ad::NodeId>(i)));
            clip_global_norm(grads, cfg.grad_clip);
            adam.step(params, grads);
        }
        return loss_val;
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream ep_rng = root.derive("shuffle").derive(epoch);
        shuffle_indices(idx, ep_rng);
        for (std::size_t lo = 0; lo < idx.size(); lo += cfg.batch_size)
            run_loss(idx, lo, std::min(lo + cfg.batch_size, idx.size()), true);
    }

    double total = 0.0;
    for (std::size_t lo = 0; lo < idx.size(); lo += 256) {
        std::size_t hi = std::min(lo + 256, idx.size());
        total += run_loss(idx, lo, hi, false) * static_cast<double>(hi - lo);
    }
    base.final_train_loss = total / static_cast<double>(idx.size());
    total = 0.0;
    for (std::size_t lo = 0; lo < val_idx.size(); lo += 256) {
        std::size_t hi = std::min(lo + 256, val_idx.size());
        total += run_loss(val_idx, lo, hi, false) * static_cast<double>(hi - lo);
    }
    base.final_val_loss = total / static_cast<double>(val_idx.size());
    return base;
}

} // namespace nis
