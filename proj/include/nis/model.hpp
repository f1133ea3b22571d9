// The Neural Information Squeezer: encoder (bijector + projection), macro
// dynamics step, decoder with Gaussian noise injection, training loop, and a
// parameter-matched baseline predictor.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nis/dataset.hpp"
#include "nis/nets.hpp"
#include "nis/rng.hpp"

namespace nis {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 100;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    std::uint64_t seed = 0;
    int l_norm = 2; // 1 or 2
    double grad_clip = 1.0;
    double val_fraction = 0.1;
    std::string lr_schedule = "constant"; // "constant" | "cosine" (decay to 0)
    bool restore_best = false; // keep the per-epoch best-validation weights
    // When true the loss draws fresh z ~ N(0, I) per sample (stochastic
    // objective); when false, z = 0 (deterministic objective). Both are valid
    // reconstruction objectives; the deterministic one avoids the degenerate
    // optimum where the encoder inflates its scale until injected noise is
    // negligible in micro coordinates.
    bool train_noise = true;
    // Decoupled L2 weight decay applied by the optimizer (0 disables it).
    double weight_decay = 0.0;

    void validate() const;
};

class NisModel {
public:
    NisModel() = default;
    // dyn_hidden sets the hidden width of the dynamics net f; 0 makes the
    // macro dynamics affine, which removes the capacity to absorb encoder
    // scatter and forces equivalent micro states onto shared macro codes.
    NisModel(std::size_t p, std::size_t q, std::size_t n_blocks = 3, std::size_t hidden = 64,
             std::size_t dyn_hidden = 64);

    void init(RngStream& rng);

    std::size_t p() const { return p_; }
    std::size_t q() const { return q_; }

    // y_t = first q components of psi(x_t).
    Tensor encode(const Tensor& x) const;
    // Full bijector output, used when the dropped coordinates are needed.
    Tensor encode_full(const Tensor& x) const;
    // y_{t+1} = y_t + f(y_t); deterministic (noise enters only through EI).
    Tensor macro_step(const Tensor& y) const;
    // x_hat = psi^{-1}(y ++ z). z defaults to a fresh standard-normal draw.
    Tensor decode(const Tensor& y, const Tensor* z, RngStream* rng) const;
    Tensor predict_micro(const Tensor& x, RngStream& rng) const;

    struct Trajectory {
        std::vector<Tensor> macro; // steps + 1 entries, starting at y_0
        std::vector<Tensor> micro; // decoded states, same length
    };
    // Pure macro rollout: iterates macro_step without re-encoding decoded
    // states. zero_noise decodes with z = 0 for deterministic trajectories.
    Trajectory rollout(const Tensor& x0, std::size_t steps, bool zero_noise,
                       RngStream& rng) const;

    std::size_t param_count() const;
    std::vector<ParamRef> params();

    const Bijector& bijector() const { return psi_; }
    const Mlp& dynamics() const { return f_; }
    int l_norm() const { return l_norm_; }
    void set_l_norm(int l) { l_norm_ = l; }
    std::size_t hidden() const { return hidden_; }
    std::size_t dyn_hidden() const { return f_.hidden_dim(); }
    std::size_t n_blocks() const { return psi_.n_blocks(); }

    struct Bound {
        Bijector::Bound psi;
        Mlp::Bound dyn;
        ad::NodeId first; // id of the first bound parameter node
    };
    Bound bind(ad::Graph& g) const;

private:
    std::size_t p_ = 0, q_ = 0, hidden_ = 64;
    Bijector psi_;
    Mlp f_;
    int l_norm_ = 2;
};

struct Checkpoint {
    int schema_version = 1;
    NisModel model;
    TrainConfig config;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    std::vector<double> sigma_sq; // per-dimension macro residual variances
    std::vector<double> loss_history; // best-so-far train loss per epoch
};

// Mini-batch gradient descent on the micro-prediction objective. sigma_sq is
// estimated on the validation split after training.
Checkpoint train(NisModel& model, const Dataset& ds, const TrainConfig& cfg);

// Direct x_t -> x_{t+1} MLP predictor with a parameter count matched to
// `param_budget` within 2%.
struct Baseline {
    Mlp net;
    int l_norm = 2;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
};
Baseline train_baseline(const Dataset& ds, const TrainConfig& cfg, std::size_t param_budget);

// Hidden width whose 3-layer MLP parameter count best matches the budget.
std::size_t baseline_hidden_for_budget(std::size_t p, std::size_t budget);

// Checkpoint file: JSON document with named nested numeric arrays; numbers
// round-trip bit-exactly (shortest round-trip double formatting).
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace nis
