// Effective information of a Gaussian-output map: Monte-Carlo evaluation of
// the log-det-Jacobian term over a uniform hyper-cube, Eff normalization,
// the q line search, and the causal-emergence verdict.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nis/graph.hpp"
#include "nis/model.hpp"

namespace nis {

struct EiConfig {
    double L = 100.0;          // hyper-cube half-width
    std::size_t n_samples = 1000;
    std::uint64_t seed = 0;
    double det_clamp = 1e-12;  // |det J| floor inside the log
    double sigma_floor = 1e-6; // per-dimension sigma floor

    void validate() const;
};

struct EiReport {
    std::size_t q = 0;
    double ei = 0.0;  // nats
    double eff = 0.0; // ei / (q ln 2L)
    std::vector<double> sigma;
    double L = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    double mc_stderr = 0.0;          // standard error of the E[ln|det J|] term
    std::size_t clamped_samples = 0; // samples where |det J| hit det_clamp
    bool degenerate = false;         // det J = 0 at every sample (EI = 0 branch)
};

// Differentiable map builder: given a graph and a (1 x q) input node, returns
// the (1 x q) output node. Jacobians come from reverse-mode passes.
using DiffMap = std::function<ad::NodeId(ad::Graph&, ad::NodeId)>;

// EI of y ~ N(mu(x), diag(sigma^2)) with x ~ U([-L,L]^q).
EiReport ei_gaussian(const DiffMap& mu, const std::vector<double>& sigma, const EiConfig& cfg);

// EI of the learned macro transition mu(y) = y + f(y), with sigma taken from
// the checkpoint's validation residuals.
EiReport ei_of_macro(const Checkpoint& ck, const EiConfig& cfg);

struct SweepEntry {
    std::size_t q = 0;
    bool failed = false;
    std::string error;
    EiReport report;
};

struct SweepResult {
    std::vector<SweepEntry> entries; // ascending q; always includes q = p
    std::size_t q_star = 0;
    bool emergent = false;
    bool low_signal = false; // every |Eff| within Monte-Carlo noise of zero
    std::vector<std::string> warnings;
};

// Trains one model per q (1..q_cap, plus q = p as the micro reference),
// computes an EiReport for each, and judges causal emergence. Per-q training
// seeds derive from train_cfg.seed; ties in argmax Eff break toward smaller q.
// dyn_hidden is forwarded to NisModel (0 = affine macro dynamics).
SweepResult sweep_q(const Dataset& ds, const TrainConfig& train_cfg, const EiConfig& ei_cfg,
                    std::size_t q_cap = 0, std::size_t dyn_hidden = 64);

// Single-linkage clustering of macro encodings with gap threshold
// 10 x median nearest-neighbor distance.
struct ClusterResult {
    std::vector<std::size_t> labels; // cluster id per input state
    std::size_t count = 0;
};
ClusterResult cluster_macro_codes(const NisModel& model, const std::vector<Tensor>& micro_states);

void save_sweep_csv(const SweepResult& res, const std::string& path);
void save_sweep_json(const SweepResult& res, const std::string& path);

} // namespace nis
