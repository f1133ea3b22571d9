#include "nis/ei.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace nis {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;

double det_of(const Tensor& jac) {
    std::size_t n = jac.shape[0];
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j)) = jac.at(i, j);
    return m.determinant();
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void EiConfig::validate() const {
    if (L <= 0.0) throw ConfigError("EI hyper-cube half-width L must be positive");
    if (n_samples < 1) throw ConfigError("EI needs at least one Monte-Carlo sample");
    if (det_clamp <= 0.0 || sigma_floor <= 0.0)
        throw ConfigError("EI clamps must be positive");
}

EiReport ei_gaussian(const DiffMap& mu, const std::vector<double>& sigma, const EiConfig& cfg) {
    cfg.validate();
    std::size_t q = sigma.size();
    if (q == 0) throw ConfigError("ei_gaussian: empty sigma vector");

    RngStream root = RngStream::root(cfg.seed).derive("ei");
    std::vector<double> logdets(cfg.n_samples);
    std::size_t clamped = 0;
    for (std::size_t k = 0; k < cfg.n_samples; ++k) {
        RngStream s = root.derive(k);
        Tensor x({1, q});
        for (double& v : x.data) v = s.uniform(-cfg.L, cfg.L);
        Tensor jac = ad::jacobian(mu, x);
        if (!jac.all_finite()) {
            throw NumericError("ei_gaussian: non-finite map output at sample " +
                               std::to_string(k));
        }
        double d = std::abs(det_of(jac));
        if (d < cfg.det_clamp) {
            d = cfg.det_clamp;
            ++clamped;
        }
        logdets[k] = std::log(d);
    }

    EiReport rep;
    rep.q = q;
    rep.sigma = sigma;
    rep.L = cfg.L;
    rep.n_samples = cfg.n_samples;
    rep.seed = cfg.seed;
    rep.clamped_samples = clamped;

    // Singular Jacobian at every sample: the map carries no information.
    if (clamped == cfg.n_samples) {
        rep.degenerate = true;
        rep.ei = 0.0;
        rep.eff = 0.0;
        return rep;
    }

    double mean = std::accumulate(logdets.begin(), logdets.end(), 0.0) /
                  static_cast<double>(cfg.n_samples);
    double var = 0.0;
    for (double v : logdets) var += (v - mean) * (v - mean);
    if (cfg.n_samples > 1) var /= static_cast<double>(cfg.n_samples - 1);
    rep.mc_stderr = std::sqrt(var / static_cast<double>(cfg.n_samples));

    double ln_det_sigma = 0.0;
    for (double s : sigma) {
        double sf = std::max(s, cfg.sigma_floor);
        ln_det_sigma += 2.0 * std::log(sf);
    }
    double qd = static_cast<double>(q);
    rep.ei = -(1.0 + qd * kLn2Pi + ln_det_sigma) / 2.0 + qd * std::log(2.0 * cfg.L) + mean;
    rep.eff = rep.ei / (qd * std::log(2.0 * cfg.L));
    return rep;
}

EiReport ei_of_macro(const Checkpoint& ck, const EiConfig& cfg) {
    const NisModel& model = ck.model;
    std::size_t q = model.q();
    if (ck.sigma_sq.size() != q) {
        throw ConfigError("checkpoint carries no per-dimension sigma for q=" +
                          std::to_string(q));
    }
    std::vector<double> sigma(q);
    for (std::size_t i = 0; i < q; ++i)
        sigma[i] = std::max(std::sqrt(std::max(ck.sigma_sq[i], 0.0)), cfg.sigma_floor);

    DiffMap mu = [&model](ad::Graph& g, ad::NodeId y) {
        ad::NodeId ones = g.input(Tensor::ones({1, 1}));
        Mlp::Bound bound = model.dynamics().bind(g);
        return g.add(y, model.dynamics().apply(g, bound, y, ones));
    };
    return ei_gaussian(mu, sigma, cfg);
}

SweepResult sweep_q(const Dataset& ds, const TrainConfig& train_cfg, const EiConfig& ei_cfg,
                    std::size_t q_cap, std::size_t dyn_hidden) {
    if (ds.p < 2) throw ConfigError("sweep needs dataset dimension p >= 2");
    std::size_t p = ds.p;
    std::size_t cap = q_cap == 0 ? p : std::min(q_cap, p);

    std::vector<std::size_t> qs;
    for (std::size_t q = 1; q <= cap; ++q) qs.push_back(q);
    if (qs.back() != p) qs.push_back(p); // micro-scale reference model

    SweepResult res;
    for (std::size_t q : qs) {
        SweepEntry entry;
        entry.q = q;
        try {
            NisModel model(p, q, 3, 64, dyn_hidden);
            TrainConfig cfg = train_cfg;
            cfg.seed = RngStream::root(train_cfg.seed).derive("sweep-q").derive(q).next_u64();
            RngStream init_rng = RngStream::root(cfg.seed).derive("init");
            model.init(init_rng);
            Checkpoint ck = train(model, ds, cfg);
            EiConfig ecfg = ei_cfg;
            ecfg.seed = RngStream::root(ei_cfg.seed).derive("sweep-ei").derive(q).next_u64();
            entry.report = ei_of_macro(ck, ecfg);
        } catch (const std::exception& ex) {
            entry.failed = true;
            entry.error = ex.what();
            res.warnings.push_back("q=" + std::to_string(q) + " failed: " + ex.what());
        }
        res.entries.push_back(std::move(entry));
    }

    const SweepEntry* best = nullptr;
    const SweepEntry* micro = nullptr;
    for (const auto& e : res.entries) {
        if (e.failed) continue;
        if (e.q == p) micro = &e;
        if (best == nullptr || e.report.eff > best->report.eff) best = &e; // ties keep smaller q
    }
    if (best == nullptr) {
        res.warnings.push_back("all q failed; no verdict");
        return res;
    }
    res.q_star = best->q;
    if (micro == nullptr) {
        res.warnings.push_back("q=p model failed; causal-emergence verdict unavailable");
    } else {
        res.emergent = best->report.eff > micro->report.eff;
    }

    // Low-signal flag: every |Eff| indistinguishable from zero at 3 MC sigmas.
    res.low_signal = true;
    for (const auto& e : res.entries) {
        if (e.failed) continue;
        double eff_se = e.report.mc_stderr /
                        (static_cast<double>(e.report.q) * std::log(2.0 * e.report.L));
        if (std::abs(e.report.eff) > 3.0 * eff_se) {
            res.low_signal = false;
            break;
        }
    }
    return res;
}

ClusterResult cluster_macro_codes(const NisModel& model,
                                  const std::vector<Tensor>& micro_states) {
    ClusterResult out;
    std::size_t n = micro_states.size();
    out.labels.assign(n, 0);
    if (n < 2) {
        out.count = n;
        return out;
    }
    std::vector<Tensor> codes;
    codes.reserve(n);
    for (const auto& s : micro_states) codes.push_back(model.encode(s));

    auto dist = [&](std::size_t i, std::size_t j) {
        double sq = 0.0;
        for (std::size_t d = 0; d < codes[i].size(); ++d) {
            double delta = codes[i][d] - codes[j][d];
            sq += delta * delta;
        }
        return std::sqrt(sq);
    };

    std::vector<double> nn(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) nn[i] = std::min(nn[i], dist(i, j));
    std::vector<double> sorted = nn;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[n / 2];
    double threshold = 10.0 * median;

    // Single linkage = connected components under dist <= threshold.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (dist(i, j) <= threshold) parent[find(i)] = find(j);

    std::vector<std::size_t> remap(n, SIZE_MAX);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = find(i);
        if (remap[r] == SIZE_MAX) remap[r] = next++;
        out.labels[i] = remap[r];
    }
    out.count = next;
    return out;
}

void save_sweep_csv(const SweepResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "q,EI,Eff,stderr,sigma\n";
    for (const auto& e : res.entries) {
        if (e.failed) {
            out << e.q << ",failed,failed,failed,\n";
            continue;
        }
        out << e.q << "," << fmt17(e.report.ei) << "," << fmt17(e.report.eff) << ","
            << fmt17(e.report.mc_stderr) << ",";
        for (std::size_t i = 0; i < e.report.sigma.size(); ++i)
            out << (i ? ";" : "") << fmt17(e.report.sigma[i]);
        out << "\n";
    }
    out << "emergent: " << (res.emergent ? "true" : "false") << " q_star: " << res.q_star
        << (res.low_signal ? " low_signal" : "") << "\n";
    if (!out) throw IoError("write failed: " + path);
}

void save_sweep_json(const SweepResult& res, const std::string& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : res.entries) {
        nlohmann::json je{{"q", e.q}, {"failed", e.failed}};
        if (e.failed) {
            je["error"] = e.error;
        } else {
            je["ei"] = e.report.ei;
            je["eff"] = e.report.eff;
            je["stderr"] = e.report.mc_stderr;
            je["sigma"] = e.report.sigma;
            je["L"] = e.report.L;
            je["n_samples"] = e.report.n_samples;
            je["seed"] = e.report.seed;
            je["clamped_samples"] = e.report.clamped_samples;
            je["degenerate"] = e.report.degenerate;
        }
        entries.push_back(std::move(je));
    }
    nlohmann::json j{{"entries", std::move(entries)},
                     {"q_star", res.q_star},
                     {"emergent", res.emergent},
                     {"low_signal", res.low_signal},
                     {"warnings", res.warnings}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

} // namespace nis
