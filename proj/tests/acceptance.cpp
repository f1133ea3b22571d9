// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.
// Tolerances and budgets are pinned here, not configurable.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nis/datagen.hpp"
#include "nis/ei.hpp"
#include "nis/infometrics.hpp"
#include "nis/model.hpp"

using namespace nis;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] %2d. %s — %s\n", pass ? "PASS" : "FAIL", idx, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

constexpr double kLn2Pi = 1.8378770664093453;

// Exact EI for mu(X) = XA, unit sigma, half-width L (constant Jacobian).
double affine_exact_ei(const Eigen::MatrixXd& a, double L) {
    double q = static_cast<double>(a.rows());
    return -(1.0 + q * kLn2Pi) / 2.0 + q * std::log(2.0 * L) +
           std::log(std::abs(a.determinant()));
}

// --- 1. EI closed-form agreement --------------------------------------------
void criterion1() {
    auto t0 = clock_type::now();
    RngStream rng = RngStream::root(1001).derive("c1");
    int pass_count = 0;
    const int reps = 100;
    for (int rep = 0; rep < reps; ++rep) {
        std::size_t q = 1 + rng.uniform_int(3); // q in {1,2,3}
        // Well-conditioned A: diagonally dominant random matrix.
        Eigen::MatrixXd a(q, q);
        Tensor at({q, q});
        for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < q; ++j) {
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (i == j ? 2.0 : 0.0) + rng.uniform(-0.5, 0.5);
                at.at(i, j) = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        EiConfig cfg;
        cfg.n_samples = 1000;
        cfg.seed = rng.next_u64();
        EiReport rep_ei = ei_gaussian(
            [&](ad::Graph& g, ad::NodeId x) { return g.matmul(x, g.input(at)); },
            std::vector<double>(q, 1.0), cfg);
        double exact = affine_exact_ei(a, cfg.L);
        // Constant Jacobian: the MC term has zero variance, so "within 3
        // standard errors" degenerates to near-exact; allow 1e-9 slack for
        // accumulated rounding when mc_stderr is 0.
        double band = 3.0 * rep_ei.mc_stderr + 1e-9;
        if (std::abs(rep_ei.ei - exact) <= band) ++pass_count;
    }
    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d/%d reps within 3 stderr (need >= 95), %.2fs (< 10s)",
                  pass_count, reps, dt);
    report(1, "EI closed-form agreement (affine maps, q in {1,2,3})",
           pass_count >= 95 && dt < 10.0, buf);
}

// --- 2. Degenerate branch ----------------------------------------------------
void criterion2() {
    EiConfig cfg;
    cfg.n_samples = 100;
    cfg.seed = 2;
    EiReport rep = ei_gaussian(
        [](ad::Graph& g, ad::NodeId x) { return g.scale(x, 0.0); }, {1.0, 1.0}, cfg);
    char buf[120];
    std::snprintf(buf, sizeof buf, "constant map: EI = %g, degenerate flag = %d", rep.ei,
                  static_cast<int>(rep.degenerate));
    report(2, "Degenerate branch returns EI = 0 exactly", rep.ei == 0.0 && rep.degenerate, buf);
}

// --- 3. Bijector guarantees --------------------------------------------------
void criterion3() {
    auto t0 = clock_type::now();
    RngStream rng = RngStream::root(3003).derive("c3");
    double worst_rt = 0.0, worst_ld = 0.0;
    const std::size_t dims[] = {2, 4, 8, 16};
    const int draws = 1000;
    for (int d = 0; d < draws; ++d) {
        std::size_t p = dims[static_cast<std::size_t>(d) % 4];
        Bijector psi(p, 3, 16);
        psi.init(rng);
        std::vector<ParamRef> params;
        psi.collect_params("psi", params);
        for (auto& pr : params)
            for (std::size_t i = 0; i < pr.tensor->size(); ++i)
                (*pr.tensor)[i] += rng.uniform(-0.3, 0.3);

        Tensor x({p});
        for (std::size_t i = 0; i < p; ++i) x[i] = rng.uniform(-3.0, 3.0);
        auto [y, logdet] = psi.forward(x);
        Tensor back = psi.inverse(y);
        for (std::size_t i = 0; i < p; ++i)
            worst_rt = std::max(worst_rt, std::abs(back[i] - x[i]));

        // Numeric Jacobian determinant every 20th draw (the expensive part).
        if (d % 20 == 0) {
            Tensor row({1, p});
            for (std::size_t i = 0; i < p; ++i) row.at(0, i) = x[i];
            Tensor jac = ad::jacobian(
                [&](ad::Graph& g, ad::NodeId in) {
                    return psi.forward(g, psi.bind(g), in, g.input(Tensor::ones({1, 1}))).first;
                },
                row);
            Eigen::MatrixXd jm(p, p);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    jm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = jac.at(i, j);
            double num = std::log(std::abs(jm.determinant()));
            worst_ld = std::max(worst_ld,
                                std::abs(num - logdet) / std::max(1.0, std::abs(num)));
        }
    }
    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "max roundtrip %.2e (<= 1e-6), max logdet rel err %.2e (<= 1e-4), %.1fs (< 30s)",
                  worst_rt, worst_ld, dt);
    report(3, "Bijector round-trip and log-det over 1000 random draws",
           worst_rt <= 1e-6 && worst_ld <= 1e-4 && dt < 30.0, buf);
}

// --- 4. Gradient suite -------------------------------------------------------
void criterion4() {
    RngStream rng = RngStream::root(4004).derive("c4");
    double worst = 0.0;
    const int points = 100;
    for (int k = 0; k < points; ++k) {
        Tensor x({2, 3});
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = rng.uniform(-2.0, 2.0);
            if (std::abs(x[i]) < 5e-2) x[i] += 0.1; // keep clear of the relu kink
        }
        Tensor w({3, 3});
        for (std::size_t i = 0; i < 9; ++i) w[i] = rng.uniform(-1.0, 1.0);
        // One composite touching every differentiable op.
        auto build = [&](ad::Graph& g, ad::NodeId in) {
            ad::NodeId m = g.matmul(in, g.input(w));
            ad::NodeId a = g.add(g.relu(m), g.exp(g.scale(m, 0.2)));
            ad::NodeId b = g.mul(g.tanh(m), g.neg(in));
            ad::NodeId cat = g.concat(a, b);
            return g.sum(g.slice(cat, 1, 5));
        };
        ad::Graph g;
        ad::NodeId in = g.input(x, true);
        g.backward(build(g, in));
        Tensor ad_grad = g.grad(in);
        const double h = 1e-5;
        for (std::size_t i = 0; i < x.size(); ++i) {
            Tensor xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            ad::Graph gp, gm;
            double fp = gp.value(build(gp, gp.input(xp)))[0];
            double fm = gm.value(build(gm, gm.input(xm)))[0];
            double fd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, std::abs(ad_grad[i] - fd) /
                                        std::max({1.0, std::abs(fd), std::abs(ad_grad[i])}));
        }
    }
    char buf[120];
    std::snprintf(buf, sizeof buf, "max rel err %.2e (<= 1e-5) on %d points", worst, points);
    report(4, "Gradient suite vs central finite differences", worst <= 1e-5, buf);
}

// --- 5. Spring oscillator ----------------------------------------------------
double rollout_period(const std::vector<double>& series) {
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(series.size());
    auto ac = [&](int lag) {
        double num = 0.0, den = 0.0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < series.size(); ++t)
            num += (series[t] - mean) * (series[t + static_cast<std::size_t>(lag)] - mean);
        for (double v : series) den += (v - mean) * (v - mean);
        return num / den;
    };
    int best = 3;
    double best_v = -2.0;
    for (int lag = 3; lag <= 12; ++lag) {
        double v = ac(lag);
        if (v > best_v) {
            best_v = v;
            best = lag;
        }
    }
    double y1 = ac(best - 1), y2 = ac(best), y3 = ac(best + 1);
    double denom = y1 - 2.0 * y2 + y3;
    double frac = denom == 0.0 ? 0.0 : 0.5 * (y1 - y3) / denom;
    return static_cast<double>(best) + frac;
}

void criterion5() {
    auto t0 = clock_type::now();
    SpringParams sp;
    sp.batches = 1000;
    sp.samples_per_batch = 100;
    sp.seed = 1;
    Dataset ds = gen_spring(sp);

    int argmax_two = 0;
    for (std::uint64_t seed : {101, 202, 303}) {
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 100;
        cfg.seed = seed;
        EiConfig ecfg;
        ecfg.n_samples = 1000;
        ecfg.seed = seed + 7;
        SweepResult res = sweep_q(ds, cfg, ecfg, 4);
        if (res.q_star == 2) ++argmax_two;
    }

    // Rollout check on a freshly trained q = 2 model.
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 100;
    cfg.seed = 101;
    NisModel model(4, 2);
    RngStream init_rng = RngStream::root(cfg.seed).derive("init");
    model.init(init_rng);
    train(model, ds, cfg);
    RngStream roll_rng = RngStream::root(5).derive("c5-roll");
    NisModel::Trajectory traj = model.rollout(ds.row_x(0), 400, true, roll_rng);
    double max_abs = 0.0;
    std::vector<double> series;
    for (const Tensor& y : traj.macro) {
        series.push_back(y[0]);
        for (std::size_t i = 0; i < y.size(); ++i) max_abs = std::max(max_abs, std::abs(y[i]));
    }
    bool bounded = max_abs < 100.0;
    double period = rollout_period(series);
    const double two_pi = 2.0 * M_PI;
    bool periodic = period >= 0.85 * two_pi && period <= 1.15 * two_pi;

    double dt = seconds_since(t0);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "argmax Eff = 2 in %d/3 seeds (need >= 2), rollout max|y| = %.2f, period = "
                  "%.2f (2pi +/- 15%%), %.0fs (< 600s)",
                  argmax_two, max_abs, period, dt);
    report(5, "Spring oscillator: q* = 2 and periodic bounded rollout",
           argmax_two >= 2 && bounded && periodic && dt < 600.0, buf);
}

// --- 6. Markov chain ---------------------------------------------------------
void criterion6() {
    auto t0 = clock_type::now();
    MarkovParams mp;
    mp.batches = 5000;
    mp.seed = 2;
    Dataset ds = gen_markov(mp);

    // Training recipe pinned by pilot calibration: deterministic objective
    // (z = 0), cosine learning-rate decay, and an affine (zero-hidden)
    // dynamics net. The affine dynamics cannot absorb encoder scatter -- an
    // affine 1-d map with two required fixed points must be the identity --
    // so the prediction loss itself forces equivalent micro states onto a
    // shared macro code.
    auto recipe = [](std::uint64_t seed) {
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.batch_size = 100;
        cfg.learning_rate = 1e-3;
        cfg.train_noise = false;
        cfg.lr_schedule = "cosine";
        cfg.seed = seed;
        return cfg;
    };

    int argmax_one = 0;
    int clusters_ok = 0;
    std::size_t last_count = 0;
    for (std::uint64_t seed : {11, 22, 33}) {
        TrainConfig cfg = recipe(seed);
        EiConfig ecfg;
        ecfg.seed = RngStream::root(seed).derive("ei-root").next_u64();
        SweepResult res = sweep_q(ds, cfg, ecfg, 4, /*dyn_hidden=*/0);
        if (res.q_star == 1) ++argmax_one;

        // Cluster structure of the one-hot encodings under a trained q = 1
        // model: states 1-7 (indices 0-6) together, state 8 (index 7) alone.
        NisModel model(8, 1, 3, 64, /*dyn_hidden=*/0);
        RngStream init_rng = RngStream::root(seed).derive("init");
        model.init(init_rng);
        train(model, ds, cfg);
        std::vector<Tensor> states;
        for (std::size_t s = 0; s < 8; ++s) {
            Tensor x({8});
            x[s] = 1.0;
            states.push_back(std::move(x));
        }
        ClusterResult cl = cluster_macro_codes(model, states);
        last_count = cl.count;
        bool split_ok = cl.count == 2;
        for (std::size_t s = 1; s < 7 && split_ok; ++s)
            if (cl.labels[s] != cl.labels[0]) split_ok = false;
        if (split_ok && cl.labels[7] == cl.labels[0]) split_ok = false;
        if (split_ok) ++clusters_ok;
    }

    double dt = seconds_since(t0);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "argmax Eff = 1 in %d/3 seeds (need >= 2), 2 clusters split 1-7 vs 8 in %d/3 "
                  "seeds (need >= 2, last count %zu), %.0fs (< 600s)",
                  argmax_one, clusters_ok, last_count, dt);
    report(6, "Markov chain: q* = 1 and two separated clusters",
           argmax_one >= 2 && clusters_ok >= 2 && dt < 600.0, buf);
}

// --- 7. Boolean network ------------------------------------------------------
void criterion7() {
    auto t0 = clock_type::now();
    BoolNetParams bp;
    bp.batches = 50;
    bp.samples_per_batch = 100;
    bp.seed = 3;

    // Implied 16 x 16 matrix vs brute-force enumeration.
    std::vector<double> tm = boolnet_transition_matrix(bp);
    bool matrix_ok = tm.size() == 256;
    auto bit = [](std::size_t state, std::size_t node) { return (state >> (3 - node)) & 1u; };
    for (std::size_t sf = 0; sf < 16 && matrix_ok; ++sf)
        for (std::size_t st = 0; st < 16; ++st) {
            double prob = 1.0;
            for (std::size_t node = 0; node < 4; ++node) {
                std::size_t pat = bit(sf, bp.neighbors[node][0]) * 2 +
                                  bit(sf, bp.neighbors[node][1]);
                double pz = bp.table[node][pat];
                prob *= bit(st, node) == 0 ? pz : 1.0 - pz;
            }
            if (std::abs(tm[sf * 16 + st] - prob) > 1e-15) {
                matrix_ok = false;
                break;
            }
        }

    Dataset ds = gen_boolnet(bp);
    bool sweeps_ok = true;
    std::vector<std::size_t> cluster_counts;
    for (std::uint64_t seed : {6, 7, 8}) {
        // Same pilot-calibrated recipe as the Markov system: deterministic
        // objective, cosine decay, affine dynamics net.
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.batch_size = 100;
        cfg.learning_rate = 1e-3;
        cfg.train_noise = false;
        cfg.lr_schedule = "cosine";
        cfg.seed = seed;
        EiConfig ecfg;
        ecfg.n_samples = 500;
        ecfg.seed = RngStream::root(seed).derive("ei-root").next_u64();
        SweepResult res = sweep_q(ds, cfg, ecfg, 8, /*dyn_hidden=*/0);
        for (const SweepEntry& e : res.entries)
            if (e.failed) sweeps_ok = false;

        // The cluster structure needs a longer budget than the sweep to
        // settle; pilots showed the macro codes merge into their final
        // grouping by ~100 epochs.
        cfg.epochs = 100;
        NisModel model(16, 1, 3, 64, /*dyn_hidden=*/0);
        RngStream init_rng = RngStream::root(seed).derive("init");
        model.init(init_rng);
        train(model, ds, cfg);
        std::vector<Tensor> states;
        for (std::size_t s = 0; s < 16; ++s) {
            Tensor x({16});
            x[s] = 1.0;
            states.push_back(std::move(x));
        }
        cluster_counts.push_back(cluster_macro_codes(model, states).count);
    }
    bool stable = cluster_counts[0] == cluster_counts[1] && cluster_counts[1] == cluster_counts[2];

    double dt = seconds_since(t0);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "matrix matches enumeration: %s, sweeps completed q <= 8: %s, cluster counts "
                  "{%zu,%zu,%zu} stable: %s, %.0fs",
                  matrix_ok ? "yes" : "no", sweeps_ok ? "yes" : "no", cluster_counts[0],
                  cluster_counts[1], cluster_counts[2], stable ? "yes" : "no", dt);
    report(7, "Boolean network: enumeration, sweep completion, stable clusters",
           matrix_ok && sweeps_ok && stable, buf);
}

// --- 8. Lemma/theorem suite --------------------------------------------------
void criterion8() {
    auto t0 = clock_type::now();
    info::GaussianJoint joint;
    joint.mean = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd root_m(4, 4);
    root_m << 1.0, 0.2, 0.1, 0.0, //
        0.0, 1.1, 0.3, 0.1,       //
        0.2, 0.0, 0.9, 0.2,       //
        0.1, 0.1, 0.0, 1.2;
    joint.cov = root_m * root_m.transpose();
    joint.size_a = 2;
    joint.size_b = 2;
    Eigen::MatrixXd bij(2, 2);
    bij << 2.0, 1.0, -0.5, 1.5;

    info::CheckResult l1 = info::check_lemma1(bij, joint);
    info::CheckResult l23 = info::check_lemma2_lemma3(0.8, 1.3, 0.5, 0.2);
    info::CheckResult t2 = info::check_theorem2_affine();
    info::CheckResult t5 = info::check_theorem5_linear_gaussian();

    // Data-processing inequality, exactly, on the 8-state chain.
    std::vector<double> xy(64, 0.0);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 7; ++c) xy[r * 8 + c] = 1.0 / 7.0;
    xy[63] = 1.0;
    std::vector<double> yz(16, 0.0);
    for (std::size_t r = 0; r < 7; ++r) yz[r * 2] = 1.0;
    yz[15] = 1.0;
    info::DiscreteChannel first{std::vector<double>(8, 1.0 / 8.0), xy, 8, 8};
    info::DiscreteChannel chained{first.input, info::compose_conditionals(xy, 8, 8, yz, 2), 8, 2};
    bool dpi = info::discrete_mi(chained) <= info::discrete_mi(first) + 1e-15;

    double dt = seconds_since(t0);
    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "lemma1 %.1e, lemma2/3 %.1e, theorem2 %.1e (all <= 1e-9), DPI exact: %s, "
                  "theorem5 rel err %.3f (<= 0.05), %.1fs (< 60s)",
                  l1.max_err, l23.max_err, t2.max_err, dpi ? "yes" : "no", t5.max_err, dt);
    report(8, "Lemma/theorem suite",
           l1.pass && l23.pass && t2.pass && t5.pass && dpi && dt < 60.0, buf);
}

// --- 9. Sigma-shift identity -------------------------------------------------
void criterion9() {
    bool ok = true;
    double worst = 0.0;
    nis::DiffMap mu = [](ad::Graph& g, ad::NodeId x) { return g.add(x, g.tanh(x)); };
    for (std::size_t q : {1, 2, 4}) {
        EiConfig cfg;
        cfg.n_samples = 200;
        cfg.seed = 909 + q;
        EiReport r1 = ei_gaussian(mu, std::vector<double>(q, 0.8), cfg);
        EiReport r2 = ei_gaussian(mu, std::vector<double>(q, 1.6), cfg);
        double err = std::abs((r1.ei - r2.ei) - static_cast<double>(q) * std::log(2.0));
        worst = std::max(worst, err);
        if (err > 1e-12) ok = false;
    }
    char buf[120];
    std::snprintf(buf, sizeof buf, "max |EI(sigma) - EI(2 sigma) - q ln 2| = %.2e (<= 1e-12)",
                  worst);
    report(9, "Sigma-shift identity", ok, buf);
}

// --- 10. Reproducibility -----------------------------------------------------
void criterion10() {
    SpringParams sp;
    sp.batches = 20;
    sp.samples_per_batch = 20;
    sp.seed = 10;
    Dataset ds = gen_spring(sp);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 50;
    cfg.seed = 4;
    EiConfig ecfg;
    ecfg.n_samples = 32;
    ecfg.seed = 6;

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "nis-acceptance-c10";
    fs::create_directories(dir);
    auto run = [&](const std::string& name) {
        SweepResult res = sweep_q(ds, cfg, ecfg, 2);
        save_sweep_csv(res, (dir / name).string());
        std::ifstream in(dir / name);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    std::string a = run("a.csv");
    std::string b = run("b.csv");
    fs::remove_all(dir);
    char buf[120];
    std::snprintf(buf, sizeof buf, "two identical-seed sweep CSVs byte-identical: %s (%zu bytes)",
                  a == b ? "yes" : "no", a.size());
    report(10, "Reproducibility of sweep artifacts", a == b && !a.empty(), buf);
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion9();
    criterion8();
    criterion10();
    criterion5();
    criterion6();
    criterion7();
    std::printf("%s: %d/10 criteria passed\n", g_failures == 0 ? "SUCCESS" : "FAILURE",
                10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
