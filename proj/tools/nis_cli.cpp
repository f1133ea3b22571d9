// Command-line driver: dataset generation, training, EI sweeps, and
// plot-data reports, all reproducible from a single root seed.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nis/datagen.hpp"
#include "nis/ei.hpp"
#include "nis/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string config_hash(const json& cfg) {
    std::string s = cfg.dump();
    std::uint64_t h = nis::detail::fnv1a(s);
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Every command writes a manifest next to its outputs recording the exact
// configuration, its hash, the seed, and the tool version.
void write_manifest(const std::string& path, const std::string& command, const json& cfg,
                    std::uint64_t seed) {
    json j{{"tool_version", kToolVersion},
           {"command", command},
           {"seed", seed},
           {"config", cfg},
           {"config_hash", config_hash(cfg)}};
    std::ofstream out(path);
    if (!out) throw nis::IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

std::string out_dir_override(const std::string& dir) {
    if (const char* env = std::getenv("NIS_OUT_DIR"); env != nullptr && dir.empty()) return env;
    return dir.empty() ? "." : dir;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw nis::IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::vector<double> parse_pair(const std::string& s) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    return vals;
}

int run_generate(const std::string& system, const std::string& dir, std::size_t batches,
                 std::size_t per_batch, const std::string& sigma, const std::string& table_path,
                 std::uint64_t seed) {
    std::string out = out_dir_override(dir);
    ensure_dir(out);
    nis::Dataset ds;
    json cfg{{"system", system}, {"batches", batches}, {"per_batch", per_batch}, {"seed", seed}};
    if (system == "spring") {
        nis::SpringParams p;
        p.batches = batches;
        p.samples_per_batch = per_batch;
        p.seed = seed;
        if (!sigma.empty()) {
            auto v = parse_pair(sigma);
            if (v.size() != 2) throw nis::ConfigError("--sigma expects two comma-separated values");
            p.sigma = {v[0], v[1]};
        }
        cfg["sigma"] = p.sigma;
        ds = nis::gen_spring(p);
    } else if (system == "markov") {
        nis::MarkovParams p;
        p.batches = batches;
        p.seed = seed;
        ds = nis::gen_markov(p);
    } else if (system == "boolnet") {
        nis::BoolNetParams p;
        if (!table_path.empty()) {
            std::ifstream in(table_path);
            if (!in) throw nis::IoError("cannot open mechanism table: " + table_path);
            std::stringstream buf;
            buf << in.rdbuf();
            p = nis::boolnet_params_from_json(buf.str());
            cfg["table"] = table_path;
        }
        p.batches = batches;
        p.samples_per_batch = per_batch;
        p.seed = seed;
        ds = nis::gen_boolnet(p);
    } else {
        throw nis::ConfigError("unknown generator: " + system);
    }
    std::string csv = out + "/" + system + ".csv";
    nis::save_dataset(ds, csv);
    write_manifest(csv + ".run.json", "generate " + system, cfg, seed);
    std::cout << "wrote " << csv << " (" << ds.n << " pairs, p=" << ds.p << ")\n";
    return kExitOk;
}

int run_train(const std::string& dataset, std::size_t q, const nis::TrainConfig& cfg,
              const std::string& out_path, const std::string& loss_csv,
              std::size_t dyn_hidden) {
    nis::Dataset ds = nis::load_dataset(dataset);
    nis::NisModel model(ds.p, q, 3, 64, dyn_hidden);
    nis::RngStream init_rng = nis::RngStream::root(cfg.seed).derive("init");
    model.init(init_rng);
    nis::Checkpoint ck = nis::train(model, ds, cfg);
    nis::save_checkpoint(ck, out_path);
    json jc{{"dataset", dataset}, {"q", q},       {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},       {"lr", cfg.learning_rate},
            {"l_norm", cfg.l_norm},               {"seed", cfg.seed},
            {"lr_schedule", cfg.lr_schedule},     {"restore_best", cfg.restore_best},
            {"train_noise", cfg.train_noise},    {"weight_decay", cfg.weight_decay}};
    write_manifest(out_path + ".run.json", "train", jc, cfg.seed);
    if (!loss_csv.empty()) {
        std::ofstream out(loss_csv);
        if (!out) throw nis::IoError("cannot open for writing: " + loss_csv);
        out << "epoch,best_loss\n";
        for (std::size_t e = 0; e < ck.loss_history.size(); ++e)
            out << e << "," << fmt17(ck.loss_history[e]) << "\n";
    }
    std::cout << "trained q=" << q << " train_loss=" << ck.final_train_loss
              << " val_loss=" << ck.final_val_loss << " -> " << out_path << "\n";
    return kExitOk;
}

int run_sweep(const std::string& dataset, std::size_t q_cap, const nis::TrainConfig& tcfg,
              const nis::EiConfig& ecfg, const std::string& dir, std::size_t dyn_hidden) {
    std::string out = out_dir_override(dir);
    ensure_dir(out);
    nis::Dataset ds = nis::load_dataset(dataset);
    nis::SweepResult res = nis::sweep_q(ds, tcfg, ecfg, q_cap, dyn_hidden);
    nis::save_sweep_csv(res, out + "/sweep.csv");
    nis::save_sweep_json(res, out + "/sweep.json");
    json jc{{"dataset", dataset}, {"q_cap", q_cap},      {"epochs", tcfg.epochs},
            {"seed", tcfg.seed},  {"ei_L", ecfg.L},      {"ei_samples", ecfg.n_samples},
            {"l_norm", tcfg.l_norm},                     {"lr_schedule", tcfg.lr_schedule},
            {"restore_best", tcfg.restore_best},         {"train_noise", tcfg.train_noise},
            {"weight_decay", tcfg.weight_decay}};
    write_manifest(out + "/sweep.run.json", "sweep", jc, tcfg.seed);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "q_star=" << res.q_star << " emergent=" << (res.emergent ? "true" : "false")
              << (res.low_signal ? " (low signal)" : "") << "\n";
    return kExitOk;
}

int run_report(const std::string& checkpoint, const std::string& dataset, const std::string& dir,
               std::size_t steps, std::uint64_t seed) {
    std::string out = out_dir_override(dir);
    ensure_dir(out);
    nis::Checkpoint ck = nis::load_checkpoint(checkpoint);
    nis::Dataset ds = nis::load_dataset(dataset);
    if (ds.p != ck.model.p())
        throw nis::ConfigError("dataset dimension does not match checkpoint");
    const nis::NisModel& model = ck.model;
    std::size_t q = model.q();

    bool one_hot = ds.generator == "markov" || ds.generator == "boolnet";

    { // (a) macro-encoding scatter
        std::ofstream f(out + "/scatter.csv");
        f << "state";
        for (std::size_t i = 0; i < q; ++i) f << ",y" << i;
        f << "\n";
        if (one_hot) {
            for (std::size_t s = 0; s < ds.p; ++s) {
                nis::Tensor x({ds.p});
                x[s] = 1.0;
                nis::Tensor y = model.encode(x);
                f << s;
                for (std::size_t i = 0; i < q; ++i) f << "," << fmt17(y[i]);
                f << "\n";
            }
        } else {
            std::size_t n = std::min<std::size_t>(ds.n, 1000);
            for (std::size_t r = 0; r < n; ++r) {
                nis::Tensor y = model.encode(ds.row_x(r));
                f << r;
                for (std::size_t i = 0; i < q; ++i) f << "," << fmt17(y[i]);
                f << "\n";
            }
        }
    }

    { // (b) macro dynamics field: y and one-step increment
        std::ofstream f(out + "/dynamics.csv");
        for (std::size_t i = 0; i < q; ++i) f << (i ? "," : "") << "y" << i;
        for (std::size_t i = 0; i < q; ++i) f << ",dy" << i;
        f << "\n";
        std::size_t n = std::min<std::size_t>(ds.n, 1000);
        for (std::size_t r = 0; r < n; ++r) {
            nis::Tensor y = model.encode(ds.row_x(r));
            nis::Tensor y1 = model.macro_step(y);
            for (std::size_t i = 0; i < q; ++i) f << (i ? "," : "") << fmt17(y[i]);
            for (std::size_t i = 0; i < q; ++i) f << "," << fmt17(y1[i] - y[i]);
            f << "\n";
        }
    }

    { // (c) deterministic macro rollout
        nis::RngStream rng = nis::RngStream::root(seed).derive("report-rollout");
        nis::NisModel::Trajectory traj = model.rollout(ds.row_x(0), steps, true, rng);
        std::ofstream f(out + "/rollout.csv");
        f << "step";
        for (std::size_t i = 0; i < q; ++i) f << ",y" << i;
        for (std::size_t i = 0; i < ds.p; ++i) f << ",x" << i;
        f << "\n";
        for (std::size_t s = 0; s < traj.macro.size(); ++s) {
            f << s;
            for (std::size_t i = 0; i < q; ++i) f << "," << fmt17(traj.macro[s][i]);
            for (std::size_t i = 0; i < ds.p; ++i) f << "," << fmt17(traj.micro[s][i]);
            f << "\n";
        }
    }

    if (one_hot) { // (d) cluster assignments over the enumerable state set
        std::vector<nis::Tensor> states;
        for (std::size_t s = 0; s < ds.p; ++s) {
            nis::Tensor x({ds.p});
            x[s] = 1.0;
            states.push_back(std::move(x));
        }
        nis::ClusterResult cl = nis::cluster_macro_codes(model, states);
        std::ofstream f(out + "/clusters.csv");
        f << "state,cluster\n";
        for (std::size_t s = 0; s < states.size(); ++s) f << s << "," << cl.labels[s] << "\n";
    }

    json jc{{"checkpoint", checkpoint}, {"dataset", dataset}, {"steps", steps}, {"seed", seed}};
    write_manifest(out + "/report.run.json", "report", jc, seed);
    std::cout << "report written to " << out << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coarse-graining discovery and effective-information analysis"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a benchmark dataset");
    std::string gen_system, gen_out, gen_sigma, gen_table;
    std::size_t gen_batches = 1000, gen_per_batch = 100;
    std::uint64_t gen_seed = 0;
    gen->add_option("system", gen_system, "spring | markov | boolnet")->required();
    gen->add_option("--batches", gen_batches, "number of batches");
    gen->add_option("--per-batch", gen_per_batch, "samples per batch");
    gen->add_option("--sigma", gen_sigma, "spring: measurement-noise stds 'a,b'");
    gen->add_option("--table", gen_table, "boolnet: mechanism table JSON file");
    gen->add_option("--seed", gen_seed, "root seed");
    gen->add_option("--out", gen_out, "output directory");

    // train
    auto* tr = app.add_subcommand("train", "train one model at a fixed q");
    std::string tr_dataset, tr_out = "checkpoint.json", tr_loss_csv;
    std::size_t tr_q = 1;
    nis::TrainConfig tr_cfg;
    std::size_t tr_dyn_hidden = 64;
    tr->add_option("--dataset", tr_dataset, "dataset CSV")->required();
    tr->add_option("--q", tr_q, "macro dimension")->required();
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--batch-size", tr_cfg.batch_size, "minibatch size");
    tr->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    tr->add_option("--l", tr_cfg.l_norm, "objective norm (1 or 2)");
    tr->add_option("--lr-schedule", tr_cfg.lr_schedule, "learning-rate schedule: constant|cosine");
    tr->add_flag("--restore-best", tr_cfg.restore_best, "restore the best-validation weights");
    tr->add_option("--train-noise", tr_cfg.train_noise,
                   "1: fresh z per sample during training; 0: z = 0 (default 1)");
    tr->add_option("--weight-decay", tr_cfg.weight_decay, "decoupled L2 weight decay");
    tr->add_option("--dyn-hidden", tr_dyn_hidden,
                   "hidden width of the dynamics net (0 = affine dynamics)");
    tr->add_option("--seed", tr_cfg.seed, "root seed");
    tr->add_option("--out", tr_out, "checkpoint path");
    tr->add_option("--loss-csv", tr_loss_csv, "loss-curve CSV path");

    // sweep
    auto* sw = app.add_subcommand("sweep", "train across q and judge causal emergence");
    std::string sw_dataset, sw_out;
    std::size_t sw_qcap = 0;
    nis::TrainConfig sw_cfg;
    std::size_t sw_dyn_hidden = 64;
    nis::EiConfig sw_ei;
    sw->add_option("--dataset", sw_dataset, "dataset CSV")->required();
    sw->add_option("--q-cap", sw_qcap, "largest q to sweep (0 = p)");
    sw->add_option("--epochs", sw_cfg.epochs, "training epochs per q");
    sw->add_option("--batch-size", sw_cfg.batch_size, "minibatch size");
    sw->add_option("--lr", sw_cfg.learning_rate, "learning rate");
    sw->add_option("--l", sw_cfg.l_norm, "objective norm (1 or 2)");
    sw->add_option("--lr-schedule", sw_cfg.lr_schedule, "learning-rate schedule: constant|cosine");
    sw->add_flag("--restore-best", sw_cfg.restore_best, "restore the best-validation weights");
    sw->add_option("--train-noise", sw_cfg.train_noise,
                   "1: fresh z per sample during training; 0: z = 0 (default 1)");
    sw->add_option("--weight-decay", sw_cfg.weight_decay, "decoupled L2 weight decay");
    sw->add_option("--dyn-hidden", sw_dyn_hidden,
                   "hidden width of the dynamics net (0 = affine dynamics)");
    sw->add_option("--seed", sw_cfg.seed, "root seed");
    sw->add_option("--ei-samples", sw_ei.n_samples, "EI Monte-Carlo samples");
    sw->add_option("--ei-L", sw_ei.L, "EI hyper-cube half-width");
    sw->add_option("--out", sw_out, "output directory");

    // report
    auto* rp = app.add_subcommand("report", "emit plot-data CSVs for a checkpoint");
    std::string rp_checkpoint, rp_dataset, rp_out;
    std::size_t rp_steps = 400;
    std::uint64_t rp_seed = 0;
    rp->add_option("--checkpoint", rp_checkpoint, "checkpoint JSON")->required();
    rp->add_option("--dataset", rp_dataset, "dataset CSV")->required();
    rp->add_option("--steps", rp_steps, "rollout length");
    rp->add_option("--seed", rp_seed, "root seed");
    rp->add_option("--out", rp_out, "output directory");

    try {
        app.parse(argc, argv);
        if (gen->parsed())
            return run_generate(gen_system, gen_out, gen_batches, gen_per_batch, gen_sigma,
                                gen_table, gen_seed);
        if (tr->parsed()) return run_train(tr_dataset, tr_q, tr_cfg, tr_out, tr_loss_csv, tr_dyn_hidden);
        if (sw->parsed()) {
            sw_ei.seed = nis::RngStream::root(sw_cfg.seed).derive("ei-root").next_u64();
            return run_sweep(sw_dataset, sw_qcap, sw_cfg, sw_ei, sw_out, sw_dyn_hidden);
        }
        if (rp->parsed()) return run_report(rp_checkpoint, rp_dataset, rp_out, rp_steps, rp_seed);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    } catch (const nis::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nis::ShapeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nis::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const nis::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
