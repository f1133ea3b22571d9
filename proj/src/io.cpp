#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nis/dataset.hpp"
#include "nis/model.hpp"

namespace nis {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json config_to_json(const TrainConfig& cfg) {
    return json{{"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"learning_rate", cfg.learning_rate},
                {"optimizer", cfg.optimizer},
                {"seed", cfg.seed},
                {"l_norm", cfg.l_norm},
                {"grad_clip", cfg.grad_clip},
                {"val_fraction", cfg.val_fraction},
                {"lr_schedule", cfg.lr_schedule},
                {"restore_best", cfg.restore_best},
                {"train_noise", cfg.train_noise},
                {"weight_decay", cfg.weight_decay}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.optimizer = j.at("optimizer").get<std::string>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.l_norm = j.at("l_norm").get<int>();
    cfg.grad_clip = j.at("grad_clip").get<double>();
    cfg.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("lr_schedule")) cfg.lr_schedule = j.at("lr_schedule").get<std::string>();
    if (j.contains("restore_best")) cfg.restore_best = j.at("restore_best").get<bool>();
    if (j.contains("train_noise")) cfg.train_noise = j.at("train_noise").get<bool>();
    if (j.contains("weight_decay")) cfg.weight_decay = j.at("weight_decay").get<double>();
    return cfg;
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot open for writing: " + csv_path);
    for (std::size_t i = 0; i < ds.p; ++i) out << "x" << i << ",";
    for (std::size_t i = 0; i < ds.p; ++i) out << "xn" << i << (i + 1 < ds.p ? "," : "\n");
    for (std::size_t r = 0; r < ds.n; ++r) {
        for (std::size_t i = 0; i < ds.p; ++i) out << fmt17(ds.x[r * ds.p + i]) << ",";
        for (std::size_t i = 0; i < ds.p; ++i)
            out << fmt17(ds.xn[r * ds.p + i]) << (i + 1 < ds.p ? "," : "\n");
    }
    if (!out) throw IoError("write failed: " + csv_path);

    json meta{{"p", ds.p},
              {"n_pairs", ds.n},
              {"generator", ds.generator},
              {"generator_params",
               ds.generator_params.empty() ? json::object() : json::parse(ds.generator_params)},
              {"seed", ds.seed}};
    std::ofstream mout(csv_path + ".meta.json");
    if (!mout) throw IoError("cannot open for writing: " + csv_path + ".meta.json");
    mout << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open: " + csv_path);
    std::string header;
    if (!std::getline(in, header)) throw IoError("empty dataset file: " + csv_path);
    std::size_t cols = 1 + static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
    if (cols % 2 != 0 || cols == 0) throw IoError("malformed dataset header: " + csv_path);
    Dataset ds;
    ds.p = cols / 2;
    std::string line;
    std::vector<double> row(cols);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!std::getline(ss, cell, ',')) throw IoError("short row in " + csv_path);
            row[c] = std::stod(cell);
        }
        ds.push_pair(row.data(), row.data() + ds.p);
    }

    std::ifstream min(csv_path + ".meta.json");
    if (min) {
        json meta = json::parse(min);
        ds.generator = meta.value("generator", "unknown");
        ds.seed = meta.value("seed", std::uint64_t{0});
        if (meta.contains("generator_params")) ds.generator_params = meta["generator_params"].dump();
        std::size_t meta_p = meta.value("p", ds.p);
        if (meta_p != ds.p)
            throw IoError("metadata dimension disagrees with CSV header in " + csv_path);
    }
    return ds;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    Checkpoint copy = ck; // params() needs mutable access
    json params = json::object();
    for (const auto& ref : copy.model.params()) params[ref.name] = ref.tensor->data;
    json j{{"schema_version", ck.schema_version},
           {"p", ck.model.p()},
           {"q", ck.model.q()},
           {"n_blocks", ck.model.n_blocks()},
           {"hidden", ck.model.hidden()},
           {"dyn_hidden", ck.model.dyn_hidden()},
           {"l_norm", ck.model.l_norm()},
           {"params", std::move(params)},
           {"config", config_to_json(ck.config)},
           {"final_train_loss", ck.final_train_loss},
           {"final_val_loss", ck.final_val_loss},
           {"sigma_sq", ck.sigma_sq},
           {"loss_history", ck.loss_history}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    json j = json::parse(in);
    if (j.at("schema_version").get<int>() != 1)
        throw IoError("unsupported checkpoint schema version in " + path);
    Checkpoint ck;
    std::size_t hidden = j.at("hidden").get<std::size_t>();
    std::size_t dyn_hidden = j.contains("dyn_hidden") ? j.at("dyn_hidden").get<std::size_t>()
                                                      : hidden;
    ck.model = NisModel(j.at("p").get<std::size_t>(), j.at("q").get<std::size_t>(),
                        j.at("n_blocks").get<std::size_t>(), hidden, dyn_hidden);
    ck.model.set_l_norm(j.at("l_norm").get<int>());
    for (auto& ref : ck.model.params()) {
        const json& arr = j.at("params").at(ref.name);
        if (arr.size() != ref.tensor->size())
            throw IoError("checkpoint parameter " + ref.name + " has wrong length");
        for (std::size_t i = 0; i < ref.tensor->size(); ++i) ref.tensor->data[i] = arr[i];
    }
    ck.config = config_from_json(j.at("config"));
    ck.final_train_loss = j.at("final_train_loss").get<double>();
    ck.final_val_loss = j.at("final_val_loss").get<double>();
    ck.sigma_sq = j.at("sigma_sq").get<std::vector<double>>();
    ck.loss_history = j.at("loss_history").get<std::vector<double>>();
    return ck;
}

} // namespace nis
