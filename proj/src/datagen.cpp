#include "nis/datagen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "nis/rng.hpp"

namespace nis {

// -------------------------------------------------------------- spring

void SpringParams::validate() const {
    if (sigma[0] < 0.0 || sigma[1] < 0.0) throw ConfigError("spring: sigma must be >= 0");
    if (batches == 0 || samples_per_batch == 0)
        throw ConfigError("spring: batches and samples per batch must be positive");
}

Dataset gen_spring(const SpringParams& params) {
    params.validate();
    Dataset ds;
    ds.p = 4;
    ds.generator = "spring";
    ds.seed = params.seed;
    ds.generator_params = nlohmann::json{{"sigma", params.sigma},
                                         {"dt", params.dt},
                                         {"batches", params.batches},
                                         {"samples_per_batch", params.samples_per_batch}}
                              .dump();
    ds.reserve(params.batches * params.samples_per_batch);

    double c = std::cos(params.dt), s = std::sin(params.dt);
    RngStream root = RngStream::root(params.seed).derive("spring");
    for (std::size_t b = 0; b < params.batches; ++b) {
        RngStream rng = root.derive(b);
        for (std::size_t i = 0; i < params.samples_per_batch; ++i) {
            double z = rng.uniform(-1.0, 1.0);
            double v = rng.uniform(-1.0, 1.0);
            // Exact flow of dz/dt = v, dv/dt = -z over one dt.
            double z1 = z * c + v * s;
            double v1 = v * c - z * s;
            double xi_z = params.sigma[0] * rng.normal();
            double xi_v = params.sigma[1] * rng.normal();
            double xi_z1 = params.sigma[0] * rng.normal();
            double xi_v1 = params.sigma[1] * rng.normal();
            double xt[4] = {z + xi_z, v + xi_v, z - xi_z, v - xi_v};
            double xt1[4] = {z1 + xi_z1, v1 + xi_v1, z1 - xi_z1, v1 - xi_v1};
            ds.push_pair(xt, xt1);
        }
    }
    return ds;
}

// -------------------------------------------------------------- markov

std::vector<double> MarkovParams::effective_matrix() const {
    if (!matrix.empty()) return matrix;
    std::vector<double> m(n_states * n_states, 0.0);
    for (std::size_t r = 0; r + 1 < n_states; ++r)
        for (std::size_t c = 0; c + 1 < n_states; ++c)
            m[r * n_states + c] = 1.0 / static_cast<double>(n_states - 1);
    m[n_states * n_states - 1] = 1.0; // absorbing last state
    return m;
}

void MarkovParams::validate() const {
    if (n_states < 2) throw ConfigError("markov: need at least 2 states");
    if (batches == 0) throw ConfigError("markov: batches must be positive");
    std::vector<double> m = effective_matrix();
    if (m.size() != n_states * n_states)
        throw ConfigError("markov: matrix must be n_states x n_states");
    for (std::size_t r = 0; r < n_states; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < n_states; ++c) {
            double v = m[r * n_states + c];
            if (v < 0.0) throw ConfigError("markov: negative transition probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ConfigError("markov: row " + std::to_string(r) + " sums to " +
                              std::to_string(sum));
    }
}

namespace {

std::size_t sample_categorical(const double* row, std::size_t n, RngStream& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        acc += row[c];
        if (u < acc) return c;
    }
    return n - 1;
}

} // namespace

Dataset gen_markov(const MarkovParams& params) {
    params.validate();
    std::vector<double> m = params.effective_matrix();
    std::size_t n = params.n_states;
    Dataset ds;
    ds.p = n;
    ds.generator = "markov";
    ds.seed = params.seed;
    ds.generator_params =
        nlohmann::json{{"n_states", n}, {"batches", params.batches}, {"matrix", m}}.dump();
    ds.reserve(params.batches);

    RngStream root = RngStream::root(params.seed).derive("markov");
    std::vector<double> xt(n), xt1(n);
    for (std::size_t b = 0; b < params.batches; ++b) {
        RngStream rng = root.derive(b);
        std::size_t s0 = static_cast<std::size_t>(rng.uniform_int(n));
        std::size_t s1 = sample_categorical(m.data() + s0 * n, n, rng);
        std::fill(xt.begin(), xt.end(), 0.0);
        std::fill(xt1.begin(), xt1.end(), 0.0);
        xt[s0] = 1.0;
        xt1[s1] = 1.0;
        ds.push_pair(xt.data(), xt1.data());
    }
    return ds;
}

// ------------------------------------------------------------- boolnet

BoolNetParams::BoolNetParams() {
    // Illustrative default mechanism: Pr(node = 0) is 0.7 when the two
    // neighbor bits agree and 0.3 when they differ.
    for (auto& row : table) row = {0.7, 0.3, 0.3, 0.7};
}

void BoolNetParams::validate() const {
    if (batches == 0 || samples_per_batch == 0)
        throw ConfigError("boolnet: batches and samples per batch must be positive");
    for (std::size_t i = 0; i < kNodes; ++i) {
        for (std::size_t j = 0; j < 2; ++j)
            if (neighbors[i][j] >= kNodes)
                throw ConfigError("boolnet: neighbor index out of range");
        if (neighbors[i][0] == neighbors[i][1])
            throw ConfigError("boolnet: node " + std::to_string(i) +
                              " must have two distinct neighbors");
        for (double v : table[i])
            if (v < 0.0 || v > 1.0)
                throw ConfigError("boolnet: probabilities must lie in [0,1]");
    }
}

namespace {

// Bit b of state code; bit 0 is node 0 in the most significant position so
// that the decimal code reads like the bit string (e.g. 0101 -> 5).
inline int node_bit(std::size_t state, std::size_t node) {
    return static_cast<int>((state >> (BoolNetParams::kNodes - 1 - node)) & 1u);
}

double prob_node_zero(const BoolNetParams& params, std::size_t node, std::size_t state) {
    int b1 = node_bit(state, params.neighbors[node][0]);
    int b2 = node_bit(state, params.neighbors[node][1]);
    return params.table[node][static_cast<std::size_t>(2 * b1 + b2)];
}

} // namespace

std::vector<double> boolnet_transition_matrix(const BoolNetParams& params) {
    params.validate();
    constexpr std::size_t n = 1u << BoolNetParams::kNodes;
    std::vector<double> m(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            double pr = 1.0;
            for (std::size_t node = 0; node < BoolNetParams::kNodes; ++node) {
                double p0 = prob_node_zero(params, node, s);
                pr *= node_bit(t, node) == 0 ? p0 : 1.0 - p0;
            }
            m[s * n + t] = pr;
        }
    }
    return m;
}

Dataset gen_boolnet(const BoolNetParams& params) {
    params.validate();
    constexpr std::size_t n = 1u << BoolNetParams::kNodes;
    Dataset ds;
    ds.p = n;
    ds.generator = "boolnet";
    ds.seed = params.seed;
    nlohmann::json jtable;
    const char* names = "ABCD";
    for (std::size_t i = 0; i < BoolNetParams::kNodes; ++i) {
        nlohmann::json row{{"00", params.table[i][0]},
                           {"01", params.table[i][1]},
                           {"10", params.table[i][2]},
                           {"11", params.table[i][3]}};
        jtable[std::string(1, names[i])] = std::move(row);
    }
    ds.generator_params = nlohmann::json{{"batches", params.batches},
                                         {"samples_per_batch", params.samples_per_batch},
                                         {"table", std::move(jtable)},
                                         {"neighbors", params.neighbors},
                                         {"illustrative", params.illustrative}}
                              .dump();
    ds.reserve(params.batches * params.samples_per_batch);

    RngStream root = RngStream::root(params.seed).derive("boolnet");
    std::vector<double> xt(n), xt1(n);
    for (std::size_t b = 0; b < params.batches; ++b) {
        RngStream rng = root.derive(b);
        for (std::size_t i = 0; i < params.samples_per_batch; ++i) {
            std::size_t s = static_cast<std::size_t>(rng.uniform_int(n));
            std::size_t t = 0;
            for (std::size_t node = 0; node < BoolNetParams::kNodes; ++node) {
                double p0 = prob_node_zero(params, node, s);
                int bit = rng.uniform() < p0 ? 0 : 1;
                t |= static_cast<std::size_t>(bit) << (BoolNetParams::kNodes - 1 - node);
            }
            std::fill(xt.begin(), xt.end(), 0.0);
            std::fill(xt1.begin(), xt1.end(), 0.0);
            xt[s] = 1.0;
            xt1[t] = 1.0;
            ds.push_pair(xt.data(), xt1.data());
        }
    }
    return ds;
}

BoolNetParams boolnet_params_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    BoolNetParams params;
    params.illustrative = false;
    const char* names = "ABCD";
    const nlohmann::json& jt = j.contains("table") ? j.at("table") : j;
    for (std::size_t i = 0; i < BoolNetParams::kNodes; ++i) {
        std::string key(1, names[i]);
        if (!jt.contains(key))
            throw ConfigError("boolnet table: missing node " + key);
        const nlohmann::json& row = jt.at(key);
        const char* patterns[4] = {"00", "01", "10", "11"};
        for (std::size_t c = 0; c < 4; ++c) {
            if (!row.contains(patterns[c]))
                throw ConfigError("boolnet table: node " + key + " missing pattern " +
                                  patterns[c]);
            params.table[i][c] = row.at(patterns[c]).get<double>();
        }
    }
    if (j.contains("neighbors")) {
        auto nb = j.at("neighbors").get<std::vector<std::vector<std::size_t>>>();
        if (nb.size() != BoolNetParams::kNodes)
            throw ConfigError("boolnet: neighbors must list all 4 nodes");
        for (std::size_t i = 0; i < BoolNetParams::kNodes; ++i) {
            if (nb[i].size() != 2) throw ConfigError("boolnet: each node needs two neighbors");
            params.neighbors[i] = {nb[i][0], nb[i][1]};
        }
    }
    params.validate();
    return params;
}

} // namespace nis
