// Seeded generators for the three benchmark systems: noisy-sensor spring
// oscillator, 8-state Markov chain, and 4-node probabilistic Boolean network.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nis/dataset.hpp"

namespace nis {

struct SpringParams {
    std::array<double, 2> sigma{0.1, 0.1}; // measurement-noise std (position, velocity)
    double dt = 1.0;                        // exact rotation step
    std::size_t batches = 1000;
    std::size_t samples_per_batch = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

struct MarkovParams {
    // Row-stochastic; defaults to rows 1-7 uniform over columns 1-7 and an
    // absorbing state 8.
    std::vector<double> matrix; // 8 x 8 row-major; empty = default
    std::size_t n_states = 8;
    std::size_t batches = 5000;
    std::uint64_t seed = 0;

    std::vector<double> effective_matrix() const;
    void validate() const;
};

struct BoolNetParams {
    static constexpr std::size_t kNodes = 4;
    // neighbors[i] = the two driving nodes of node i.
    std::array<std::array<std::size_t, 2>, kNodes> neighbors{{{2, 3}, {2, 3}, {0, 1}, {0, 1}}};
    // table[i][c] = Pr(node i = 0 | neighbor bit pattern c), c = 2*b1 + b2.
    std::array<std::array<double, 4>, kNodes> table{};
    bool illustrative = true; // shipped default table is a stand-in mechanism
    std::size_t batches = 50;
    std::size_t samples_per_batch = 100;
    std::uint64_t seed = 0;

    BoolNetParams();
    void validate() const;
};

// p=4 micro states (two noisy 2-D sensors of the latent oscillator).
Dataset gen_spring(const SpringParams& params);

// p=8 one-hot transitions from the chain.
Dataset gen_markov(const MarkovParams& params);

// p=16 one-hot transitions over the joint 4-bit state.
Dataset gen_boolnet(const BoolNetParams& params);

// Implied 16x16 row-stochastic matrix of the joint Boolean-network dynamics.
std::vector<double> boolnet_transition_matrix(const BoolNetParams& params);

// Mechanism table as a JSON document keyed by node name ("A".."D") and
// neighbor bit pattern ("00".."11"), each value Pr(node = 0 | pattern).
BoolNetParams boolnet_params_from_json(const std::string& json_text);

} // namespace nis
