#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nis/errors.hpp"
#include "nis/tensor.hpp"

namespace nis {

// Batches of (x_t, x_{t+1}) micro-state pairs, row-major N x p each.
struct Dataset {
    std::size_t p = 0;
    std::size_t n = 0;
    std::vector<double> x;  // n * p
    std::vector<double> xn; // n * p
    std::string generator = "unknown";
    std::string generator_params; // JSON text
    std::uint64_t seed = 0;

    void reserve(std::size_t n_pairs) {
        x.reserve(n_pairs * p);
        xn.reserve(n_pairs * p);
    }

    void push_pair(const double* xt, const double* xt1) {
        x.insert(x.end(), xt, xt + p);
        xn.insert(xn.end(), xt1, xt1 + p);
        ++n;
    }

    Tensor row_x(std::size_t i) const {
        return Tensor::vector({x.begin() + i * p, x.begin() + (i + 1) * p});
    }
    Tensor row_xn(std::size_t i) const {
        return Tensor::vector({xn.begin() + i * p, xn.begin() + (i + 1) * p});
    }
};

// CSV with header `x0..x{p-1},xn0..xn{p-1}`, one pair per row, plus a JSON
// metadata sidecar at <path>.meta.json.
void save_dataset(const Dataset& ds, const std::string& csv_path);
Dataset load_dataset(const std::string& csv_path);

} // namespace nis
