#include <doctest.h>

#include <cmath>

#include "nis/nets.hpp"

using nis::Bijector;
using nis::CouplingBlock;
using nis::Mlp;
using nis::Tensor;
using nis::ad::Graph;
using nis::ad::NodeId;

namespace {

Tensor random_vec(std::size_t n, nis::RngStream& rng, double lo = -3.0, double hi = 3.0) {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("mlp graph path agrees with the plain forward path") {
    nis::RngStream rng = nis::RngStream::root(3).derive("mlp");
    Mlp net(4, 8, 3);
    net.init(rng);
    Tensor x = random_vec(4, rng);
    Tensor plain = net.forward(x);

    Graph g;
    Tensor row({1, 4});
    for (std::size_t i = 0; i < 4; ++i) row.at(0, i) = x[i];
    NodeId out = net.apply(g, net.bind(g), g.input(row), g.input(Tensor::ones({1, 1})));
    const Tensor& gv = g.value(out);
    REQUIRE(gv.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(gv[i] == doctest::Approx(plain[i]).epsilon(1e-12));
}

TEST_CASE("zero-initialized output layer makes the mlp the zero map") {
    nis::RngStream rng = nis::RngStream::root(5).derive("mlp-zero");
    Mlp net(3, 16, 3);
    net.init(rng, /*zero_last=*/true);
    Tensor y = net.forward(random_vec(3, rng));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("freshly initialized bijector is the identity map") {
    nis::RngStream rng = nis::RngStream::root(9).derive("bij-id");
    for (std::size_t p : {2, 3, 5}) {
        Bijector psi(p);
        psi.init(rng);
        Tensor x = random_vec(p, rng);
        auto [y, logdet] = psi.forward(x);
        for (std::size_t i = 0; i < p; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
        CHECK(logdet == doctest::Approx(0.0));
    }
}

TEST_CASE("hand-computed single coupling block with fixed tiny nets inverts exactly") {
    // p = 2, hidden = 1: collapse every net to an affine map we can evaluate
    // by hand through the ReLU hiddens, then verify forward and inverse.
    CouplingBlock block(2, 1, false);
    nis::RngStream rng = nis::RngStream::root(1).derive("hand");
    block.init(rng);
    std::vector<nis::ParamRef> params;
    block.collect_params("blk", params);
    // Set every net to compute f(u) = c via zero weights and an output bias:
    // s1 -> 0.5, t1 -> -1.0, s2 -> 0, t2 -> 2.0.
    for (auto& pr : params) {
        for (std::size_t i = 0; i < pr.tensor->size(); ++i) (*pr.tensor)[i] = 0.0;
        if (pr.name == "blk.s1.b3") (*pr.tensor)[0] = 0.5;
        if (pr.name == "blk.t1.b3") (*pr.tensor)[0] = -1.0;
        if (pr.name == "blk.t2.b3") (*pr.tensor)[0] = 2.0;
    }
    Tensor x({2});
    x[0] = 3.0;
    x[1] = -2.0;
    Graph g;
    Tensor row({1, 2});
    row.at(0, 0) = x[0];
    row.at(0, 1) = x[1];
    NodeId ones = g.input(Tensor::ones({1, 1}));
    auto bound = block.bind(g);
    auto [ynode, ldnode] = block.forward(g, bound, g.input(row), ones);
    const Tensor& y = g.value(ynode);
    // Squash keeps small outputs nearly linear: s = 5 tanh(0.5/5).
    double s = 5.0 * std::tanh(0.5 / 5.0);
    CHECK(y.at(0, 1) == doctest::Approx(-2.0 * std::exp(s) - 1.0).epsilon(1e-12));
    CHECK(y.at(0, 0) == doctest::Approx(3.0 + 2.0).epsilon(1e-12)); // exp(0) * 3 + 2
    CHECK(g.value(ldnode)[0] == doctest::Approx(s).epsilon(1e-12));

    Graph g2;
    NodeId back = block.inverse(g2, block.bind(g2), g2.input(g.value(ynode)),
                                g2.input(Tensor::ones({1, 1})));
    const Tensor& xi = g2.value(back);
    CHECK(xi.at(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(xi.at(0, 1) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("random bijectors round-trip and match numeric log-det") {
    nis::RngStream rng = nis::RngStream::root(17).derive("bij-prop");
    for (std::size_t p : {2, 3, 4, 7}) {
        Bijector psi(p, 3, 16);
        psi.init(rng);
        // Perturb all parameters away from the identity initialization.
        std::vector<nis::ParamRef> params;
        psi.collect_params("psi", params);
        for (auto& pr : params)
            for (std::size_t i = 0; i < pr.tensor->size(); ++i)
                (*pr.tensor)[i] += rng.uniform(-0.3, 0.3);

        for (int rep = 0; rep < 5; ++rep) {
            Tensor x = random_vec(p, rng);
            auto [y, logdet] = psi.forward(x);
            Tensor back = psi.inverse(y);
            for (std::size_t i = 0; i < p; ++i)
                CHECK(std::abs(back[i] - x[i]) < 1e-9);

            // Numeric Jacobian via the reverse-mode graph path.
            Tensor row({1, p});
            for (std::size_t i = 0; i < p; ++i) row.at(0, i) = x[i];
            Tensor jac = nis::ad::jacobian(
                [&](Graph& g, NodeId in) {
                    NodeId ones = g.input(Tensor::ones({1, 1}));
                    return psi.forward(g, psi.bind(g), in, ones).first;
                },
                row);
            // |det| via Gaussian elimination with partial pivoting.
            std::vector<double> m(jac.data);
            double det = 1.0;
            for (std::size_t c = 0; c < p; ++c) {
                std::size_t piv = c;
                for (std::size_t r = c + 1; r < p; ++r)
                    if (std::abs(m[r * p + c]) > std::abs(m[piv * p + c])) piv = r;
                if (piv != c) {
                    for (std::size_t k = 0; k < p; ++k) std::swap(m[c * p + k], m[piv * p + k]);
                    det = -det;
                }
                det *= m[c * p + c];
                for (std::size_t r = c + 1; r < p; ++r) {
                    double f = m[r * p + c] / m[c * p + c];
                    for (std::size_t k = c; k < p; ++k) m[r * p + k] -= f * m[c * p + k];
                }
            }
            CHECK(std::abs(std::log(std::abs(det)) - logdet) /
                      std::max(1.0, std::abs(logdet)) <
                  1e-6);
        }
    }
}

TEST_CASE("log-det is additive under composition of bijectors") {
    nis::RngStream rng = nis::RngStream::root(23).derive("bij-add");
    std::size_t p = 4;
    Bijector f(p, 2, 8), h(p, 2, 8);
    f.init(rng);
    h.init(rng);
    for (Bijector* b : {&f, &h}) {
        std::vector<nis::ParamRef> ps;
        b->collect_params("psi", ps);
        for (auto& pr : ps)
            for (std::size_t i = 0; i < pr.tensor->size(); ++i)
                (*pr.tensor)[i] += rng.uniform(-0.2, 0.2);
    }
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = random_vec(p, rng);
        auto [mid, ld_f] = f.forward(x);
        auto [out, ld_h] = h.forward(mid);
        // Jacobian of h∘f is J_h(f(x)) J_f(x), so log-dets add. Compare
        // against the numeric determinant of the composed map.
        Tensor row({1, p});
        for (std::size_t i = 0; i < p; ++i) row.at(0, i) = x[i];
        Tensor jac = nis::ad::jacobian(
            [&](Graph& g, NodeId in) {
                NodeId ones = g.input(Tensor::ones({1, 1}));
                NodeId m = f.forward(g, f.bind(g), in, ones).first;
                return h.forward(g, h.bind(g), m, ones).first;
            },
            row);
        std::vector<double> m(jac.data);
        double det = 1.0;
        for (std::size_t c = 0; c < p; ++c) {
            std::size_t piv = c;
            for (std::size_t r = c + 1; r < p; ++r)
                if (std::abs(m[r * p + c]) > std::abs(m[piv * p + c])) piv = r;
            if (piv != c) {
                for (std::size_t k = 0; k < p; ++k) std::swap(m[c * p + k], m[piv * p + k]);
                det = -det;
            }
            det *= m[c * p + c];
            for (std::size_t r = c + 1; r < p; ++r) {
                double fac = m[r * p + c] / m[c * p + c];
                for (std::size_t k = c; k < p; ++k) m[r * p + k] -= fac * m[c * p + k];
            }
        }
        CHECK(std::log(std::abs(det)) == doctest::Approx(ld_f + ld_h).epsilon(1e-6));
        (void)out;
    }
}

TEST_CASE("zero-hidden mlp is a plain affine map with only w1/b1 parameters") {
    nis::RngStream rng = nis::RngStream::root(17).derive("affine");
    Mlp net(3, 0, 2);
    net.init(rng);

    std::vector<nis::ParamRef> params;
    net.collect_params("f", params);
    REQUIRE(params.size() == 2);
    CHECK(params[0].name == "f.w1");
    CHECK(params[1].name == "f.b1");
    CHECK(net.param_count() == 3 * 2 + 2);

    const Tensor& w = *params[0].tensor;
    const Tensor& b = *params[1].tensor;
    Tensor x = random_vec(3, rng);
    Tensor plain = net.forward(x);
    REQUIRE(plain.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
        double want = b[j];
        for (std::size_t i = 0; i < 3; ++i) want += x[i] * w.at(i, j);
        CHECK(plain[j] == doctest::Approx(want).epsilon(1e-12));
    }

    Graph g;
    Tensor row({1, 3});
    for (std::size_t i = 0; i < 3; ++i) row.at(0, i) = x[i];
    NodeId out = net.apply(g, net.bind(g), g.input(row), g.input(Tensor::ones({1, 1})));
    const Tensor& gv = g.value(out);
    REQUIRE(gv.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) CHECK(gv[j] == doctest::Approx(plain[j]).epsilon(1e-12));

    Mlp zeroed(3, 0, 2);
    zeroed.init(rng, true);
    Tensor z = zeroed.forward(x);
    for (std::size_t j = 0; j < 2; ++j) CHECK(z[j] == 0.0);
}
