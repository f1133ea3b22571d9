// Exact mutual-information utilities on Gaussian joints and discrete
// channels, plus analytic checks of the squeezed-channel lemmas and theorems
// on instances where ground truth is computable in closed form.
#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace nis::info {

// Jointly Gaussian vector split into two blocks (A first, B second).
struct GaussianJoint {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov; // symmetric positive definite
    std::size_t size_a = 0;
    std::size_t size_b = 0;
};

// MI = 0.5 * ln(det Sigma_A * det Sigma_B / det Sigma). Returns +infinity
// when the joint is singular beyond the conditioning threshold.
double gaussian_mi(const GaussianJoint& joint);

struct DiscreteChannel {
    std::vector<double> input;       // distribution over n input states
    std::vector<double> conditional; // n x m row-major, rows sum to 1
    std::size_t n = 0, m = 0;
};

// Exact sum p(x,y) ln [p(x,y) / (p(x) p(y))].
double discrete_mi(const DiscreteChannel& channel);

// Output distribution of a channel, for chaining channels.
std::vector<double> channel_output(const DiscreteChannel& channel);
// Composition: P(z|x) = sum_y P(y|x) P(z|y).
std::vector<double> compose_conditionals(const std::vector<double>& ab, std::size_t n,
                                         std::size_t k, const std::vector<double>& bc,
                                         std::size_t m);

struct CheckResult {
    bool pass = false;
    double max_err = 0.0;
};

// Lemma: an invertible affine map of one block leaves MI unchanged.
CheckResult check_lemma1(const Eigen::MatrixXd& bijection, const GaussianJoint& joint,
                         double tol = 1e-9);

// Lemmas: dropping a conditionally irrelevant block (Markov through U) and
// concatenating an independent block both leave MI unchanged. Verified on a
// constructed Gaussian chain X = (U, V), Y = h U + noise.
CheckResult check_lemma2_lemma3(double g, double h, double noise_v, double noise_y,
                                double tol = 1e-9);

// Theorem: for a fully affine squeezed channel, I(y_t; y_{t+1}) equals
// I(x_t; x_hat_{t+1}).
CheckResult check_theorem2_affine(double tol = 1e-9);

// Theorem: the double-integral expression for EI of the macro dynamics,
// evaluated by quadrature on a diagonal 2-D linear-Gaussian instance, agrees
// with the Gaussian-map EI formula. Returns the worst relative error.
CheckResult check_theorem5_linear_gaussian(double rel_tol = 0.05);

// "Narrower is harder" on the affine-Gaussian encoder instance:
// I(x; y^{q1}) <= I(x; y^{q2}) for q1 < q2, where y^q is a noisy projection
// prefix of an affine bijection of x.
CheckResult check_theorem6_monotone(double tol = 1e-12);

} // namespace nis::info
