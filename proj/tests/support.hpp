#pragma once

// Helpers shared by the unit tests and the acceptance runner: random instance generators and
// independent numerical oracles (finite differences, naive DFT).

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "freerun/dynmodel.hpp"
#include "freerun/metrics.hpp"
#include "freerun/net.hpp"
#include "freerun/rng.hpp"

namespace testsupport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int uniform_int(freerun::Rng& rng, int lo, int hi);  // inclusive
double uniform(freerun::Rng& rng, double lo, double hi);
VectorXd gaussian_vector(freerun::Rng& rng, Index n, double sigma = 1.0);
MatrixXd gaussian_matrix(freerun::Rng& rng, Index rows, Index cols, double sigma = 1.0);

/// Net with random structure: 1-2 hidden layers, parameters drawn N(0, sigma^2), biases too.
freerun::FeedforwardNet random_net(freerun::Rng& rng, Index input_size, Index output_size, Index max_params);

/// Random orders (lags 1-3), 1-2 input and output channels, 10-50 samples and a random net
/// with at most 61 parameters.
struct DynInstance {
  freerun::ModelOrders orders;
  freerun::Dataset data;
  freerun::FeedforwardNet net{freerun::NetStructure::mlp(1, {1}, 1)};
};
DynInstance random_dyn_instance(freerun::Rng& rng);

/// Random dimensions with 1-3 hidden layers of 4-40 nodes, 1-3 outputs and output lags.
freerun::NetDims random_dims(freerun::Rng& rng);

/// Per-iteration flop total of one method, summed term by term from the cost table.
std::int64_t hand_flop_total(const freerun::NetDims& d, freerun::TrainingMethod m);

/// Central differences of f at x with step h, one column per coordinate.
MatrixXd central_difference_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x,
                                     double h = 1e-6);

/// max |a - b| / max(max |b|, 1).
double relative_error(const MatrixXd& a, const MatrixXd& b);

/// One-sided periodogram by direct DFT, bins k = 0 .. n/2 at w = 2k/n (Nyquist = 1).
std::vector<double> naive_periodogram(const VectorXd& x);

/// Fraction of periodogram power (excluding DC) at frequencies w with lo <= w <= hi.
double band_power_fraction(const VectorXd& x, double lo, double hi);

/// Plain reimplementation of the Chen benchmark recursion used as a second opinion.
VectorXd chen_reference(const VectorXd& u, const VectorXd& v, const VectorXd& w);

}  // namespace testsupport
