#pragma once

// Difference-equation models y[t] = F(y[t-1..t-ny], u[t-tau_d..t-nu]; params) backed by a
// FeedforwardNet, plus the residuals and Jacobians needed to train them with least squares.
//
// Sample indices are 0-based rows of the data matrices. With p = max(ny, nu):
//   * one-step-ahead prediction covers rows p .. N-1;
//   * free-run simulation takes its ny initial conditions at rows p-ny .. p-1 and simulates
//     rows p .. N-1. When nu <= ny this is rows 0 .. ny-1, i.e. the first ny samples.

#include <Eigen/Dense>
#include <optional>

#include "freerun/net.hpp"

namespace freerun {

struct ModelOrders {
  Index ny = 1;     // output lags
  Index nu = 1;     // input lags
  Index tau_d = 0;  // input-output delay

  /// Throws StructuralError unless ny >= 1, nu >= 1 and 0 <= tau_d <= nu.
  void validate() const;
  /// Index of the first sample with a complete regressor.
  Index first_predictable() const { return ny > nu ? ny : nu; }
  /// Row holding the first initial condition of a free-run simulation.
  Index initial_window_start() const { return first_predictable() - ny; }
  Index num_input_lags() const { return nu - tau_d + 1; }
  Index regressor_size(Index num_outputs, Index num_inputs) const {
    return ny * num_outputs + num_input_lags() * num_inputs;
  }

  bool operator==(const ModelOrders&) const = default;
};

struct Dataset {
  MatrixXd u;  // N x N_u
  MatrixXd y;  // N x N_y
  double sample_period = 1.0;

  Index size() const { return y.rows(); }
  Index num_inputs() const { return u.cols(); }
  Index num_outputs() const { return y.cols(); }

  /// Throws DataError on mismatched row counts or too few samples for `orders`.
  void validate(const ModelOrders& orders) const;
};

/// Per-channel affine map x -> (x - mean) / scale.
struct ChannelScaler {
  VectorXd mean;
  VectorXd scale;

  static ChannelScaler identity(Index channels);
  MatrixXd apply(const MatrixXd& x) const;
  MatrixXd invert(const MatrixXd& x) const;
};

struct Scalers {
  ChannelScaler u;
  ChannelScaler y;

  static Scalers identity(Index num_inputs, Index num_outputs);
};

/// z-score scalers fitted on `data`. Throws DataError naming the first constant channel.
Scalers fit_scalers(const Dataset& data);
Dataset apply_scaling(const Dataset& data, const Scalers& scalers);
MatrixXd invert_output_scaling(const MatrixXd& y, const Scalers& scalers);

struct DynamicModel {
  FeedforwardNet net;
  ModelOrders orders;
  Scalers scalers;

  /// Net with structure mlp(regressor_size, hidden, num_outputs), zero weights, identity scalers.
  static DynamicModel make(const ModelOrders& orders, Index num_inputs, Index num_outputs,
                           const std::vector<Index>& hidden);

  Index num_inputs() const { return scalers.u.mean.size(); }
  Index num_outputs() const { return net.output_size(); }
  /// Throws StructuralError if the net input size disagrees with the orders.
  void validate() const;
};

/// Network parameters optionally extended with the free-run initial conditions, stacked
/// oldest sample first: y0 = [y0[0]^T, ..., y0[ny-1]^T]^T.
struct ExtendedParameters {
  VectorXd theta;
  VectorXd y0;

  VectorXd stacked() const;
};

/// Regressor [y[t-1], ..., y[t-ny], u[t-tau_d], ..., u[t-nu]] for 0-based sample t.
/// Throws std::out_of_range when t < first_predictable() or t >= N.
VectorXd build_regressor(const MatrixXd& y, const MatrixXd& u, const ModelOrders& orders, Index t);
void build_regressor(const MatrixXd& y, const MatrixXd& u, const ModelOrders& orders, Index t,
                     Eigen::Ref<VectorXd> out);

struct OneStepPrediction {
  MatrixXd predictions;  // (N - p) x N_y, rows for t = p .. N-1
  VectorXd residuals;    // stacked sample-major: e[p]^T, e[p+1]^T, ...
};

/// Series-parallel predictor: lagged outputs are read from the measured record.
/// All functions below work in the units the net was trained in; no scaling is applied.
OneStepPrediction predict_one_step(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data);

/// Free-run simulation of N = u.rows() samples. `y0` has ny rows (one initial sample per row).
/// Rows before the initial window (only present when nu > ny) are NaN. Divergence is not an
/// error: non-finite values propagate.
MatrixXd simulate_free_run(const FeedforwardNet& net, const ModelOrders& orders, const MatrixXd& u, const MatrixXd& y0);

struct ResidualJacobian {
  VectorXd residuals;
  JacobianMatrix jacobian;
};

/// e1 for rows p .. N-1 and its Jacobian with respect to the flat network parameters.
ResidualJacobian residuals_jacobian_sp(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data);
/// Residuals only; avoids the backward pass.
VectorXd residuals_sp(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data);

/// Free-run residuals e_s = y_s - y over rows p-ny .. N-1 (the initial window included).
///
/// Jacobian columns are the network parameters followed, when `estimate_y0` is set, by the
/// stacked initial conditions. `y0_stacked` has ny * N_y entries.
ResidualJacobian residuals_jacobian_p(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data,
                                      const Eigen::Ref<const VectorXd>& y0_stacked, bool estimate_y0);
VectorXd residuals_p(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data,
                     const Eigen::Ref<const VectorXd>& y0_stacked);

/// Measured outputs over the initial window, stacked oldest first.
VectorXd measured_initial_conditions(const ModelOrders& orders, const MatrixXd& y);
MatrixXd unstack_initial_conditions(const Eigen::Ref<const VectorXd>& y0_stacked, Index num_outputs);

/// Physical-units free run: scales u and y0 with the model's scalers, simulates, inverts.
MatrixXd simulate(const DynamicModel& model, const MatrixXd& u, const MatrixXd& y0);

}  // namespace freerun
