#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freerun/dynmodel.hpp"
#include "freerun/lmsolver.hpp"
#include "freerun/metrics.hpp"

namespace freerun {

/// One-step-ahead residuals over the measured record.
class SeriesParallelProvider final : public ResidualProvider {
 public:
  SeriesParallelProvider(const NetStructure& structure, const ModelOrders& orders, const Dataset& data);

  Index num_params() const override { return net_.num_params(); }
  VectorXd residuals(const VectorXd& params) const override;
  void residuals_and_jacobian(const VectorXd& params, VectorXd& e, JacobianMatrix& jac) const override;
  double flops_per_epoch() const override;

 private:
  mutable FeedforwardNet net_;
  ModelOrders orders_;
  const Dataset& data_;
};

/// Free-run simulation residuals. With `estimate_y0` the parameter vector is the network
/// parameters followed by the stacked initial conditions; otherwise the initial conditions
/// stay at `fixed_y0`.
class ParallelProvider final : public ResidualProvider {
 public:
  ParallelProvider(const NetStructure& structure, const ModelOrders& orders, const Dataset& data, bool estimate_y0,
                   VectorXd fixed_y0);

  Index num_params() const override;
  VectorXd residuals(const VectorXd& params) const override;
  void residuals_and_jacobian(const VectorXd& params, VectorXd& e, JacobianMatrix& jac) const override;
  double flops_per_epoch() const override;

 private:
  mutable FeedforwardNet net_;
  ModelOrders orders_;
  const Dataset& data_;
  bool estimate_y0_;
  VectorXd fixed_y0_;
};

NetDims net_dims(const NetStructure& structure, const ModelOrders& orders, Index n_samples);

struct TrainOptions {
  TrainingMethod method = TrainingMethod::sp;
  ModelOrders orders{2, 2, 1};
  std::vector<Index> hidden{10};
  LMConfig lm{};
  /// Seed for the initial weights. The same seed gives the same initial network for every method.
  std::uint64_t seed = 0;
  /// Fit z-score scalers on the training data; otherwise identity scalers are used.
  bool normalize = true;
};

struct TrainResult {
  DynamicModel model;
  VectorXd initial_params;  // network parameters before training
  VectorXd y0;              // initial conditions used (scaled units); estimated for p-phi
  LMState state;
  double seconds = 0.0;
  /// Set when the optimizer stopped with a SolverError; `state` keeps the history up to that point.
  std::string solver_error;

  bool ok() const { return solver_error.empty(); }
};

/// Fits scalers, draws the initial network from options.seed and runs Levenberg-Marquardt with
/// the residual provider for options.method. Throws DataError for unusable data; optimizer
/// breakdowns are reported through TrainResult::solver_error.
TrainResult train_model(const Dataset& data, const TrainOptions& options);

struct ValidationResult {
  MatrixXd simulation;  // physical units, N x N_y
  double mse = 0.0;     // over the simulated rows p .. N-1
};

/// Free-run simulation from the first ny measured outputs of `data`, scored against the rest.
/// A diverging simulation yields mse = +inf rather than an error.
ValidationResult validate_model(const DynamicModel& model, const Dataset& data);

}  // namespace freerun
