#pragma once

// Levenberg-Marquardt minimization of V(p) = 0.5 * ||e(p)||^2.
//
// One epoch is one trial step: factor (J^T J + lambda * D) with D = diag(J^T J), evaluate the
// residuals at the trial point, measure the agreement ratio rho between the actual and the
// model-predicted decrease, update lambda and accept the step when rho > accept_threshold.
// Non-finite trial objectives give rho = -inf, so overflowing steps are always rejected.

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "freerun/linalg.hpp"

namespace freerun {

enum class ScheduleMode {
  /// lambda shrinks on good agreement (rho > 3/4) and grows on poor agreement (rho < 1/4).
  fletcher,
  /// Transposed orientation: lambda grows on good agreement and shrinks on poor agreement.
  /// Kept for comparison runs only.
  paper_literal,
};

struct LMConfig {
  int max_epochs = 100;
  double lambda0 = 100.0;
  double accept_threshold = 1e-3;
  double shrink = 0.5;
  double grow = 4.0;
  double agreement_low = 0.25;
  double agreement_high = 0.75;
  double diag_floor = 1e-10;
  ScheduleMode schedule_mode = ScheduleMode::fletcher;
  /// Stop early once ||J^T e||_inf falls below this; 0 disables the check.
  double gradient_tolerance = 0.0;
  /// Extra lambda increases tried when the damped normal matrix fails to factor.
  int max_factorization_retries = 10;

  /// Throws std::invalid_argument when the invariants on the factors and thresholds fail.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double objective = 0.0;  // V after the epoch
  double lambda = 0.0;     // damping used for this epoch's trial step
  double rho = 0.0;
  bool accepted = false;
  double wall_ms = 0.0;  // cumulative since the start of the run
  double predicted_flops = 0.0;
};

struct LMState {
  VectorXd params;
  double lambda = 0.0;
  double objective = 0.0;
  int epoch = 0;
  std::vector<EpochRecord> history;
};

class ResidualProvider {
 public:
  virtual ~ResidualProvider() = default;
  virtual Index num_params() const = 0;
  /// Residuals at `params`; entries may be non-finite when the model diverges.
  virtual VectorXd residuals(const VectorXd& params) const = 0;
  /// Residuals and Jacobian at `params`.
  virtual void residuals_and_jacobian(const VectorXd& params, VectorXd& e, JacobianMatrix& jac) const = 0;
  /// Per-epoch cost estimate reported in the history; 0 when unknown.
  virtual double flops_per_epoch() const { return 0.0; }
};

/// Adapts a pair of callables, mostly for tests and small problems.
class FunctionProvider final : public ResidualProvider {
 public:
  using ResidualFn = std::function<VectorXd(const VectorXd&)>;
  using JacobianFn = std::function<MatrixXd(const VectorXd&)>;

  FunctionProvider(Index num_params, ResidualFn residual, JacobianFn jacobian)
      : num_params_(num_params), residual_(std::move(residual)), jacobian_(std::move(jacobian)) {}

  Index num_params() const override { return num_params_; }
  VectorXd residuals(const VectorXd& params) const override { return residual_(params); }
  void residuals_and_jacobian(const VectorXd& params, VectorXd& e, JacobianMatrix& jac) const override {
    e = residual_(params);
    jac = jacobian_(params);
  }

 private:
  Index num_params_;
  ResidualFn residual_;
  JacobianFn jacobian_;
};

/// Delta = -(J^T J + lambda * D)^-1 J^T e with D = diag(J^T J) floored at config.diag_floor.
///
/// If the damped matrix is not positive definite lambda is multiplied by config.grow and the
/// factorization retried; after max_factorization_retries failures a SolverError is thrown.
/// `lambda` is updated in place to the value that succeeded.
VectorXd solve_damped_step(const JacobianMatrix& jac, const VectorXd& e, double& lambda, const LMConfig& config = {});

/// Same step from a precomputed normal matrix `jtj` (lower triangle used) and gradient J^T e.
/// `model_decrease` receives phi(0) - phi(delta) of the local quadratic model.
VectorXd solve_normal_step(const MatrixXd& jtj, const VectorXd& gradient, double& lambda, const LMConfig& config,
                           double* model_decrease = nullptr);

/// rho = (V_old - V_new) / model_decrease, or -inf when V_new is not finite or the predicted
/// decrease is not positive.
double agreement_ratio(double v_old, double v_new, double model_decrease);

/// Applies the configured schedule to lambda for an observed rho.
double update_damping(double lambda, double rho, const LMConfig& config);

/// Runs max_epochs epochs (or until the gradient tolerance is met).
///
/// Throws SolverError if the initial residuals are not finite or a step cannot be factored;
/// exceptions thrown by the provider propagate. `state`, when provided, holds the progress
/// made so far even when an exception escapes.
LMState run_lm(const ResidualProvider& provider, const VectorXd& initial, const LMConfig& config = {},
               LMState* state = nullptr);

/// CSV with header epoch,V,lambda,rho,accepted,wall_ms,predicted_flops.
void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history);

}  // namespace freerun
