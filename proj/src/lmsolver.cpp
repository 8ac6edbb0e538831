#include "freerun/lmsolver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "freerun/errors.hpp"

namespace freerun {

void LMConfig::validate() const {
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be positive");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be positive");
  if (!(shrink > 0.0 && shrink < 1.0 && grow > 1.0)) throw std::invalid_argument("need 0 < shrink < 1 < grow");
  if (!(accept_threshold > 0.0 && accept_threshold < agreement_low && agreement_low < agreement_high)) {
    throw std::invalid_argument("need 0 < accept_threshold < agreement_low < agreement_high");
  }
  if (!(diag_floor > 0.0)) throw std::invalid_argument("diag_floor must be positive");
}

namespace {

MatrixXd normal_matrix(const JacobianMatrix& jac) {
  MatrixXd jtj = MatrixXd::Zero(jac.cols(), jac.cols());
  jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
  return jtj;
}

}  // namespace

VectorXd solve_normal_step(const MatrixXd& jtj, const VectorXd& gradient, double& lambda, const LMConfig& config,
                           double* model_decrease) {
  const Index n = jtj.rows();
  const VectorXd diag = jtj.diagonal().cwiseMax(config.diag_floor);
  for (int attempt = 0; attempt <= config.max_factorization_retries; ++attempt) {
    MatrixXd damped = jtj;
    damped.diagonal() += lambda * diag;
    Eigen::LLT<MatrixXd, Eigen::Lower> llt(damped);
    if (llt.info() == Eigen::Success) {
      VectorXd delta = llt.solve(-gradient);
      if (delta.allFinite()) {
        if (model_decrease) {
          // phi(0) - phi(delta) rewritten with the normal equations; nonnegative by construction.
          const VectorXd jtj_delta = jtj.selfadjointView<Eigen::Lower>() * delta;
          *model_decrease = 0.5 * delta.dot(jtj_delta) + lambda * delta.dot(diag.cwiseProduct(delta));
        }
        return delta;
      }
    }
    if (attempt == config.max_factorization_retries) break;
    lambda *= config.grow;
  }
  throw SolverError("damped normal matrix of size " + std::to_string(n) + " could not be factored");
}

VectorXd solve_damped_step(const JacobianMatrix& jac, const VectorXd& e, double& lambda, const LMConfig& config) {
  if (jac.rows() != e.size()) throw StructuralError("Jacobian rows must match residual count");
  return solve_normal_step(normal_matrix(jac), jac.transpose() * e, lambda, config);
}

double agreement_ratio(double v_old, double v_new, double model_decrease) {
  constexpr double kReject = -std::numeric_limits<double>::infinity();
  if (!std::isfinite(v_new) || !std::isfinite(v_old)) return kReject;
  if (!(model_decrease > 0.0) || !std::isfinite(model_decrease)) return kReject;
  return (v_old - v_new) / model_decrease;
}

double update_damping(double lambda, double rho, const LMConfig& config) {
  const bool good = rho > config.agreement_high;
  const bool poor = rho < config.agreement_low;
  switch (config.schedule_mode) {
    case ScheduleMode::fletcher:
      if (good) return lambda * config.shrink;
      if (poor) return lambda * config.grow;
      return lambda;
    case ScheduleMode::paper_literal:
      if (good) return lambda * config.grow;
      if (poor) return lambda * config.shrink;
      return lambda;
  }
  return lambda;
}

LMState run_lm(const ResidualProvider& provider, const VectorXd& initial, const LMConfig& config, LMState* state) {
  config.validate();
  if (initial.size() != provider.num_params()) throw StructuralError("initial parameter vector has wrong size");

  LMState local;
  LMState& st = state ? *state : local;
  st = LMState{};
  st.params = initial;
  st.lambda = config.lambda0;

  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  const double flops = provider.flops_per_epoch();

  VectorXd e;
  JacobianMatrix jac;
  provider.residuals_and_jacobian(st.params, e, jac);
  if (jac.rows() != e.size() || jac.cols() != st.params.size()) {
    throw StructuralError("provider returned a Jacobian of the wrong shape");
  }
  st.objective = 0.5 * e.squaredNorm();
  if (!std::isfinite(st.objective) || !jac.allFinite()) {
    throw SolverError("residuals at the initial point are not finite");
  }

  MatrixXd jtj = normal_matrix(jac);
  VectorXd gradient = jac.transpose() * e;
  st.history.push_back({0, st.objective, st.lambda, std::numeric_limits<double>::quiet_NaN(), true, elapsed_ms(), 0.0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.gradient_tolerance > 0.0 && gradient.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) break;

    double lambda = st.lambda;
    double model_decrease = 0.0;
    const VectorXd delta = solve_normal_step(jtj, gradient, lambda, config, &model_decrease);
    const VectorXd trial = st.params + delta;
    const VectorXd e_trial = provider.residuals(trial);
    const double v_trial = e_trial.allFinite() ? 0.5 * e_trial.squaredNorm() : std::numeric_limits<double>::infinity();

    const double rho = agreement_ratio(st.objective, v_trial, model_decrease);
    st.lambda = update_damping(lambda, rho, config);
    const bool accepted = rho > config.accept_threshold;
    if (accepted) {
      st.params = trial;
      provider.residuals_and_jacobian(st.params, e, jac);
      jtj = normal_matrix(jac);
      gradient.noalias() = jac.transpose() * e;
      st.objective = 0.5 * e.squaredNorm();
    }
    st.epoch = epoch;
    st.history.push_back({epoch, st.objective, lambda, rho, accepted, elapsed_ms(), flops});
  }
  return st;
}

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  const auto old_precision = os.precision(17);
  os << "epoch,V,lambda,rho,accepted,wall_ms,predicted_flops\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.objective << ',' << r.lambda << ',' << r.rho << ',' << (r.accepted ? 1 : 0) << ','
       << r.wall_ms << ',' << r.predicted_flops << '\n';
  }
  os.precision(old_precision);
}

}  // namespace freerun
