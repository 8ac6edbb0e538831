#include "freerun/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "freerun/errors.hpp"

namespace freerun {

SeriesParallelProvider::SeriesParallelProvider(const NetStructure& structure, const ModelOrders& orders,
                                               const Dataset& data)
    : net_(structure), orders_(orders), data_(data) {
  data_.validate(orders_);
}

VectorXd SeriesParallelProvider::residuals(const VectorXd& params) const {
  unpack_params_into(params, net_);
  return residuals_sp(net_, orders_, data_);
}

void SeriesParallelProvider::residuals_and_jacobian(const VectorXd& params, VectorXd& e, JacobianMatrix& jac) const {
  unpack_params_into(params, net_);
  auto rj = residuals_jacobian_sp(net_, orders_, data_);
  e = std::move(rj.residuals);
  jac = std::move(rj.jacobian);
}

double SeriesParallelProvider::flops_per_epoch() const {
  return static_cast<double>(
      predict_flops(net_dims(net_.structure(), orders_, data_.size()), TrainingMethod::sp).total);
}

ParallelProvider::ParallelProvider(const NetStructure& structure, const ModelOrders& orders, const Dataset& data,
                                   bool estimate_y0, VectorXd fixed_y0)
    : net_(structure), orders_(orders), data_(data), estimate_y0_(estimate_y0), fixed_y0_(std::move(fixed_y0)) {
  data_.validate(orders_);
  if (fixed_y0_.size() != orders_.ny * data_.num_outputs()) {
    throw StructuralError("initial condition vector must have ny * N_y entries");
  }
}

Index ParallelProvider::num_params() const { return net_.num_params() + (estimate_y0_ ? fixed_y0_.size() : 0); }

VectorXd ParallelProvider::residuals(const VectorXd& params) const {
  const Index nt = net_.num_params();
  unpack_params_into(params.head(nt), net_);
  if (estimate_y0_) return residuals_p(net_, orders_, data_, params.tail(fixed_y0_.size()));
  return residuals_p(net_, orders_, data_, fixed_y0_);
}

void ParallelProvider::residuals_and_jacobian(const VectorXd& params, VectorXd& e, JacobianMatrix& jac) const {
  const Index nt = net_.num_params();
  unpack_params_into(params.head(nt), net_);
  auto rj = estimate_y0_ ? residuals_jacobian_p(net_, orders_, data_, params.tail(fixed_y0_.size()), true)
                         : residuals_jacobian_p(net_, orders_, data_, fixed_y0_, false);
  e = std::move(rj.residuals);
  jac = std::move(rj.jacobian);
}

double ParallelProvider::flops_per_epoch() const {
  const auto method = estimate_y0_ ? TrainingMethod::p_phi : TrainingMethod::p_theta;
  return static_cast<double>(predict_flops(net_dims(net_.structure(), orders_, data_.size()), method).total);
}

NetDims net_dims(const NetStructure& structure, const ModelOrders& orders, Index n_samples) {
  NetDims d;
  d.n_samples = n_samples;
  d.n_inputs = structure.input_size;
  d.n_outputs = structure.output_size();
  d.output_lags = orders.ny;
  for (const auto& layer : structure.layers) d.layer_sizes.push_back(layer.size);
  return d;
}

TrainResult train_model(const Dataset& data, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  options.orders.validate();
  data.validate(options.orders);

  TrainResult result{
      DynamicModel::make(options.orders, data.num_inputs(), data.num_outputs(), options.hidden), {}, {}, {}, 0.0, {}};
  DynamicModel& model = result.model;
  if (options.normalize) model.scalers = fit_scalers(data);
  const Dataset scaled = apply_scaling(data, model.scalers);

  Rng rng = make_rng(options.seed);
  model.net = init_params(model.net.structure(), rng);
  result.initial_params = pack_params(model.net);
  result.y0 = measured_initial_conditions(options.orders, scaled.y);

  const NetStructure& structure = model.net.structure();
  try {
    switch (options.method) {
      case TrainingMethod::sp: {
        SeriesParallelProvider provider(structure, options.orders, scaled);
        run_lm(provider, result.initial_params, options.lm, &result.state);
        unpack_params_into(result.state.params, model.net);
        break;
      }
      case TrainingMethod::p_theta: {
        ParallelProvider provider(structure, options.orders, scaled, false, result.y0);
        run_lm(provider, result.initial_params, options.lm, &result.state);
        unpack_params_into(result.state.params, model.net);
        break;
      }
      case TrainingMethod::p_phi: {
        ParallelProvider provider(structure, options.orders, scaled, true, result.y0);
        VectorXd initial(provider.num_params());
        initial << result.initial_params, result.y0;
        run_lm(provider, initial, options.lm, &result.state);
        const Index nt = structure.num_params();
        unpack_params_into(result.state.params.head(nt), model.net);
        result.y0 = result.state.params.tail(result.y0.size());
        break;
      }
    }
  } catch (const SolverError& e) {
    result.solver_error = e.what();
    if (result.state.params.size() >= structure.num_params()) {
      unpack_params_into(result.state.params.head(structure.num_params()), model.net);
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ValidationResult validate_model(const DynamicModel& model, const Dataset& data) {
  model.validate();
  data.validate(model.orders);
  if (data.num_inputs() != model.num_inputs() || data.num_outputs() != model.num_outputs()) {
    throw DataError("validation data has " + std::to_string(data.num_inputs()) + " inputs and " +
                    std::to_string(data.num_outputs()) + " outputs; model expects " +
                    std::to_string(model.num_inputs()) + " and " + std::to_string(model.num_outputs()));
  }
  const Index s = model.orders.initial_window_start();
  const Index p = model.orders.first_predictable();
  ValidationResult out;
  out.simulation = simulate(model, data.u, data.y.middleRows(s, model.orders.ny));
  const MatrixXd sim = out.simulation.bottomRows(data.size() - p);
  out.mse = sim.allFinite() ? mse(data.y.bottomRows(data.size() - p), sim) : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace freerun
