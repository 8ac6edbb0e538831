#include "freerun/dynmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "freerun/errors.hpp"

namespace freerun {

void ModelOrders::validate() const {
  if (ny < 1) throw StructuralError("ny must be at least 1");
  if (nu < 1) throw StructuralError("nu must be at least 1");
  if (tau_d < 0 || tau_d > nu) throw StructuralError("tau_d must lie in [0, nu]");
}

void Dataset::validate(const ModelOrders& orders) const {
  if (u.rows() != y.rows()) {
    throw DataError("dataset has " + std::to_string(u.rows()) + " input rows but " + std::to_string(y.rows()) +
                    " output rows");
  }
  if (u.cols() < 1 || y.cols() < 1) throw DataError("dataset needs at least one input and one output channel");
  if (y.rows() <= orders.first_predictable()) {
    throw DataError("dataset has " + std::to_string(y.rows()) + " samples; at least " +
                    std::to_string(orders.first_predictable() + 1) + " are needed for these orders");
  }
}

ChannelScaler ChannelScaler::identity(Index channels) { return {VectorXd::Zero(channels), VectorXd::Ones(channels)}; }

MatrixXd ChannelScaler::apply(const MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

MatrixXd ChannelScaler::invert(const MatrixXd& x) const {
  return (x.array().rowwise() * scale.transpose().array()).rowwise() + mean.transpose().array();
}

Scalers Scalers::identity(Index num_inputs, Index num_outputs) {
  return {ChannelScaler::identity(num_inputs), ChannelScaler::identity(num_outputs)};
}

namespace {

ChannelScaler fit_channels(const MatrixXd& x, const char* name) {
  const Index n = x.rows();
  if (n < 2) throw DataError("need at least two samples to fit scalers");
  ChannelScaler s;
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean[c]).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw DataError(std::string("channel ") + name + std::to_string(c + 1) + " has zero variance");
    }
    s.scale[c] = sd;
  }
  return s;
}

}  // namespace

Scalers fit_scalers(const Dataset& data) { return {fit_channels(data.u, "u"), fit_channels(data.y, "y")}; }

Dataset apply_scaling(const Dataset& data, const Scalers& scalers) {
  return {scalers.u.apply(data.u), scalers.y.apply(data.y), data.sample_period};
}

MatrixXd invert_output_scaling(const MatrixXd& y, const Scalers& scalers) { return scalers.y.invert(y); }

DynamicModel DynamicModel::make(const ModelOrders& orders, Index num_inputs, Index num_outputs,
                                const std::vector<Index>& hidden) {
  orders.validate();
  auto structure = NetStructure::mlp(orders.regressor_size(num_outputs, num_inputs), hidden, num_outputs);
  return {FeedforwardNet(std::move(structure)), orders, Scalers::identity(num_inputs, num_outputs)};
}

void DynamicModel::validate() const {
  orders.validate();
  if (net.input_size() != orders.regressor_size(num_outputs(), num_inputs())) {
    throw StructuralError("network input size does not match the model orders");
  }
  if (scalers.y.mean.size() != num_outputs()) throw StructuralError("output scaler has wrong channel count");
  if ((scalers.u.scale.array() <= 0.0).any() || (scalers.y.scale.array() <= 0.0).any()) {
    throw StructuralError("scaler scales must be positive");
  }
}

VectorXd ExtendedParameters::stacked() const {
  VectorXd out(theta.size() + y0.size());
  out << theta, y0;
  return out;
}

void build_regressor(const MatrixXd& y, const MatrixXd& u, const ModelOrders& orders, Index t,
                     Eigen::Ref<VectorXd> out) {
  if (t < orders.first_predictable() || t >= y.rows()) {
    throw std::out_of_range("regressor index " + std::to_string(t) + " outside [" +
                            std::to_string(orders.first_predictable()) + ", " + std::to_string(y.rows()) + ")");
  }
  const Index ny_ch = y.cols();
  const Index nu_ch = u.cols();
  Index k = 0;
  for (Index i = 1; i <= orders.ny; ++i, k += ny_ch) out.segment(k, ny_ch) = y.row(t - i).transpose();
  for (Index i = orders.tau_d; i <= orders.nu; ++i, k += nu_ch) out.segment(k, nu_ch) = u.row(t - i).transpose();
}

VectorXd build_regressor(const MatrixXd& y, const MatrixXd& u, const ModelOrders& orders, Index t) {
  VectorXd out(orders.regressor_size(y.cols(), u.cols()));
  build_regressor(y, u, orders, t, out);
  return out;
}

namespace {

void check_shapes(const FeedforwardNet& net, const ModelOrders& orders, Index num_outputs, Index num_inputs) {
  orders.validate();
  if (net.input_size() != orders.regressor_size(num_outputs, num_inputs)) {
    throw StructuralError("network input size " + std::to_string(net.input_size()) + " does not match regressor size " +
                          std::to_string(orders.regressor_size(num_outputs, num_inputs)));
  }
  if (net.output_size() != num_outputs) throw StructuralError("network output size does not match data");
}

constexpr Index kBatch = 256;

// Regressors for samples start .. start+count-1, one per column.
void regressor_batch(const MatrixXd& y, const MatrixXd& u, const ModelOrders& orders, Index start, Index count,
                     MatrixXd& x) {
  x.resize(orders.regressor_size(y.cols(), u.cols()), count);
  for (Index b = 0; b < count; ++b) build_regressor(y, u, orders, start + b, x.col(b));
}

// Runs the free-run recursion in place on `ys`, whose initial window rows are already filled.
// When `jac` is given it receives d(ys)/d(params[, y0]) stacked over rows window_start .. N-1.
void run_free_run(const FeedforwardNet& net, const ModelOrders& orders, const MatrixXd& u, MatrixXd& ys,
                  JacobianMatrix* jac, bool with_y0) {
  const Index n = u.rows();
  const Index nyc = ys.cols();
  const Index p = orders.first_predictable();
  const Index s = orders.initial_window_start();
  const Index n_theta = net.num_params();

  ForwardCache cache;
  MatrixXd regressors;
  if (jac) regressors.resize(net.input_size(), n - p);
  VectorXd x(net.input_size());
  for (Index t = p; t < n; ++t) {
    build_regressor(ys, u, orders, t, x);
    forward(net, x, cache);
    ys.row(t) = cache.output().transpose();
    if (jac) regressors.col(t - p) = x;
  }
  if (!jac) return;

  const Index extra = with_y0 ? orders.ny * nyc : 0;
  jac->resize((n - s) * nyc, n_theta + extra);
  // Initial window: zero sensitivity to the network, and the m-th sample depends only on the
  // m-th slot of y0.
  jac->topRows(orders.ny * nyc).setZero();
  for (Index m = 0; m < extra / nyc; ++m) {
    for (Index i = 0; i < nyc; ++i) (*jac)(m* nyc + i, n_theta + m * nyc + i) = 1.0;
  }

  // Direct dependence of each simulated sample on the parameters, computed in batches. The
  // dependence through the fed-back outputs is added while the block is still in cache; it only
  // reads rows of earlier samples, which are complete by then.
  const Index cols = jac->cols();
  BatchCache batch;
  JacobianMatrix input_jac;
  for (Index start = p; start < n; start += kBatch) {
    const Index count = std::min(kBatch, n - start);
    const Index first_row = (start - s) * nyc;
    forward_batch(net, regressors.middleCols(start - p, count), batch);
    jacobian_batch(net, batch, jac->middleRows(first_row, count * nyc), &input_jac);
    if (extra > 0) jac->block(first_row, n_theta, count * nyc, extra).setZero();

    for (Index t = start; t < start + count; ++t) {
      const Index row = (t - s) * nyc;
      for (Index k = 0; k < nyc; ++k) {
        double* dst = jac->row(row + k).data();
        const double* coef = input_jac.row((t - start) * nyc + k).data();
        for (Index i = 1; i <= orders.ny; ++i) {
          for (Index b = 0; b < nyc; ++b) {
            const double c = coef[(i - 1) * nyc + b];
            const double* src = jac->row(row - i * nyc + b).data();
            for (Index j = 0; j < cols; ++j) dst[j] += c * src[j];
          }
        }
      }
    }
  }
}

}  // namespace

OneStepPrediction predict_one_step(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data) {
  check_shapes(net, orders, data.num_outputs(), data.num_inputs());
  data.validate(orders);
  const Index p = orders.first_predictable();
  const Index n = data.size();
  const Index nyc = data.num_outputs();

  OneStepPrediction out;
  out.predictions.resize(n - p, nyc);
  out.residuals.resize((n - p) * nyc);
  BatchCache cache;
  MatrixXd x;
  for (Index start = p; start < n; start += kBatch) {
    const Index count = std::min(kBatch, n - start);
    regressor_batch(data.y, data.u, orders, start, count, x);
    forward_batch(net, x, cache);
    out.predictions.middleRows(start - p, count) = cache.output().transpose();
  }
  for (Index t = p; t < n; ++t) {
    out.residuals.segment((t - p) * nyc, nyc) = (out.predictions.row(t - p) - data.y.row(t)).transpose();
  }
  return out;
}

VectorXd residuals_sp(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data) {
  return predict_one_step(net, orders, data).residuals;
}

ResidualJacobian residuals_jacobian_sp(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data) {
  check_shapes(net, orders, data.num_outputs(), data.num_inputs());
  data.validate(orders);
  const Index p = orders.first_predictable();
  const Index n = data.size();
  const Index nyc = data.num_outputs();

  ResidualJacobian out;
  out.residuals.resize((n - p) * nyc);
  out.jacobian.resize((n - p) * nyc, net.num_params());
  BatchCache cache;
  MatrixXd x;
  for (Index start = p; start < n; start += kBatch) {
    const Index count = std::min(kBatch, n - start);
    regressor_batch(data.y, data.u, orders, start, count, x);
    forward_batch(net, x, cache);
    for (Index b = 0; b < count; ++b) {
      out.residuals.segment((start - p + b) * nyc, nyc) = cache.output().col(b) - data.y.row(start + b).transpose();
    }
    jacobian_batch(net, cache, out.jacobian.middleRows((start - p) * nyc, count * nyc));
  }
  return out;
}

VectorXd measured_initial_conditions(const ModelOrders& orders, const MatrixXd& y) {
  const Index s = orders.initial_window_start();
  const Index nyc = y.cols();
  VectorXd y0(orders.ny * nyc);
  for (Index m = 0; m < orders.ny; ++m) y0.segment(m * nyc, nyc) = y.row(s + m).transpose();
  return y0;
}

MatrixXd unstack_initial_conditions(const Eigen::Ref<const VectorXd>& y0_stacked, Index num_outputs) {
  const Index rows = y0_stacked.size() / num_outputs;
  MatrixXd y0(rows, num_outputs);
  for (Index m = 0; m < rows; ++m) y0.row(m) = y0_stacked.segment(m * num_outputs, num_outputs).transpose();
  return y0;
}

MatrixXd simulate_free_run(const FeedforwardNet& net, const ModelOrders& orders, const MatrixXd& u,
                           const MatrixXd& y0) {
  check_shapes(net, orders, net.output_size(), u.cols());
  if (y0.rows() != orders.ny || y0.cols() != net.output_size()) {
    throw StructuralError("initial conditions must be ny x N_y");
  }
  const Index n = u.rows();
  if (n <= orders.first_predictable()) throw DataError("input record too short for free-run simulation");
  const Index s = orders.initial_window_start();
  MatrixXd ys = MatrixXd::Constant(n, net.output_size(), std::numeric_limits<double>::quiet_NaN());
  ys.middleRows(s, orders.ny) = y0;
  run_free_run(net, orders, u, ys, nullptr, false);
  return ys;
}

namespace {

MatrixXd seeded_simulation(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data,
                           const Eigen::Ref<const VectorXd>& y0_stacked) {
  check_shapes(net, orders, data.num_outputs(), data.num_inputs());
  data.validate(orders);
  if (y0_stacked.size() != orders.ny * data.num_outputs()) {
    throw StructuralError("initial condition vector must have ny * N_y entries");
  }
  MatrixXd ys = MatrixXd::Constant(data.size(), data.num_outputs(), std::numeric_limits<double>::quiet_NaN());
  ys.middleRows(orders.initial_window_start(), orders.ny) = unstack_initial_conditions(y0_stacked, data.num_outputs());
  return ys;
}

VectorXd stacked_errors(const MatrixXd& ys, const MatrixXd& y, Index from) {
  const Index rows = ys.rows() - from;
  const Index nyc = ys.cols();
  VectorXd e(rows * nyc);
  for (Index t = 0; t < rows; ++t) e.segment(t * nyc, nyc) = (ys.row(from + t) - y.row(from + t)).transpose();
  return e;
}

}  // namespace

VectorXd residuals_p(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data,
                     const Eigen::Ref<const VectorXd>& y0_stacked) {
  MatrixXd ys = seeded_simulation(net, orders, data, y0_stacked);
  run_free_run(net, orders, data.u, ys, nullptr, false);
  return stacked_errors(ys, data.y, orders.initial_window_start());
}

ResidualJacobian residuals_jacobian_p(const FeedforwardNet& net, const ModelOrders& orders, const Dataset& data,
                                      const Eigen::Ref<const VectorXd>& y0_stacked, bool estimate_y0) {
  MatrixXd ys = seeded_simulation(net, orders, data, y0_stacked);
  ResidualJacobian out;
  run_free_run(net, orders, data.u, ys, &out.jacobian, estimate_y0);
  out.residuals = stacked_errors(ys, data.y, orders.initial_window_start());
  return out;
}

MatrixXd simulate(const DynamicModel& model, const MatrixXd& u, const MatrixXd& y0) {
  MatrixXd ys = simulate_free_run(model.net, model.orders, model.scalers.u.apply(u), model.scalers.y.apply(y0));
  return model.scalers.y.invert(ys);
}

}  // namespace freerun
