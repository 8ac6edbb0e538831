#include "freerun/net.hpp"

#include <cmath>
#include <string>

#include "freerun/errors.hpp"

namespace freerun {

NetStructure NetStructure::mlp(Index input_size, const std::vector<Index>& hidden, Index output_size) {
  NetStructure s;
  s.input_size = input_size;
  for (Index h : hidden) s.layers.push_back({h, Activation::tanh});
  s.layers.push_back({output_size, Activation::identity});
  s.validate();
  return s;
}

void NetStructure::validate() const {
  if (input_size < 1) throw StructuralError("network input size must be positive");
  if (layers.empty()) throw StructuralError("network needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].size < 1) throw StructuralError("layer " + std::to_string(l) + " has no nodes");
  }
}

Index NetStructure::num_weights() const {
  Index n = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) n += fan_in(l) * layers[l].size;
  return n;
}

Index NetStructure::num_biases() const {
  Index n = 0;
  for (const auto& layer : layers) n += layer.size;
  return n;
}

Index NetStructure::param_offset(std::size_t layer) const {
  Index offset = 0;
  for (std::size_t l = 0; l < layer; ++l) offset += (fan_in(l) + 1) * layers[l].size;
  return offset;
}

FeedforwardNet::FeedforwardNet(NetStructure structure) : structure_(std::move(structure)) {
  structure_.validate();
  for (std::size_t l = 0; l < structure_.layers.size(); ++l) {
    const Index rows = structure_.layers[l].size;
    weights_.push_back(MatrixXd::Zero(rows, structure_.fan_in(l)));
    biases_.push_back(VectorXd::Zero(rows));
  }
}

void tanh_into(const Eigen::Ref<const MatrixXd>& x, Eigen::Ref<MatrixXd> out) {
  // Rational approximation near zero (where 1 - exp(-2|x|) would cancel), exponential form
  // elsewhere. Both branches vectorize, unlike std::tanh.
  constexpr double p0 = -9.64399179425052238628e-1;
  constexpr double p1 = -9.92877231001918586564e1;
  constexpr double p2 = -1.61468768441708447952e3;
  constexpr double q0 = 1.12811678491632931402e2;
  constexpr double q1 = 2.23548839060100448583e3;
  constexpr double q2 = 4.84406305325125486048e3;
  const auto a = x.array();
  const auto z = a.square();
  auto e = out.array();
  e = (-2.0 * a.abs()).exp();
  e = (a.abs() < 0.625)
          .select(a + a * z * (((p0 * z + p1) * z + p2) / (((z + q0) * z + q1) * z + q2)),
                  a.sign() * (1.0 - e) / (1.0 + e));
}

namespace {

void apply_activation(Activation act, const VectorXd& pre, VectorXd& out) {
  switch (act) {
    case Activation::tanh:
      out.resize(pre.size());
      tanh_into(pre, out);
      break;
    case Activation::identity:
      out = pre;
      break;
  }
}

// Activation derivative expressed through the cached output, so tanh is not re-evaluated.
void activation_derivative(Activation act, const VectorXd& activated, Eigen::Ref<VectorXd> out) {
  switch (act) {
    case Activation::tanh:
      out = 1.0 - activated.array().square();
      break;
    case Activation::identity:
      out.setOnes();
      break;
  }
}

}  // namespace

void forward(const FeedforwardNet& net, const Eigen::Ref<const VectorXd>& x, ForwardCache& cache) {
  if (x.size() != net.input_size()) {
    throw StructuralError("forward: input has " + std::to_string(x.size()) + " entries, network expects " +
                          std::to_string(net.input_size()));
  }
  const std::size_t L = net.num_layers();
  cache.pre_activations.resize(L);
  cache.activations.resize(L + 1);
  cache.activations[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    VectorXd& pre = cache.pre_activations[l];
    pre.resize(net.weights(l).rows());
    pre.noalias() = net.weights(l) * cache.activations[l];
    pre += net.biases(l);
    apply_activation(net.structure().layers[l].activation, pre, cache.activations[l + 1]);
  }
}

ForwardCache forward(const FeedforwardNet& net, const Eigen::Ref<const VectorXd>& x) {
  ForwardCache cache;
  forward(net, x, cache);
  return cache;
}

void backward(const FeedforwardNet& net, const ForwardCache& cache, Sensitivities& sens) {
  const std::size_t L = net.num_layers();
  if (cache.activations.size() != L + 1) throw StructuralError("backward: cache does not belong to this network");
  const Index nz = net.output_size();
  sens.layers.resize(L);

  VectorXd deriv(nz);
  activation_derivative(net.structure().layers[L - 1].activation, cache.activations[L], deriv);
  sens.layers[L - 1] = deriv.asDiagonal();

  for (std::size_t l = L - 1; l-- > 0;) {
    const Index size = net.structure().layers[l].size;
    deriv.resize(size);
    activation_derivative(net.structure().layers[l].activation, cache.activations[l + 1], deriv);
    MatrixXd& s = sens.layers[l];
    s.resize(nz, size);
    s.noalias() = sens.layers[l + 1] * net.weights(l + 1);
    s *= deriv.asDiagonal();
  }
}

Sensitivities backward(const FeedforwardNet& net, const ForwardCache& cache) {
  Sensitivities sens;
  backward(net, cache, sens);
  return sens;
}

void param_jacobian(const FeedforwardNet& net, const ForwardCache& cache, const Sensitivities& sens,
                    Eigen::Ref<MatrixXd> out) {
  if (out.rows() != net.output_size() || out.cols() != net.num_params()) {
    throw StructuralError("param_jacobian: output block has wrong shape");
  }
  Index offset = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const MatrixXd& s = sens.layers[l];
    const VectorXd& prev = cache.activations[l];
    const Index rows = s.cols();
    const Index cols = prev.size();
    for (Index i = 0; i < rows; ++i) {
      out.middleCols(offset + i * cols, cols).noalias() = s.col(i) * prev.transpose();
    }
    offset += rows * cols;
    out.middleCols(offset, rows) = s;
    offset += rows;
  }
}

MatrixXd param_jacobian(const FeedforwardNet& net, const ForwardCache& cache, const Sensitivities& sens) {
  MatrixXd out(net.output_size(), net.num_params());
  param_jacobian(net, cache, sens, out);
  return out;
}

void input_jacobian(const FeedforwardNet& net, const Sensitivities& sens, Eigen::Ref<MatrixXd> out) {
  out.noalias() = sens.layers[0] * net.weights(0);
}

MatrixXd input_jacobian(const FeedforwardNet& net, const Sensitivities& sens) {
  MatrixXd out(net.output_size(), net.input_size());
  input_jacobian(net, sens, out);
  return out;
}

void forward_batch(const FeedforwardNet& net, const Eigen::Ref<const MatrixXd>& x, BatchCache& cache) {
  if (x.rows() != net.input_size()) throw StructuralError("forward_batch: input rows do not match the network");
  const std::size_t L = net.num_layers();
  cache.pre_activations.resize(L);
  cache.activations.resize(L + 1);
  cache.activations[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    MatrixXd& pre = cache.pre_activations[l];
    pre.noalias() = net.weights(l) * cache.activations[l];
    pre.colwise() += net.biases(l);
    MatrixXd& act = cache.activations[l + 1];
    if (net.structure().layers[l].activation == Activation::tanh) {
      act.resize(pre.rows(), pre.cols());
      tanh_into(pre, act);
    } else {
      act = pre;
    }
  }
}

void jacobian_batch(const FeedforwardNet& net, const BatchCache& cache, Eigen::Ref<JacobianMatrix> param_jac,
                    JacobianMatrix* input_jac) {
  const std::size_t L = net.num_layers();
  const Index nz = net.output_size();
  const Index batch = cache.batch_size();
  if (cache.activations.size() != L + 1) throw StructuralError("jacobian_batch: cache does not belong to this network");
  if (param_jac.rows() != batch * nz || param_jac.cols() < net.num_params()) {
    throw StructuralError("jacobian_batch: output block has wrong shape");
  }
  if (input_jac) input_jac->resize(batch * nz, net.input_size());

  std::vector<MatrixXd> deriv(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (net.structure().layers[l].activation == Activation::tanh) {
      deriv[l] = 1.0 - cache.activations[l + 1].array().square();
    } else {
      deriv[l] = MatrixXd::Ones(cache.activations[l + 1].rows(), batch);
    }
  }

  MatrixXd sens;
  MatrixXd next;
  for (Index k = 0; k < nz; ++k) {
    sens = MatrixXd::Zero(nz, batch);
    sens.row(k) = deriv[L - 1].row(k);
    for (std::size_t l = L; l-- > 0;) {
      const MatrixXd& prev = cache.activations[l];
      const Index rows = sens.rows();
      const Index cols = prev.rows();
      const Index offset = net.structure().param_offset(l);
      for (Index b = 0; b < batch; ++b) {
        double* out = &param_jac(b * nz + k, offset);
        const double* h = prev.col(b).data();
        const double* s = sens.col(b).data();
        for (Index i = 0; i < rows; ++i) {
          const double si = s[i];
          double* w = out + i * cols;
          for (Index j = 0; j < cols; ++j) w[j] = si * h[j];
        }
        for (Index i = 0; i < rows; ++i) out[rows * cols + i] = s[i];
      }
      if (l > 0) {
        next.noalias() = net.weights(l).transpose() * sens;
        sens = next.cwiseProduct(deriv[l - 1]);
      } else if (input_jac) {
        next.noalias() = net.weights(0).transpose() * sens;
        for (Index b = 0; b < batch; ++b) input_jac->row(b * nz + k) = next.col(b).transpose();
      }
    }
  }
}

FeedforwardNet init_params(const NetStructure& structure, Rng& rng) {
  FeedforwardNet net(structure);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    MatrixXd& w = net.weights(l);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(w.cols())));
    // Row-major draw order so the stream maps onto the flat parameter layout.
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
  }
  return net;
}

VectorXd pack_params(const FeedforwardNet& net) {
  VectorXd params(net.num_params());
  Index k = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const MatrixXd& w = net.weights(l);
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) params[k++] = w(i, j);
    }
    params.segment(k, w.rows()) = net.biases(l);
    k += w.rows();
  }
  return params;
}

void unpack_params_into(const Eigen::Ref<const VectorXd>& params, FeedforwardNet& net) {
  if (params.size() != net.num_params()) {
    throw DataError("parameter vector has " + std::to_string(params.size()) + " entries, network needs " +
                    std::to_string(net.num_params()));
  }
  Index k = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    MatrixXd& w = net.weights(l);
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = params[k++];
    }
    net.biases(l) = params.segment(k, w.rows());
    k += w.rows();
  }
}

FeedforwardNet unpack_params(const Eigen::Ref<const VectorXd>& params, const NetStructure& structure) {
  FeedforwardNet net(structure);
  unpack_params_into(params, net);
  return net;
}

}  // namespace freerun
