#pragma once

// Fully connected feedforward networks with the Jacobian-producing variant of backpropagation.
//
// Layers are indexed from 0. Layer l maps activations[l] (size fan_in) to activations[l + 1]
// through pre_activations[l] = W_l * activations[l] + b_l. activations[0] is the network input.
//
// Flat parameter layout (used by pack_params, unpack_params and every Jacobian column):
// layer-major; inside a layer, the weight matrix row by row, followed by that layer's biases.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "freerun/linalg.hpp"
#include "freerun/rng.hpp"

namespace freerun {

enum class Activation { tanh, identity };

struct LayerSpec {
  Index size = 1;
  Activation activation = Activation::tanh;

  bool operator==(const LayerSpec&) const = default;
};

struct NetStructure {
  Index input_size = 1;
  std::vector<LayerSpec> layers;

  /// tanh hidden layers followed by a linear output layer.
  static NetStructure mlp(Index input_size, const std::vector<Index>& hidden, Index output_size);

  /// Throws StructuralError when sizes are non-positive or no layer is present.
  void validate() const;

  Index output_size() const { return layers.back().size; }
  Index fan_in(std::size_t layer) const { return layer == 0 ? input_size : layers[layer - 1].size; }
  Index num_weights() const;
  Index num_biases() const;
  Index num_params() const { return num_weights() + num_biases(); }
  /// Offset of layer `layer`'s first weight in the flat parameter vector.
  Index param_offset(std::size_t layer) const;

  bool operator==(const NetStructure&) const = default;
};

class FeedforwardNet {
 public:
  /// All weights and biases zero.
  explicit FeedforwardNet(NetStructure structure);

  const NetStructure& structure() const { return structure_; }
  std::size_t num_layers() const { return weights_.size(); }
  Index input_size() const { return structure_.input_size; }
  Index output_size() const { return structure_.output_size(); }
  Index num_params() const { return structure_.num_params(); }

  const MatrixXd& weights(std::size_t layer) const { return weights_[layer]; }
  MatrixXd& weights(std::size_t layer) { return weights_[layer]; }
  const VectorXd& biases(std::size_t layer) const { return biases_[layer]; }
  VectorXd& biases(std::size_t layer) { return biases_[layer]; }

 private:
  NetStructure structure_;
  std::vector<MatrixXd> weights_;
  std::vector<VectorXd> biases_;
};

struct ForwardCache {
  std::vector<VectorXd> pre_activations;  // one per layer
  std::vector<VectorXd> activations;      // num_layers + 1 entries, [0] is the input

  const VectorXd& output() const { return activations.back(); }
};

/// Derivatives of the network output with respect to each layer's pre-activations.
/// layers[l] has shape output_size x layer size.
struct Sensitivities {
  std::vector<MatrixXd> layers;
};

/// Elementwise hyperbolic tangent; agrees with std::tanh to within a few ulp. `out` must not
/// alias `x`.
void tanh_into(const Eigen::Ref<const MatrixXd>& x, Eigen::Ref<MatrixXd> out);

ForwardCache forward(const FeedforwardNet& net, const Eigen::Ref<const VectorXd>& x);
/// Reuses the buffers in `cache`; no allocation once it has been sized for this net.
void forward(const FeedforwardNet& net, const Eigen::Ref<const VectorXd>& x, ForwardCache& cache);

Sensitivities backward(const FeedforwardNet& net, const ForwardCache& cache);
void backward(const FeedforwardNet& net, const ForwardCache& cache, Sensitivities& sens);

/// d(output)/d(params), shape output_size x num_params, columns in flat parameter order.
MatrixXd param_jacobian(const FeedforwardNet& net, const ForwardCache& cache, const Sensitivities& sens);
void param_jacobian(const FeedforwardNet& net, const ForwardCache& cache, const Sensitivities& sens,
                    Eigen::Ref<MatrixXd> out);

/// d(output)/d(input), shape output_size x input_size.
MatrixXd input_jacobian(const FeedforwardNet& net, const Sensitivities& sens);
void input_jacobian(const FeedforwardNet& net, const Sensitivities& sens, Eigen::Ref<MatrixXd> out);

/// Forward pass over a batch of inputs, one sample per column.
struct BatchCache {
  std::vector<MatrixXd> pre_activations;
  std::vector<MatrixXd> activations;  // [0] is the input batch

  const MatrixXd& output() const { return activations.back(); }
  Index batch_size() const { return activations.front().cols(); }
};

void forward_batch(const FeedforwardNet& net, const Eigen::Ref<const MatrixXd>& x, BatchCache& cache);

/// Parameter Jacobians for every sample of a batch. Row b * output_size + k of `param_jac` holds
/// d(output k of sample b)/d(params); `param_jac` must have batch * output_size rows and at least
/// num_params columns (extra columns are left untouched). `input_jac`, when given, is resized to
/// batch * output_size x input_size and receives d(output)/d(input) in the same row order.
void jacobian_batch(const FeedforwardNet& net, const BatchCache& cache, Eigen::Ref<JacobianMatrix> param_jac,
                    JacobianMatrix* input_jac = nullptr);

/// Weights ~ Normal(0, 1 / fan_in), biases zero.
FeedforwardNet init_params(const NetStructure& structure, Rng& rng);

VectorXd pack_params(const FeedforwardNet& net);
/// Throws DataError if `params` does not have structure.num_params() entries.
FeedforwardNet unpack_params(const Eigen::Ref<const VectorXd>& params, const NetStructure& structure);
void unpack_params_into(const Eigen::Ref<const VectorXd>& params, FeedforwardNet& net);

}  // namespace freerun
