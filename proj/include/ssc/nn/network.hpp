#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssc/nn/ops.hpp"

namespace ssc::nn {

enum class LayerKind { conv, dense, relu, maxpool, dropout, softmax };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

/// One entry of a network's layer table.
///
/// `conv` covers 3×3 and 1×1 layers as well as the k×k layer a dense layer
/// becomes after convolutionalisation. `dense` consumes an input of exactly
/// `in_channels × kernel × kernel` and is numerically a valid k×k convolution
/// restricted to that one position.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  Padding padding = Padding::valid;
  double rate = 0.0;

  bool has_params() const {
    return kind == LayerKind::conv || kind == LayerKind::dense;
  }
  bool operator==(const LayerSpec&) const = default;
};

LayerSpec conv_layer(int in, int out, int kernel, Padding padding);
LayerSpec dense_layer(int in_channels, int extent, int out);
LayerSpec relu_layer();
LayerSpec maxpool_layer();
LayerSpec dropout_layer(double rate);
LayerSpec softmax_layer();

/// Checks kernel sizes, channel chaining and dropout rates.
void validate_layers(const std::vector<LayerSpec>& layers);

template <typename T>
struct LayerParams {
  BasicTensor<T> weights;  // (out, in, k, k)
  std::vector<T> bias;

  bool operator==(const LayerParams&) const = default;
};

template <typename T>
struct ForwardCache {
  std::vector<BasicTensor<T>> inputs;
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<std::vector<T>> masks;
};

/// A feed-forward stack of layers together with its parameters.
template <typename T>
class BasicNetwork {
 public:
  BasicNetwork() = default;
  /// Parameters start at zero; call initialize() for He initialisation.
  explicit BasicNetwork(std::vector<LayerSpec> layers);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<LayerParams<T>>& params() { return params_; }
  const std::vector<LayerParams<T>>& params() const { return params_; }

  void initialize(Rng& rng);

  /// Runs every layer except a trailing softmax.
  BasicTensor<T> logits(const BasicTensor<T>& input, bool train = false,
                        Rng* rng = nullptr, ForwardCache<T>* cache = nullptr) const;

  /// Class probabilities (softmax over channels of logits()).
  BasicTensor<T> predict(const BasicTensor<T>& input) const;

  /// Gradients of every parameter given dLoss/dlogits.
  std::vector<LayerParams<T>> backward(const ForwardCache<T>& cache,
                                       const BasicTensor<T>& grad_logits) const;

  /// Input gradient as well, for gradient checking.
  BasicTensor<T> backward_input(const ForwardCache<T>& cache,
                                const BasicTensor<T>& grad_logits,
                                std::vector<LayerParams<T>>* grads) const;

  std::size_t parameter_count() const;

  /// Replaces the layer table keeping parameters; used by convolutionalize.
  void set_layers(std::vector<LayerSpec> layers);

  template <typename U>
  BasicNetwork<U> cast() const {
    BasicNetwork<U> out(layers_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.params()[i].weights = params_[i].weights.template cast<U>();
      out.params()[i].bias.assign(params_[i].bias.begin(), params_[i].bias.end());
    }
    return out;
  }

  bool operator==(const BasicNetwork&) const = default;

 private:
  std::size_t forward_end() const;

  std::vector<LayerSpec> layers_;
  std::vector<LayerParams<T>> params_;
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

/// Converts an (N, C, H, W) tensor to a spatial argmax per (n, h, w).
std::vector<int> argmax_channels(const Tensor& t);

}  // namespace ssc::nn
