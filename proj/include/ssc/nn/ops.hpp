#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssc/nn/tensor.hpp"

namespace ssc::nn {

enum class Padding { same, valid };

/// C(M×N) += A(M×K) · B(K×N), all row-major. Each output element accumulates
/// its K products in index order, so the result for a given element does not
/// depend on N. Tiled and whole-image inference rely on that.
template <typename T>
void gemm_accumulate(int m, int n, int k, const T* a, const T* b, T* c);

/// C(M×N) += A(M×K) · B(N×K)^T.
template <typename T>
void gemm_accumulate_bt(int m, int n, int k, const T* a, const T* b, T* c);

/// C(M×N) += A(K×M)^T · B(K×N).
template <typename T>
void gemm_accumulate_at(int m, int n, int k, const T* a, const T* b, T* c);

// --- convolution -----------------------------------------------------------

/// Stride-1 2-D convolution (cross-correlation). `weights` is (out, in, k, k)
/// with square odd-or-any k; same padding requires odd k.
template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input,
                            const BasicTensor<T>& weights,
                            std::span<const T> bias, Padding padding);

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  std::vector<T> bias;
};

template <typename T>
ConvGrads<T> conv_backward(const BasicTensor<T>& grad_out,
                           const BasicTensor<T>& cached_input,
                           const BasicTensor<T>& weights, Padding padding);

// --- pooling ---------------------------------------------------------------

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  /// Flat input index of the maximum for every output element.
  std::vector<std::uint32_t> argmax;
};

/// 2×2 max pooling with stride 2. Odd spatial dimensions are rejected.
template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_out,
                                   std::span<const std::uint32_t> argmax,
                                   const Shape& input_shape);

// --- pointwise -------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out,
                             const BasicTensor<T>& cached_input);

/// Softmax over the channel axis at every (n, h, w).
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
struct DropoutResult {
  BasicTensor<T> output;
  /// Per-element multiplier: 0 for dropped units, 1/(1-rate) for survivors.
  /// Empty in evaluation mode.
  std::vector<T> mask;
};

/// Inverted dropout. Identity when `train` is false.
template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double rate, Rng& rng,
                         bool train);

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_out,
                                std::span<const T> mask);

// --- loss ------------------------------------------------------------------

/// Per-class loss weights.
struct LossConfig {
  std::vector<double> class_weights;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  /// Gradient with respect to the pre-softmax logits.
  BasicTensor<T> grad;
};

inline constexpr double kLogClamp = 1e-12;

/// Mean over the batch of -w[y]·log p[y]. `probs` is (N, C, 1, 1).
template <typename T>
LossResult<T> weighted_cross_entropy(const BasicTensor<T>& probs,
                                     std::span<const int> targets,
                                     const LossConfig& config);

/// Unweighted reference: mean of -log p[y].
template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> targets);

// --- optimisation ----------------------------------------------------------

struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double l2_lambda = 0.0;
  /// One buffer per parameter tensor, shape-identical.
  std::vector<std::vector<float>> velocity;
};

/// A parameter buffer with its gradient. L2 applies only when `decay` is set
/// (weights yes, biases no).
struct ParamRef {
  std::span<float> value;
  std::span<const float> grad;
  bool decay = true;
};

/// Nesterov momentum step in the reformulated form
///   g ← g + λθ;  v ← μv − ηg;  θ ← θ + μv − ηg.
/// Velocity buffers are created on first use.
void sgd_nesterov_step(std::span<const ParamRef> params, OptimizerState& state);

/// Zero-mean Gaussian with variance 2 / fan_in, fan_in = in·k·k.
template <typename T>
void he_initialize(BasicTensor<T>& weights, Rng& rng);

}  // namespace ssc::nn
