#include "ssc/nn/network.hpp"

namespace ssc::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool2x2";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::conv, LayerKind::dense, LayerKind::relu,
                      LayerKind::maxpool, LayerKind::dropout, LayerKind::softmax})
    if (s == to_string(k)) return k;
  throw Error("unknown layer kind '" + s + "'");
}

LayerSpec conv_layer(int in, int out, int kernel, Padding padding) {
  return LayerSpec{LayerKind::conv, in, out, kernel, padding, 0.0};
}
LayerSpec dense_layer(int in_channels, int extent, int out) {
  return LayerSpec{LayerKind::dense, in_channels, out, extent, Padding::valid, 0.0};
}
LayerSpec relu_layer() { return LayerSpec{LayerKind::relu}; }
LayerSpec maxpool_layer() { return LayerSpec{LayerKind::maxpool}; }
LayerSpec dropout_layer(double rate) {
  LayerSpec s{LayerKind::dropout};
  s.rate = rate;
  return s;
}
LayerSpec softmax_layer() { return LayerSpec{LayerKind::softmax}; }

void validate_layers(const std::vector<LayerSpec>& layers) {
  int channels = -1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::dense:
        if (l.kernel < 1 || l.in_channels < 1 || l.out_channels < 1)
          throw Error(where + "non-positive kernel or channel count");
        if (l.kind == LayerKind::conv && l.padding == Padding::same &&
            l.kernel % 2 == 0)
          throw Error(where + "same padding needs an odd kernel");
        if (channels >= 0 && channels != l.in_channels)
          throw Error(where + "expects " + std::to_string(l.in_channels) +
                      " input channels, previous layer gives " +
                      std::to_string(channels));
        channels = l.out_channels;
        break;
      case LayerKind::dropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0))
          throw Error(where + "dropout rate must lie in [0, 1)");
        break;
      case LayerKind::softmax:
        if (i + 1 != layers.size()) throw Error(where + "softmax must be last");
        break;
      default:
        break;
    }
  }
}

template <typename T>
BasicNetwork<T>::BasicNetwork(std::vector<LayerSpec> layers)
    : layers_(std::move(layers)) {
  validate_layers(layers_);
  params_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    if (!l.has_params()) continue;
    params_[i].weights =
        BasicTensor<T>(Shape{l.out_channels, l.in_channels, l.kernel, l.kernel});
    params_[i].bias.assign(l.out_channels, T(0));
  }
}

template <typename T>
void BasicNetwork<T>::set_layers(std::vector<LayerSpec> layers) {
  if (layers.size() != layers_.size())
    throw Error("set_layers: layer count changed");
  validate_layers(layers);
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].has_params() != layers_[i].has_params())
      throw Error("set_layers: parameter layout changed");
  layers_ = std::move(layers);
}

template <typename T>
void BasicNetwork<T>::initialize(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i].has_params()) continue;
    he_initialize(params_[i].weights, rng);
    std::fill(params_[i].bias.begin(), params_[i].bias.end(), T(0));
  }
}

template <typename T>
std::size_t BasicNetwork<T>::forward_end() const {
  if (!layers_.empty() && layers_.back().kind == LayerKind::softmax)
    return layers_.size() - 1;
  return layers_.size();
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::logits(const BasicTensor<T>& input, bool train,
                                       Rng* rng, ForwardCache<T>* cache) const {
  const std::size_t end = forward_end();
  if (cache) {
    cache->inputs.assign(end, {});
    cache->argmax.assign(end, {});
    cache->masks.assign(end, {});
  }
  BasicTensor<T> x = input;
  for (std::size_t i = 0; i < end; ++i) {
    const LayerSpec& l = layers_[i];
    if (cache) cache->inputs[i] = x;
    switch (l.kind) {
      case LayerKind::conv:
        x = conv_forward<T>(x, params_[i].weights, params_[i].bias, l.padding);
        break;
      case LayerKind::dense:
        if (x.shape().h != l.kernel || x.shape().w != l.kernel)
          throw ShapeError("dense layer " + std::to_string(i) + " expects " +
                           std::to_string(l.kernel) + "x" +
                           std::to_string(l.kernel) + " input, got " +
                           to_string(x.shape()));
        x = conv_forward<T>(x, params_[i].weights, params_[i].bias, Padding::valid);
        break;
      case LayerKind::relu:
        x = relu(x);
        break;
      case LayerKind::maxpool: {
        PoolResult<T> p = maxpool2x2(x);
        if (cache) cache->argmax[i] = std::move(p.argmax);
        x = std::move(p.output);
        break;
      }
      case LayerKind::dropout: {
        if (train && !rng) throw Error("training-mode dropout needs an rng");
        Rng dummy;
        DropoutResult<T> d = dropout(x, l.rate, rng ? *rng : dummy, train);
        if (cache) cache->masks[i] = std::move(d.mask);
        x = std::move(d.output);
        break;
      }
      case LayerKind::softmax:
        x = softmax(x);
        break;
    }
  }
  return x;
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::predict(const BasicTensor<T>& input) const {
  return softmax(logits(input));
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::backward_input(
    const ForwardCache<T>& cache, const BasicTensor<T>& grad_logits,
    std::vector<LayerParams<T>>* grads) const {
  const std::size_t end = forward_end();
  if (cache.inputs.size() != end)
    throw ShapeError("backward: cache does not belong to this network");
  if (grads) {
    grads->assign(layers_.size(), {});
  }
  BasicTensor<T> g = grad_logits;
  for (std::size_t idx = end; idx-- > 0;) {
    const LayerSpec& l = layers_[idx];
    const BasicTensor<T>& in = cache.inputs[idx];
    switch (l.kind) {
      case LayerKind::conv:
      case LayerKind::dense: {
        const Padding pad = l.kind == LayerKind::conv ? l.padding : Padding::valid;
        ConvGrads<T> cg = conv_backward(g, in, params_[idx].weights, pad);
        if (grads) {
          (*grads)[idx].weights = std::move(cg.weights);
          (*grads)[idx].bias = std::move(cg.bias);
        }
        g = std::move(cg.input);
        break;
      }
      case LayerKind::relu:
        g = relu_backward(g, in);
        break;
      case LayerKind::maxpool:
        g = maxpool2x2_backward<T>(g, cache.argmax[idx], in.shape());
        break;
      case LayerKind::dropout:
        g = dropout_backward<T>(g, cache.masks[idx]);
        break;
      case LayerKind::softmax:
        throw Error("backward through an inner softmax is not supported");
    }
  }
  return g;
}

template <typename T>
std::vector<LayerParams<T>> BasicNetwork<T>::backward(
    const ForwardCache<T>& cache, const BasicTensor<T>& grad_logits) const {
  std::vector<LayerParams<T>> grads;
  backward_input(cache, grad_logits, &grads);
  return grads;
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.weights.size() + p.bias.size();
  return n;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;

std::vector<int> argmax_channels(const Tensor& t) {
  const Shape& s = t.shape();
  std::vector<int> out(static_cast<std::size_t>(s.n) * s.plane());
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (std::size_t p = 0; p < plane; ++p) {
      int best = 0;
      for (int c = 1; c < s.c; ++c)
        if (t.plane(n, c)[p] > t.plane(n, best)[p]) best = c;
      out[n * plane + p] = best;
    }
  return out;
}

}  // namespace ssc::nn
