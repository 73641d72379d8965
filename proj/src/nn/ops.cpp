#include "ssc/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssc::nn {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

// --- GEMM --------------------------------------------------------------------

namespace {

constexpr int kColBlock = 256;

template <typename T>
void transpose(int rows, int cols, const T* src, T* dst) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) dst[static_cast<std::size_t>(c) * rows + r] =
        src[static_cast<std::size_t>(r) * cols + c];
}

}  // namespace

template <typename T>
void gemm_accumulate(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int j0 = 0; j0 < n; j0 += kColBlock) {
    const int jn = std::min(kColBlock, n - j0);
    int i = 0;
    for (; i + 4 <= m; i += 4) {
      T* __restrict c0 = c + static_cast<std::size_t>(i) * n + j0;
      T* __restrict c1 = c0 + n;
      T* __restrict c2 = c1 + n;
      T* __restrict c3 = c2 + n;
      const T* a0 = a + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const T* __restrict brow = b + static_cast<std::size_t>(p) * n + j0;
        const T x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p],
                x3 = a0[3 * k + p];
        for (int j = 0; j < jn; ++j) {
          const T bv = brow[j];
          c0[j] += x0 * bv;
          c1[j] += x1 * bv;
          c2[j] += x2 * bv;
          c3[j] += x3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      T* __restrict c0 = c + static_cast<std::size_t>(i) * n + j0;
      const T* a0 = a + static_cast<std::size_t>(i) * k;
      for (int p = 0; p < k; ++p) {
        const T* __restrict brow = b + static_cast<std::size_t>(p) * n + j0;
        const T x0 = a0[p];
        for (int j = 0; j < jn; ++j) c0[j] += x0 * brow[j];
      }
    }
  }
}

template <typename T>
void gemm_accumulate_bt(int m, int n, int k, const T* a, const T* b, T* c) {
  std::vector<T> bt(static_cast<std::size_t>(n) * k);
  transpose(n, k, b, bt.data());
  gemm_accumulate(m, n, k, a, bt.data(), c);
}

template <typename T>
void gemm_accumulate_at(int m, int n, int k, const T* a, const T* b, T* c) {
  std::vector<T> at(static_cast<std::size_t>(m) * k);
  transpose(k, m, a, at.data());
  gemm_accumulate(m, n, k, at.data(), b, c);
}

// --- convolution -------------------------------------------------------------

namespace {

struct ConvGeometry {
  int kernel = 0;
  int pad = 0;
  int out_h = 0;
  int out_w = 0;
};

template <typename T>
ConvGeometry conv_geometry(const Shape& in, const BasicTensor<T>& weights,
                           Padding padding) {
  const Shape& ws = weights.shape();
  if (ws.h != ws.w) throw ShapeError("convolution kernel must be square");
  if (ws.c != in.c)
    throw ShapeError("channel mismatch: input " + to_string(in) +
                     " weights " + to_string(ws));
  ConvGeometry g;
  g.kernel = ws.h;
  if (padding == Padding::same) {
    if (g.kernel % 2 == 0)
      throw ShapeError("same padding needs an odd kernel");
    g.pad = g.kernel / 2;
    g.out_h = in.h;
    g.out_w = in.w;
  } else {
    g.out_h = in.h - g.kernel + 1;
    g.out_w = in.w - g.kernel + 1;
  }
  if (g.out_h < 1 || g.out_w < 1)
    throw ShapeError("input " + to_string(in) + " smaller than kernel");
  return g;
}

// cols is (C·k·k) × (N·P), P = out_h·out_w.
template <typename T>
std::vector<T> im2col(const BasicTensor<T>& input, const ConvGeometry& g) {
  const Shape& s = input.shape();
  const int k = g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t ncols = plane * s.n;
  std::vector<T> cols(static_cast<std::size_t>(s.c) * k * k * ncols, T(0));
  for (int c = 0; c < s.c; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols.data() +
                 (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ncols;
        for (int n = 0; n < s.n; ++n) {
          const T* src = input.plane(n, c);
          T* dst = row + plane * n;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy + ky - g.pad;
            if (iy < 0 || iy >= s.h) continue;
            const T* srow = src + static_cast<std::size_t>(iy) * s.w;
            T* drow = dst + static_cast<std::size_t>(oy) * g.out_w;
            const int x_lo = std::max(0, g.pad - kx);
            const int x_hi = std::min(g.out_w, s.w + g.pad - kx);
            for (int ox = x_lo; ox < x_hi; ++ox) drow[ox] = srow[ox + kx - g.pad];
          }
        }
      }
  return cols;
}

template <typename T>
void col2im(const std::vector<T>& cols, const ConvGeometry& g,
            BasicTensor<T>& out) {
  const Shape& s = out.shape();
  const int k = g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t ncols = plane * s.n;
  for (int c = 0; c < s.c; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols.data() +
                       (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ncols;
        for (int n = 0; n < s.n; ++n) {
          T* dst = out.plane(n, c);
          const T* src = row + plane * n;
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy + ky - g.pad;
            if (iy < 0 || iy >= s.h) continue;
            T* drow = dst + static_cast<std::size_t>(iy) * s.w;
            const T* srow = src + static_cast<std::size_t>(oy) * g.out_w;
            const int x_lo = std::max(0, g.pad - kx);
            const int x_hi = std::min(g.out_w, s.w + g.pad - kx);
            for (int ox = x_lo; ox < x_hi; ++ox) drow[ox + kx - g.pad] += srow[ox];
          }
        }
      }
}

}  // namespace

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input,
                            const BasicTensor<T>& weights,
                            std::span<const T> bias, Padding padding) {
  const Shape& in = input.shape();
  const ConvGeometry g = conv_geometry(in, weights, padding);
  const int out_c = weights.shape().n;
  if (!bias.empty() && static_cast<int>(bias.size()) != out_c)
    throw ShapeError("bias length does not match output channels");
  require_finite(input, "conv_forward input");

  const std::vector<T> cols = im2col(input, g);
  const int kdim = in.c * g.kernel * g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const int ncols = static_cast<int>(plane * in.n);
  std::vector<T> result(static_cast<std::size_t>(out_c) * ncols, T(0));
  gemm_accumulate(out_c, ncols, kdim, weights.ptr(), cols.data(), result.data());

  BasicTensor<T> out(Shape{in.n, out_c, g.out_h, g.out_w});
  for (int o = 0; o < out_c; ++o) {
    const T b = bias.empty() ? T(0) : bias[o];
    const T* src = result.data() + static_cast<std::size_t>(o) * ncols;
    for (int n = 0; n < in.n; ++n) {
      T* dst = out.plane(n, o);
      const T* s = src + plane * n;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = s[p] + b;
    }
  }
  require_finite(out, "conv_forward output");
  return out;
}

template <typename T>
ConvGrads<T> conv_backward(const BasicTensor<T>& grad_out,
                           const BasicTensor<T>& cached_input,
                           const BasicTensor<T>& weights, Padding padding) {
  const Shape& in = cached_input.shape();
  const ConvGeometry g = conv_geometry(in, weights, padding);
  const int out_c = weights.shape().n;
  const Shape expected{in.n, out_c, g.out_h, g.out_w};
  if (grad_out.shape() != expected)
    throw ShapeError("conv_backward: gradient " + to_string(grad_out.shape()) +
                     " does not match forward output " + to_string(expected));

  const int kdim = in.c * g.kernel * g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const int ncols = static_cast<int>(plane * in.n);

  // dY as (out_c × N·P)
  std::vector<T> dy(static_cast<std::size_t>(out_c) * ncols);
  for (int o = 0; o < out_c; ++o)
    for (int n = 0; n < in.n; ++n)
      std::copy_n(grad_out.plane(n, o), plane,
                  dy.data() + static_cast<std::size_t>(o) * ncols + plane * n);

  ConvGrads<T> grads;
  grads.bias.assign(out_c, T(0));
  for (int o = 0; o < out_c; ++o) {
    T acc = 0;
    const T* row = dy.data() + static_cast<std::size_t>(o) * ncols;
    for (int j = 0; j < ncols; ++j) acc += row[j];
    grads.bias[o] = acc;
  }

  const std::vector<T> cols = im2col(cached_input, g);
  grads.weights = BasicTensor<T>(weights.shape());
  gemm_accumulate_bt(out_c, kdim, ncols, dy.data(), cols.data(),
                     grads.weights.ptr());

  std::vector<T> dcols(static_cast<std::size_t>(kdim) * ncols, T(0));
  gemm_accumulate_at(kdim, ncols, out_c, weights.ptr(), dy.data(), dcols.data());
  grads.input = BasicTensor<T>(in);
  col2im(dcols, g, grads.input);
  return grads;
}

// --- pooling -----------------------------------------------------------------

template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input) {
  const Shape& s = input.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0)
    throw ShapeError("maxpool2x2 needs even spatial dims, got " + to_string(s));
  PoolResult<T> r;
  r.output = BasicTensor<T>(Shape{s.n, s.c, s.h / 2, s.w / 2});
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h / 2; ++y)
        for (int x = 0; x < s.w / 2; ++x, ++o) {
          std::size_t best = input.index(n, c, 2 * y, 2 * x);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t i = input.index(n, c, 2 * y + dy, 2 * x + dx);
              if (input[i] > input[best]) best = i;
            }
          r.output[o] = input[best];
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2x2_backward(const BasicTensor<T>& grad_out,
                                   std::span<const std::uint32_t> argmax,
                                   const Shape& input_shape) {
  if (argmax.size() != grad_out.size())
    throw ShapeError("maxpool2x2_backward: argmax/gradient size mismatch");
  BasicTensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

// --- pointwise ---------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.data()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out,
                             const BasicTensor<T>& cached_input) {
  if (grad_out.shape() != cached_input.shape())
    throw ShapeError("relu_backward shape mismatch");
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(cached_input[i] > T(0))) g[i] = T(0);
  return g;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const Shape& s = logits.shape();
  BasicTensor<T> out(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (std::size_t p = 0; p < plane; ++p) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int c = 0; c < s.c; ++c) mx = std::max(mx, logits.plane(n, c)[p]);
      T sum = 0;
      for (int c = 0; c < s.c; ++c) {
        const T e = std::exp(logits.plane(n, c)[p] - mx);
        out.plane(n, c)[p] = e;
        sum += e;
      }
      for (int c = 0; c < s.c; ++c) out.plane(n, c)[p] /= sum;
    }
  require_finite(out, "softmax");
  return out;
}

template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double rate, Rng& rng,
                         bool train) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw Error("dropout rate must lie in [0, 1)");
  DropoutResult<T> r;
  if (!train || rate == 0.0) {
    r.output = input;
    return r;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  r.mask.resize(input.size());
  r.output = input;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.mask[i] = u(rng) < rate ? T(0) : keep_scale;
    r.output[i] *= r.mask[i];
  }
  return r;
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_out,
                                std::span<const T> mask) {
  if (mask.empty()) return grad_out;
  if (mask.size() != grad_out.size())
    throw ShapeError("dropout_backward mask size mismatch");
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

// --- loss --------------------------------------------------------------------

namespace {

template <typename T>
void check_loss_inputs(const BasicTensor<T>& probs, std::span<const int> targets) {
  const Shape& s = probs.shape();
  if (s.h != 1 || s.w != 1)
    throw ShapeError("loss expects (N, C, 1, 1) probabilities");
  if (static_cast<int>(targets.size()) != s.n)
    throw ShapeError("target count does not match batch size");
  for (int t : targets)
    if (t < 0 || t >= s.c) throw Error("target index out of range");
}

}  // namespace

template <typename T>
LossResult<T> weighted_cross_entropy(const BasicTensor<T>& probs,
                                     std::span<const int> targets,
                                     const LossConfig& config) {
  check_loss_inputs(probs, targets);
  const Shape& s = probs.shape();
  if (static_cast<int>(config.class_weights.size()) != s.c)
    throw Error("class weight count does not match class count");
  for (double w : config.class_weights)
    if (!(w > 0.0)) throw Error("class weights must be positive");

  LossResult<T> r;
  r.grad = BasicTensor<T>(s);
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const int y = targets[n];
    const double w = config.class_weights[y];
    const double py = std::max(static_cast<double>(probs.at(n, y, 0, 0)), kLogClamp);
    total += w * -std::log(py);
    for (int c = 0; c < s.c; ++c) {
      const double p = probs.at(n, c, 0, 0);
      r.grad.at(n, c, 0, 0) =
          static_cast<T>(w * (p - (c == y ? 1.0 : 0.0)) / s.n);
    }
  }
  r.loss = total / s.n;
  if (!std::isfinite(r.loss)) throw NonFiniteError("non-finite loss");
  return r;
}

template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> targets) {
  check_loss_inputs(probs, targets);
  double total = 0.0;
  for (int n = 0; n < probs.shape().n; ++n) {
    const double py =
        std::max(static_cast<double>(probs.at(n, targets[n], 0, 0)), kLogClamp);
    total += -std::log(py);
  }
  return total / probs.shape().n;
}

// --- optimisation ------------------------------------------------------------

void sgd_nesterov_step(std::span<const ParamRef> params, OptimizerState& state) {
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const ParamRef& p : params) state.velocity.emplace_back(p.value.size(), 0.0f);
  }
  if (state.velocity.size() != params.size())
    throw ShapeError("optimizer state holds a different number of parameters");
  const double lr = state.learning_rate;
  const double mu = state.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    std::vector<float>& v = state.velocity[i];
    if (p.grad.size() != p.value.size() || v.size() != p.value.size())
      throw ShapeError("parameter, gradient and velocity shapes differ");
    const double lambda = p.decay ? state.l2_lambda : 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]) + lambda * p.value[j];
      const double vn = mu * v[j] - lr * g;
      v[j] = static_cast<float>(vn);
      p.value[j] = static_cast<float>(p.value[j] + mu * vn - lr * g);
    }
  }
}

template <typename T>
void he_initialize(BasicTensor<T>& weights, Rng& rng) {
  const Shape& s = weights.shape();
  const std::size_t fan_in = static_cast<std::size_t>(s.c) * s.h * s.w;
  if (fan_in == 0) throw Error("he_initialize: zero fan-in");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (T& v : weights.data()) v = static_cast<T>(normal(rng));
}

#define SSC_INSTANTIATE(T)                                                     \
  template void gemm_accumulate<T>(int, int, int, const T*, const T*, T*);     \
  template void gemm_accumulate_bt<T>(int, int, int, const T*, const T*, T*);  \
  template void gemm_accumulate_at<T>(int, int, int, const T*, const T*, T*);  \
  template BasicTensor<T> conv_forward<T>(const BasicTensor<T>&,               \
                                          const BasicTensor<T>&,               \
                                          std::span<const T>, Padding);        \
  template ConvGrads<T> conv_backward<T>(const BasicTensor<T>&,                \
                                         const BasicTensor<T>&,                \
                                         const BasicTensor<T>&, Padding);      \
  template PoolResult<T> maxpool2x2<T>(const BasicTensor<T>&);                 \
  template BasicTensor<T> maxpool2x2_backward<T>(                              \
      const BasicTensor<T>&, std::span<const std::uint32_t>, const Shape&);    \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                      \
  template BasicTensor<T> relu_backward<T>(const BasicTensor<T>&,              \
                                           const BasicTensor<T>&);             \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                   \
  template DropoutResult<T> dropout<T>(const BasicTensor<T>&, double, Rng&,    \
                                       bool);                                  \
  template BasicTensor<T> dropout_backward<T>(const BasicTensor<T>&,           \
                                              std::span<const T>);             \
  template LossResult<T> weighted_cross_entropy<T>(                            \
      const BasicTensor<T>&, std::span<const int>, const LossConfig&);         \
  template double cross_entropy<T>(const BasicTensor<T>&,                      \
                                   std::span<const int>);                      \
  template void he_initialize<T>(BasicTensor<T>&, Rng&);

SSC_INSTANTIATE(float)
SSC_INSTANTIATE(double)

#undef SSC_INSTANTIATE

}  // namespace ssc::nn
