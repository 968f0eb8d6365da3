#include "crossgen/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "crossgen/simd/kernels.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::tensor {

namespace {

// ---- GEMM plumbing: float goes through the dispatched kernels, double
// through the scalar reference.

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>)
    simd::active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
  else
    simd::reference::gemm_nn<T>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>)
    simd::active().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc);
  else
    simd::reference::gemm_tn<T>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

// ---- im2col geometry. The image is [C,H,W]; the sliding grid has
// out_h x out_w positions. Column matrix is [C*k*k, out_h*out_w].

struct Geometry {
  std::size_t channels, height, width, kernel, stride, padding, out_h, out_w;
};

template <typename T>
void im2col(const T* image, const Geometry& g, T* cols) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        T* row = cols + ((c * g.kernel + kh) * g.kernel + kw) * plane;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(g.height) &&
                                iw < static_cast<std::ptrdiff_t>(g.width);
            row[oh * g.out_w + ow] = inside ? image[(c * g.height + ih) * g.width + iw] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename T>
void col2im(const T* cols, const Geometry& g, T* image) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        const T* row = cols + ((c * g.kernel + kh) * g.kernel + kw) * plane;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + kh) - static_cast<std::ptrdiff_t>(g.padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kw) - static_cast<std::ptrdiff_t>(g.padding);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + ih) * g.width + iw] += row[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

template <typename T>
const BasicTensor<T>& value_of(const std::shared_ptr<detail::Node<T>>& node) {
  return node->value;
}

template <typename T>
bool wants_grad(const std::shared_ptr<detail::Node<T>>& node) {
  return node && node->requires_grad;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

// Runs `op` on a rank-4 view of a rank-3 sample and restores the rank.
template <typename T, typename Op>
BasicVar<T> with_batch_axis(const BasicVar<T>& input, Op op) {
  if (input.value().rank() == 3) {
    Shape s = input.shape();
    s.insert(s.begin(), 1);
    auto out = op(reshape(input, s));
    Shape o = out.shape();
    o.erase(o.begin());
    return reshape(out, o);
  }
  return op(input);
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------- conv2d

template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias,
                   Conv2dOptions options) {
  return with_batch_axis(input, [&](const BasicVar<T>& x) {
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    require(xs.size() == 4, "conv2d: input must be [B,C,H,W], got " + to_string(xs));
    require(ws.size() == 4 && ws[2] == ws[3], "conv2d: weight must be [O,C,k,k], got " + to_string(ws));
    require(ws[1] == xs[1], "conv2d: input has " + std::to_string(xs[1]) + " channels, weight expects " +
                                std::to_string(ws[1]));
    require(options.stride >= 1, "conv2d: stride must be >= 1");
    const std::size_t k = ws[2];
    require(xs[2] + 2 * options.padding >= k && xs[3] + 2 * options.padding >= k,
            "conv2d: kernel larger than padded input");
    if (bias.defined()) require(bias.shape() == Shape{ws[0]}, "conv2d: bias must be [O]");

    const std::size_t batch = xs[0], out_c = ws[0];
    Geometry g{xs[1], xs[2], xs[3], k, options.stride, options.padding,
               (xs[2] + 2 * options.padding - k) / options.stride + 1,
               (xs[3] + 2 * options.padding - k) / options.stride + 1};
    const std::size_t plane = g.out_h * g.out_w;
    const std::size_t patch = g.channels * k * k;

    BasicTensor<T> out({batch, out_c, g.out_h, g.out_w});
    std::vector<T> cols(patch * plane);
    const T* wdata = weight.value().data().data();
    for (std::size_t b = 0; b < batch; ++b) {
      T* ob = out.data().data() + b * out_c * plane;
      if (bias.defined())
        for (std::size_t o = 0; o < out_c; ++o) std::fill_n(ob + o * plane, plane, bias.value()[o]);
      im2col(x.value().data().data() + b * g.channels * g.height * g.width, g, cols.data());
      gemm_nn<T>(out_c, plane, patch, wdata, patch, cols.data(), plane, ob, plane);
    }

    return BasicVar<T>::from_op(std::move(out), {x, weight, bias}, [g, batch, out_c, plane, patch](auto& node) {
      const auto& dy = node.grad;
      const auto& xin = node.inputs[0];
      const auto& win = node.inputs[1];
      const auto& bin = node.inputs[2];
      const std::size_t image = g.channels * g.height * g.width;
      std::vector<T> cols(patch * plane);
      if (wants_grad(xin)) {
        auto& dx = xin->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
          std::fill(cols.begin(), cols.end(), T(0));
          gemm_tn<T>(patch, plane, out_c, win->value.data().data(), patch, dy.data().data() + b * out_c * plane,
                     plane, cols.data(), plane);
          col2im(cols.data(), g, dx.data().data() + b * image);
        }
      }
      if (wants_grad(win)) {
        auto& dw = win->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
          im2col(xin->value.data().data() + b * image, g, cols.data());
          auto cols_t = transpose(cols.data(), patch, plane);
          gemm_nn<T>(out_c, patch, plane, dy.data().data() + b * out_c * plane, plane, cols_t.data(), patch,
                     dw.data().data(), patch);
        }
      }
      if (wants_grad(bin)) {
        auto& db = bin->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t o = 0; o < out_c; ++o) {
            const T* row = dy.data().data() + (b * out_c + o) * plane;
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) acc += row[i];
            db[o] += acc;
          }
      }
    });
  });
}

// ------------------------------------------------------ conv_transpose2d

template <typename T>
BasicVar<T> conv_transpose2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias,
                             Conv2dOptions options) {
  return with_batch_axis(input, [&](const BasicVar<T>& x) {
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    require(xs.size() == 4, "conv_transpose2d: input must be [B,C,H,W], got " + to_string(xs));
    require(ws.size() == 4 && ws[2] == ws[3], "conv_transpose2d: weight must be [C_in,C_out,k,k], got " +
                                                  to_string(ws));
    require(ws[0] == xs[1], "conv_transpose2d: input has " + std::to_string(xs[1]) +
                                " channels, weight expects " + std::to_string(ws[0]));
    require(options.stride >= 1, "conv_transpose2d: stride must be >= 1");
    const std::size_t k = ws[2];
    const auto extent = [&](std::size_t h) {
      return static_cast<std::ptrdiff_t>((h - 1) * options.stride + k) -
             2 * static_cast<std::ptrdiff_t>(options.padding);
    };
    require(extent(xs[2]) >= 1 && extent(xs[3]) >= 1, "conv_transpose2d: non-positive output extent");
    if (bias.defined()) require(bias.shape() == Shape{ws[1]}, "conv_transpose2d: bias must be [C_out]");

    const std::size_t batch = xs[0], in_c = xs[1], out_c = ws[1];
    const auto out_h = static_cast<std::size_t>(extent(xs[2]));
    const auto out_w = static_cast<std::size_t>(extent(xs[3]));
    // The output image plays the role of the conv input in im2col terms.
    Geometry g{out_c, out_h, out_w, k, options.stride, options.padding, xs[2], xs[3]};
    const std::size_t plane = xs[2] * xs[3];
    const std::size_t patch = out_c * k * k;
    const std::size_t out_plane = out_h * out_w;

    BasicTensor<T> out({batch, out_c, out_h, out_w});
    std::vector<T> cols(patch * plane);
    for (std::size_t b = 0; b < batch; ++b) {
      std::fill(cols.begin(), cols.end(), T(0));
      gemm_tn<T>(patch, plane, in_c, weight.value().data().data(), patch,
                 x.value().data().data() + b * in_c * plane, plane, cols.data(), plane);
      T* ob = out.data().data() + b * out_c * out_plane;
      col2im(cols.data(), g, ob);
      if (bias.defined())
        for (std::size_t o = 0; o < out_c; ++o)
          for (std::size_t i = 0; i < out_plane; ++i) ob[o * out_plane + i] += bias.value()[o];
    }

    return BasicVar<T>::from_op(std::move(out), {x, weight, bias},
                                [g, batch, in_c, out_c, plane, patch, out_plane](auto& node) {
      const auto& dy = node.grad;
      const auto& xin = node.inputs[0];
      const auto& win = node.inputs[1];
      const auto& bin = node.inputs[2];
      std::vector<T> dcols(patch * plane);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* dyb = dy.data().data() + b * out_c * out_plane;
        if (wants_grad(xin) || wants_grad(win)) im2col(dyb, g, dcols.data());
        if (wants_grad(xin)) {
          gemm_nn<T>(in_c, plane, patch, win->value.data().data(), patch, dcols.data(), plane,
                     xin->grad_buffer().data().data() + b * in_c * plane, plane);
        }
        if (wants_grad(win)) {
          auto dcols_t = transpose(dcols.data(), patch, plane);
          gemm_nn<T>(in_c, patch, plane, xin->value.data().data() + b * in_c * plane, plane, dcols_t.data(),
                     patch, win->grad_buffer().data().data(), patch);
        }
        if (wants_grad(bin)) {
          auto& db = bin->grad_buffer();
          for (std::size_t o = 0; o < out_c; ++o) {
            T acc = T(0);
            for (std::size_t i = 0; i < out_plane; ++i) acc += dyb[o * out_plane + i];
            db[o] += acc;
          }
        }
      }
    });
  });
}

// ----------------------------------------------------------------- dense

template <typename T>
BasicVar<T> dense(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias) {
  if (input.value().rank() == 1) {
    auto out = dense(reshape(input, {1, input.shape()[0]}), weight, bias);
    return reshape(out, {out.shape()[1]});
  }
  const auto& xs = input.shape();
  const auto& ws = weight.shape();
  require(xs.size() == 2, "dense: input must be [B,n], got " + to_string(xs));
  require(ws.size() == 2 && ws[1] == xs[1], "dense: weight " + to_string(ws) + " incompatible with input " +
                                                to_string(xs));
  if (bias.defined()) require(bias.shape() == Shape{ws[0]}, "dense: bias must be [m]");
  const std::size_t batch = xs[0], n = xs[1], m = ws[0];

  BasicTensor<T> out({batch, m});
  if (bias.defined())
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(bias.value().data().data(), m, out.data().data() + b * m);
  auto w_t = transpose(weight.value().data().data(), m, n);
  gemm_nn<T>(batch, m, n, input.value().data().data(), n, w_t.data(), m, out.data().data(), m);

  return BasicVar<T>::from_op(std::move(out), {input, weight, bias}, [batch, n, m](auto& node) {
    const auto& dy = node.grad;
    const auto& xin = node.inputs[0];
    const auto& win = node.inputs[1];
    const auto& bin = node.inputs[2];
    if (wants_grad(xin))
      gemm_nn<T>(batch, n, m, dy.data().data(), m, win->value.data().data(), n, xin->grad_buffer().data().data(), n);
    if (wants_grad(win))
      gemm_tn<T>(m, n, batch, dy.data().data(), m, xin->value.data().data(), n, win->grad_buffer().data().data(), n);
    if (wants_grad(bin)) {
      auto& db = bin->grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < m; ++j) db[j] += dy[b * m + j];
    }
  });
}

// ------------------------------------------------------------- batchnorm

template <typename T>
BasicVar<T> batchnorm(const BasicVar<T>& input, const BasicVar<T>& gamma, const BasicVar<T>& beta,
                      BasicTensor<T>& running_mean, BasicTensor<T>& running_var, BatchNormMode mode,
                      BatchNormOptions options) {
  const auto& xs = input.shape();
  require(xs.size() >= 2, "batchnorm: input must be [B,C,...], got " + to_string(xs));
  const std::size_t batch = xs[0], channels = xs[1];
  const std::size_t spatial = input.value().size() / (batch * channels);
  require(gamma.shape() == Shape{channels} && beta.shape() == Shape{channels},
          "batchnorm: gamma/beta must be [C]");
  require(running_mean.shape() == Shape{channels} && running_var.shape() == Shape{channels},
          "batchnorm: running statistics must be [C]");
  if (mode == BatchNormMode::train && batch < 2)
    throw DimensionError("batchnorm: train mode needs a batch of at least 2, got " + std::to_string(batch));

  const std::size_t count = batch * spatial;
  const auto& xv = input.value();
  std::vector<T> inv_std(channels);
  BasicTensor<T> normalized(xs);
  BasicTensor<T> out(xs);
  for (std::size_t c = 0; c < channels; ++c) {
    double mu, var;
    if (mode == BatchNormMode::train) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < spatial; ++i) s += xv[(b * channels + c) * spatial + i];
      mu = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < spatial; ++i) {
          const double d = xv[(b * channels + c) * spatial + i] - mu;
          sq += d * d;
        }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      running_mean[c] = static_cast<T>((1.0 - options.momentum) * running_mean[c] + options.momentum * mu);
      running_var[c] = static_cast<T>((1.0 - options.momentum) * running_var[c] + options.momentum * unbiased);
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
    const T g = gamma.value()[c], bt = beta.value()[c];
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < spatial; ++i) {
        const std::size_t idx = (b * channels + c) * spatial + i;
        normalized[idx] = static_cast<T>((xv[idx] - mu) * inv_std[c]);
        out[idx] = g * normalized[idx] + bt;
      }
  }

  return BasicVar<T>::from_op(
      std::move(out), {input, gamma, beta},
      [normalized = std::move(normalized), inv_std = std::move(inv_std), batch, channels, spatial, count,
       mode](auto& node) {
        const auto& dy = node.grad;
        const auto& xin = node.inputs[0];
        const auto& gin = node.inputs[1];
        const auto& bin = node.inputs[2];
        for (std::size_t c = 0; c < channels; ++c) {
          T sum_dy = T(0), sum_dy_xhat = T(0);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < spatial; ++i) {
              const std::size_t idx = (b * channels + c) * spatial + i;
              sum_dy += dy[idx];
              sum_dy_xhat += dy[idx] * normalized[idx];
            }
          if (wants_grad(gin)) gin->grad_buffer()[c] += sum_dy_xhat;
          if (wants_grad(bin)) bin->grad_buffer()[c] += sum_dy;
          if (!wants_grad(xin)) continue;
          auto& dx = xin->grad_buffer();
          const T g = gin->value[c];
          if (mode == BatchNormMode::train) {
            const T n = static_cast<T>(count);
            // dxhat = dy * gamma; sums over dxhat follow from the dy sums.
            const T s1 = g * sum_dy, s2 = g * sum_dy_xhat;
            for (std::size_t b = 0; b < batch; ++b)
              for (std::size_t i = 0; i < spatial; ++i) {
                const std::size_t idx = (b * channels + c) * spatial + i;
                dx[idx] += inv_std[c] / n * (n * g * dy[idx] - s1 - normalized[idx] * s2);
              }
          } else {
            for (std::size_t b = 0; b < batch; ++b)
              for (std::size_t i = 0; i < spatial; ++i) {
                const std::size_t idx = (b * channels + c) * spatial + i;
                dx[idx] += dy[idx] * g * inv_std[c];
              }
          }
        }
      });
}

// ----------------------------------------------------------- activations

namespace {

template <typename T, typename F, typename D>
BasicVar<T> elementwise(const BasicVar<T>& x, F forward, D derivative) {
  BasicTensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(xv[i]);
  return BasicVar<T>::from_op(std::move(out), {x}, [derivative](auto& node) {
    auto& in = node.inputs[0];
    auto& dx = in->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[i] * derivative(in->value[i], node.value[i]);
  });
}

}  // namespace

template <typename T>
BasicVar<T> relu(const BasicVar<T>& x) {
  // Written so that NaN propagates instead of being mapped to zero.
  return elementwise(x, [](T v) { return v < T(0) ? T(0) : v; },
                     [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicVar<T> leaky_relu(const BasicVar<T>& x, T slope) {
  return elementwise(x, [slope](T v) { return v < T(0) ? slope * v : v; },
                     [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x) {
  return elementwise(x, [](T v) { return sigmoid_scalar(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicVar<T> softmax(const BasicVar<T>& x) {
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.value().size() / width;
  BasicTensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.value().data().data() + r * width;
    T* o = out.data().data() + r * width;
    const T peak = *std::max_element(in, in + width);
    T total = T(0);
    for (std::size_t j = 0; j < width; ++j) total += (o[j] = std::exp(in[j] - peak));
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  return BasicVar<T>::from_op(std::move(out), {x}, [rows, width](auto& node) {
    auto& dx = node.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = T(0);
      for (std::size_t j = 0; j < width; ++j) dot += node.grad[r * width + j] * node.value[r * width + j];
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t i = r * width + j;
        dx[i] += node.value[i] * (node.grad[i] - dot);
      }
    }
  });
}

// ------------------------------------------------------------- maxpool2d

template <typename T>
BasicVar<T> maxpool2d(const BasicVar<T>& input, std::size_t kernel, std::size_t stride) {
  return with_batch_axis(input, [&](const BasicVar<T>& x) {
    const auto& xs = x.shape();
    require(xs.size() == 4, "maxpool2d: input must be [B,C,H,W], got " + to_string(xs));
    require(kernel >= 1 && stride >= 1, "maxpool2d: kernel and stride must be >= 1");
    require(kernel <= xs[2] && kernel <= xs[3],
            "maxpool2d: kernel " + std::to_string(kernel) + " exceeds input extent " + to_string(xs));
    const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
    const std::size_t oh = (h - kernel) / stride + 1, ow = (w - kernel) / stride + 1;
    BasicTensor<T> out({xs[0], xs[1], oh, ow});
    std::vector<std::size_t> argmax(out.size());
    const auto& xv = x.value();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          std::size_t best = p * h * w + (i * stride) * w + j * stride;
          for (std::size_t di = 0; di < kernel; ++di)
            for (std::size_t dj = 0; dj < kernel; ++dj) {
              const std::size_t idx = p * h * w + (i * stride + di) * w + (j * stride + dj);
              if (xv[idx] > xv[best]) best = idx;
            }
          const std::size_t o = (p * oh + i) * ow + j;
          out[o] = xv[best];
          argmax[o] = best;
        }
    return BasicVar<T>::from_op(std::move(out), {x}, [argmax = std::move(argmax)](auto& node) {
      auto& dx = node.inputs[0]->grad_buffer();
      for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += node.grad[o];
    });
  });
}

// ------------------------------------------------------- shape utilities

template <typename T>
BasicVar<T> reshape(const BasicVar<T>& x, Shape shape) {
  require(element_count(shape) == x.value().size(),
          "reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  return BasicVar<T>::from_op(x.value().reshaped(std::move(shape)), {x}, [](auto& node) {
    auto& dx = node.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[i];
  });
}

template <typename T>
BasicVar<T> narrow(const BasicVar<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto& xs = x.shape();
  require(axis < xs.size() && length >= 1 && start + length <= xs[axis],
          "narrow: slice out of range for " + to_string(xs));
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= xs[a];
  for (std::size_t a = axis + 1; a < xs.size(); ++a) inner *= xs[a];
  Shape os = xs;
  os[axis] = length;
  BasicTensor<T> out(os);
  const std::size_t full = xs[axis];
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(x.value().data().data() + (o * full + start) * inner, length * inner,
                out.data().data() + o * length * inner);
  return BasicVar<T>::from_op(std::move(out), {x}, [outer, inner, full, start, length](auto& node) {
    auto& dx = node.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < length * inner; ++i)
        dx[(o * full + start) * inner + i] += node.grad[o * length * inner + i];
  });
}

// ------------------------------------------------------------ arithmetic

template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
  require(a.shape() == b.shape(), "add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return BasicVar<T>::from_op(std::move(out), {a, b}, [](auto& node) {
    for (auto& in : node.inputs) {
      if (!wants_grad(in)) continue;
      auto& d = in->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.grad[i];
    }
  });
}

template <typename T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b) {
  require(a.shape() == b.shape(), "mul: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return BasicVar<T>::from_op(std::move(out), {a, b}, [](auto& node) {
    const auto& ain = node.inputs[0];
    const auto& bin = node.inputs[1];
    if (wants_grad(ain)) {
      auto& d = ain->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.grad[i] * bin->value[i];
    }
    if (wants_grad(bin)) {
      auto& d = bin->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.grad[i] * ain->value[i];
    }
  });
}

template <typename T>
BasicVar<T> scale(const BasicVar<T>& x, T factor) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * factor;
  return BasicVar<T>::from_op(std::move(out), {x}, [factor](auto& node) {
    auto& dx = node.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[i] * factor;
  });
}

template <typename T>
BasicVar<T> sum(const BasicVar<T>& x) {
  double total = 0.0;
  for (T v : x.value().data()) total += v;
  return BasicVar<T>::from_op(BasicTensor<T>({1}, static_cast<T>(total)), {x}, [](auto& node) {
    auto& dx = node.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[0];
  });
}

template <typename T>
BasicVar<T> mean(const BasicVar<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

// ---------------------------------------------------------- VAE/GAN math

template <typename T>
BasicVar<T> reparametrize(const BasicVar<T>& mu, const BasicVar<T>& log_var, const BasicTensor<T>& eps) {
  require(mu.shape() == log_var.shape() && mu.shape() == eps.shape(),
          "reparametrize: mu, log_var and eps must share a shape");
  BasicTensor<T> out(mu.shape());
  BasicTensor<T> sigma(mu.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    sigma[i] = std::exp(T(0.5) * log_var.value()[i]);
    out[i] = mu.value()[i] + sigma[i] * eps[i];
  }
  return BasicVar<T>::from_op(std::move(out), {mu, log_var}, [sigma = std::move(sigma), eps](auto& node) {
    const auto& muin = node.inputs[0];
    const auto& lvin = node.inputs[1];
    if (wants_grad(muin)) {
      auto& d = muin->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.grad[i];
    }
    if (wants_grad(lvin)) {
      auto& d = lvin->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.grad[i] * T(0.5) * sigma[i] * eps[i];
    }
  });
}

namespace {

// Rows of a [B,...] tensor (rank-1 is one row).
template <typename T>
std::pair<std::size_t, std::size_t> rows_of(const BasicTensor<T>& t) {
  const std::size_t rows = t.rank() <= 1 ? 1 : t.dim(0);
  return {rows, t.size() / rows};
}

}  // namespace

template <typename T>
BasicVar<T> kl_divergence(const BasicVar<T>& mu, const BasicVar<T>& log_var) {
  require(mu.shape() == log_var.shape(), "kl_divergence: mu and log_var must share a shape");
  const auto [rows, width] = rows_of(mu.value());
  BasicTensor<T> out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const double m = mu.value()[r * width + j], lv = log_var.value()[r * width + j];
      acc += m * m + std::exp(lv) - lv - 1.0;
    }
    out[r] = static_cast<T>(0.5 * acc);
  }
  return BasicVar<T>::from_op(std::move(out), {mu, log_var}, [width](auto& node) {
    const auto& muin = node.inputs[0];
    const auto& lvin = node.inputs[1];
    for (std::size_t i = 0; i < muin->value.size(); ++i) {
      const T g = node.grad[i / width];
      if (wants_grad(muin)) muin->grad_buffer()[i] += g * muin->value[i];
      if (wants_grad(lvin)) lvin->grad_buffer()[i] += g * T(0.5) * (std::exp(lvin->value[i]) - T(1));
    }
  });
}

template <typename T>
BasicVar<T> binary_cross_entropy(const BasicVar<T>& probs, const BasicTensor<T>& target, T clamp) {
  require(probs.value().size() == target.size(), "binary_cross_entropy: prediction/target size mismatch");
  const auto [rows, width] = rows_of(probs.value());
  BasicTensor<T> out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t i = r * width + j;
      const T p = probs.value()[i];
      const T t = target[i];
      if (t != T(0)) acc -= t * std::log(std::max(p, clamp));
      if (t != T(1)) acc -= (T(1) - t) * std::log(std::max(T(1) - p, clamp));
    }
    out[r] = static_cast<T>(acc);
  }
  return BasicVar<T>::from_op(std::move(out), {probs}, [target, width, clamp](auto& node) {
    auto& in = node.inputs[0];
    auto& dp = in->grad_buffer();
    for (std::size_t i = 0; i < dp.size(); ++i) {
      const T p = in->value[i];
      const T t = target[i];
      T g = T(0);
      if (t != T(0) && p > clamp) g -= t / p;
      if (t != T(1) && T(1) - p > clamp) g += (T(1) - t) / (T(1) - p);
      dp[i] += node.grad[i / width] * g;
    }
  });
}

template <typename T>
BasicVar<T> binary_cross_entropy_with_logits(const BasicVar<T>& logits, const BasicTensor<T>& target) {
  require(logits.value().size() == target.size(), "binary_cross_entropy_with_logits: size mismatch");
  const auto [rows, width] = rows_of(logits.value());
  BasicTensor<T> out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t i = r * width + j;
      const T x = logits.value()[i];
      acc += std::max(x, T(0)) - x * target[i] + std::log1p(std::exp(-std::abs(x)));
    }
    out[r] = static_cast<T>(acc);
  }
  return BasicVar<T>::from_op(std::move(out), {logits}, [target, width](auto& node) {
    auto& in = node.inputs[0];
    auto& dx = in->grad_buffer();
    for (std::size_t i = 0; i < dx.size(); ++i)
      dx[i] += node.grad[i / width] * (sigmoid_scalar(in->value[i]) - target[i]);
  });
}

template <typename T>
BasicVar<T> log_clamped(const BasicVar<T>& p, T eps) {
  const T lo = eps, hi = T(1) - eps;
  return elementwise(p, [lo, hi](T v) { return std::log(std::clamp(v, lo, hi)); },
                     [lo, hi](T v, T) { return (v < lo || v > hi) ? T(0) : T(1) / v; });
}

template <typename T>
BasicVar<T> log1m_clamped(const BasicVar<T>& p, T eps) {
  const T lo = eps, hi = T(1) - eps;
  return elementwise(p, [lo, hi](T v) { return std::log(T(1) - std::clamp(v, lo, hi)); },
                     [lo, hi](T v, T) { return (v < lo || v > hi) ? T(0) : T(-1) / (T(1) - v); });
}

template <typename T>
BasicVar<T> cross_entropy(const BasicVar<T>& logits, std::span<const int> labels) {
  const auto& s = logits.shape();
  require(s.size() == 2 && s[0] == labels.size(), "cross_entropy: logits must be [B,C] with B labels");
  const std::size_t batch = s[0], classes = s[1];
  BasicTensor<T> probs(s);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    require(labels[b] >= 0 && static_cast<std::size_t>(labels[b]) < classes, "cross_entropy: label out of range");
    const T* row = logits.value().data().data() + b * classes;
    const T peak = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(static_cast<double>(row[j] - peak));
    for (std::size_t j = 0; j < classes; ++j)
      probs[b * classes + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - peak)) / z);
    total += std::log(z) + peak - row[labels[b]];
  }
  std::vector<int> copy(labels.begin(), labels.end());
  return BasicVar<T>::from_op(BasicTensor<T>({1}, static_cast<T>(total / static_cast<double>(batch))), {logits},
                              [probs = std::move(probs), copy = std::move(copy), batch, classes](auto& node) {
    auto& dx = node.inputs[0]->grad_buffer();
    const T g = node.grad[0] / static_cast<T>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < classes; ++j) {
        const T onehot = static_cast<int>(j) == copy[b] ? T(1) : T(0);
        dx[b * classes + j] += g * (probs[b * classes + j] - onehot);
      }
  });
}

template <typename T>
BasicTensor<T> pad2d(const BasicTensor<T>& x, std::size_t pad) {
  require(x.rank() >= 2, "pad2d: need at least two axes");
  Shape s = x.shape();
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  const std::size_t planes = x.size() / (h * w);
  s[s.size() - 2] += 2 * pad;
  s[s.size() - 1] += 2 * pad;
  BasicTensor<T> out(s);
  const std::size_t ow = w + 2 * pad, oh = h + 2 * pad;
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(x.data().data() + (p * h + i) * w, w, out.data().data() + (p * oh + i + pad) * ow + pad);
  return out;
}

#define CROSSGEN_INSTANTIATE_OPS(T)                                                                          \
  template BasicVar<T> conv2d(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, Conv2dOptions);    \
  template BasicVar<T> conv_transpose2d(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&,          \
                                        Conv2dOptions);                                                      \
  template BasicVar<T> dense(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&);                    \
  template BasicVar<T> batchnorm(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, BasicTensor<T>&, \
                                 BasicTensor<T>&, BatchNormMode, BatchNormOptions);                          \
  template BasicVar<T> relu(const BasicVar<T>&);                                                             \
  template BasicVar<T> leaky_relu(const BasicVar<T>&, T);                                                    \
  template BasicVar<T> sigmoid(const BasicVar<T>&);                                                          \
  template BasicVar<T> softmax(const BasicVar<T>&);                                                          \
  template BasicVar<T> maxpool2d(const BasicVar<T>&, std::size_t, std::size_t);                              \
  template BasicVar<T> reshape(const BasicVar<T>&, Shape);                                                   \
  template BasicVar<T> narrow(const BasicVar<T>&, std::size_t, std::size_t, std::size_t);                    \
  template BasicVar<T> add(const BasicVar<T>&, const BasicVar<T>&);                                          \
  template BasicVar<T> mul(const BasicVar<T>&, const BasicVar<T>&);                                          \
  template BasicVar<T> scale(const BasicVar<T>&, T);                                                         \
  template BasicVar<T> sum(const BasicVar<T>&);                                                              \
  template BasicVar<T> mean(const BasicVar<T>&);                                                             \
  template BasicVar<T> reparametrize(const BasicVar<T>&, const BasicVar<T>&, const BasicTensor<T>&);         \
  template BasicVar<T> kl_divergence(const BasicVar<T>&, const BasicVar<T>&);                                \
  template BasicVar<T> binary_cross_entropy(const BasicVar<T>&, const BasicTensor<T>&, T);                   \
  template BasicVar<T> binary_cross_entropy_with_logits(const BasicVar<T>&, const BasicTensor<T>&);          \
  template BasicVar<T> log_clamped(const BasicVar<T>&, T);                                                   \
  template BasicVar<T> log1m_clamped(const BasicVar<T>&, T);                                                 \
  template BasicVar<T> cross_entropy(const BasicVar<T>&, std::span<const int>);                              \
  template BasicTensor<T> pad2d(const BasicTensor<T>&, std::size_t);

CROSSGEN_INSTANTIATE_OPS(float)
CROSSGEN_INSTANTIATE_OPS(double)

#undef CROSSGEN_INSTANTIATE_OPS

}  // namespace crossgen::tensor
