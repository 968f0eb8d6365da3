#pragma once

// Differentiable layer set: convolution, transposed convolution, dense,
// batch normalization, activations, max pooling, and the loss primitives
// used by the VAE/GAN objectives. All image ops work on [B,C,H,W] batches;
// conv/pool ops also accept a single [C,H,W] sample and dense accepts a
// single [n] vector.
//
// Templates are instantiated for float (training) and double (gradient
// validation).

#include <cstddef>
#include <span>

#include "crossgen/tensor/autodiff.hpp"

namespace crossgen::tensor {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// weight: [C_out, C_in, k, k]; bias: [C_out] or undefined.
// Output extent floor((H + 2p - k) / s) + 1.
template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias,
                   Conv2dOptions options);

// weight: [C_in, C_out, k, k]; bias: [C_out] or undefined.
// Output extent (H - 1) * s - 2p + k. The forward map is the adjoint of
// conv2d with the same weight and geometry.
template <typename T>
BasicVar<T> conv_transpose2d(const BasicVar<T>& input, const BasicVar<T>& weight,
                             const BasicVar<T>& bias, Conv2dOptions options);

// input [B,n] (or [n]); weight [m,n]; bias [m] or undefined.
template <typename T>
BasicVar<T> dense(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias);

enum class BatchNormMode { train, eval };

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

// Per-channel normalization over batch and spatial extents of [B,C,...].
// Train mode normalizes with batch statistics and folds them into the
// running estimates (variance stored unbiased); eval mode reads them.
template <typename T>
BasicVar<T> batchnorm(const BasicVar<T>& input, const BasicVar<T>& gamma, const BasicVar<T>& beta,
                      BasicTensor<T>& running_mean, BasicTensor<T>& running_var,
                      BatchNormMode mode, BatchNormOptions options = {});

template <typename T>
BasicVar<T> relu(const BasicVar<T>& x);
template <typename T>
BasicVar<T> leaky_relu(const BasicVar<T>& x, T slope);
template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x);
// Softmax along the last axis.
template <typename T>
BasicVar<T> softmax(const BasicVar<T>& x);

// Window maximum; the gradient goes to the first maximal element in
// row-major scan order.
template <typename T>
BasicVar<T> maxpool2d(const BasicVar<T>& x, std::size_t kernel, std::size_t stride);

template <typename T>
BasicVar<T> reshape(const BasicVar<T>& x, Shape shape);
// Slice [start, start + length) along `axis`.
template <typename T>
BasicVar<T> narrow(const BasicVar<T>& x, std::size_t axis, std::size_t start, std::size_t length);

template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b);
template <typename T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b);
template <typename T>
BasicVar<T> scale(const BasicVar<T>& x, T factor);
// Scalar results have shape [1].
template <typename T>
BasicVar<T> sum(const BasicVar<T>& x);
template <typename T>
BasicVar<T> mean(const BasicVar<T>& x);

// mu + exp(0.5 * log_var) * eps, elementwise.
template <typename T>
BasicVar<T> reparametrize(const BasicVar<T>& mu, const BasicVar<T>& log_var, const BasicTensor<T>& eps);

// Closed-form KL(N(mu, exp(log_var)) || N(0, I)) per row of [B,D]; a rank-1
// input is a single row. Result shape [B].
template <typename T>
BasicVar<T> kl_divergence(const BasicVar<T>& mu, const BasicVar<T>& log_var);

// Pixelwise Bernoulli negative log-likelihood summed per batch row, from
// probabilities. Terms with a zero coefficient are skipped (0 log 0 = 0) and
// log arguments are floored at `clamp`, so a perfect reconstruction costs
// exactly zero while saturated mistakes stay finite.
template <typename T>
BasicVar<T> binary_cross_entropy(const BasicVar<T>& probs, const BasicTensor<T>& target,
                                 T clamp = T(1e-7));

// Same likelihood evaluated from logits, stable for saturated outputs.
template <typename T>
BasicVar<T> binary_cross_entropy_with_logits(const BasicVar<T>& logits, const BasicTensor<T>& target);

// log(clamp(p)) and log(1 - clamp(p)), clamp range [eps, 1 - eps].
template <typename T>
BasicVar<T> log_clamped(const BasicVar<T>& p, T eps = T(1e-7));
template <typename T>
BasicVar<T> log1m_clamped(const BasicVar<T>& p, T eps = T(1e-7));

// Mean softmax cross-entropy of [B,C] logits against class indices.
template <typename T>
BasicVar<T> cross_entropy(const BasicVar<T>& logits, std::span<const int> labels);

// Zero padding of the two trailing (spatial) axes; not differentiable.
template <typename T>
BasicTensor<T> pad2d(const BasicTensor<T>& x, std::size_t pad);

}  // namespace crossgen::tensor
