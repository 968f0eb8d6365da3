#pragma once

#include <string>

#include "crossgen/tensor/ops.hpp"
#include "crossgen/tensor/param_store.hpp"
#include "crossgen/util/rng.hpp"

namespace crossgen::models {

using tensor::ParamStore;
using tensor::Tensor;
using tensor::Var;

enum class Mode { train, eval };

// uniform_fan_in: weights and biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
// dcgan: weights N(0, 0.02), biases 0, batch-norm scale N(1, 0.02).
enum class Init { uniform_fan_in, dcgan };

// Layers register their parameters in a ParamStore and keep handles to them;
// the store owns the values and the optimizer state.

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
         tensor::Conv2dOptions options, bool bias, Init init, Rng& rng);
  Var operator()(const Var& x) const { return tensor::conv2d(x, weight_, bias_, options_); }

 private:
  Var weight_, bias_;
  tensor::Conv2dOptions options_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
                  tensor::Conv2dOptions options, bool bias, Init init, Rng& rng);
  Var operator()(const Var& x) const { return tensor::conv_transpose2d(x, weight_, bias_, options_); }

 private:
  Var weight_, bias_;
  tensor::Conv2dOptions options_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Init init, Rng& rng);
  Var operator()(const Var& x) const { return tensor::dense(x, weight_, bias_); }

 private:
  Var weight_, bias_;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& name, std::size_t channels, Init init, Rng& rng);
  Var operator()(const Var& x, Mode mode) const;

 private:
  Var gamma_, beta_;
  Tensor* running_mean_ = nullptr;
  Tensor* running_var_ = nullptr;
};

}  // namespace crossgen::models
