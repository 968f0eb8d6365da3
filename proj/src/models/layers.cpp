#include "crossgen/models/layers.hpp"

#include <cmath>

namespace crossgen::models {
namespace {

Tensor init_weight(tensor::Shape shape, std::size_t fan_in, Init init, Rng& rng) {
  Tensor t(std::move(shape));
  if (init == Init::dcgan) {
    for (auto& v : t.data()) v = static_cast<float>(0.02 * rng.normal());
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return t;
}

Tensor init_bias(std::size_t n, std::size_t fan_in, Init init, Rng& rng) {
  Tensor t({n});
  if (init == Init::uniform_fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return t;
}

}  // namespace

Conv2d::Conv2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               tensor::Conv2dOptions options, bool bias, Init init, Rng& rng)
    : options_(options) {
  const std::size_t fan_in = in * kernel * kernel;
  weight_ = store.add(name + ".weight", init_weight({out, in, kernel, kernel}, fan_in, init, rng));
  if (bias) bias_ = store.add(name + ".bias", init_bias(out, fan_in, init, rng));
}

ConvTranspose2d::ConvTranspose2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                                 std::size_t kernel, tensor::Conv2dOptions options, bool bias, Init init, Rng& rng)
    : options_(options) {
  // Fan-in follows the weight's second axis, as common frameworks compute it.
  const std::size_t fan_in = out * kernel * kernel;
  weight_ = store.add(name + ".weight", init_weight({in, out, kernel, kernel}, fan_in, init, rng));
  if (bias) bias_ = store.add(name + ".bias", init_bias(out, fan_in, init, rng));
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Init init, Rng& rng) {
  weight_ = store.add(name + ".weight", init_weight({out, in}, in, init, rng));
  bias_ = store.add(name + ".bias", init_bias(out, in, init, rng));
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& name, std::size_t channels, Init init, Rng& rng) {
  Tensor gamma({channels}, 1.0f);
  if (init == Init::dcgan) {
    for (auto& v : gamma.data()) v = static_cast<float>(1.0 + 0.02 * rng.normal());
  }
  gamma_ = store.add(name + ".gamma", std::move(gamma));
  beta_ = store.add(name + ".beta", Tensor({channels}));
  running_mean_ = &store.add_buffer(name + ".running_mean", Tensor({channels}));
  running_var_ = &store.add_buffer(name + ".running_var", Tensor({channels}, 1.0f));
}

Var BatchNorm::operator()(const Var& x, Mode mode) const {
  return tensor::batchnorm(x, gamma_, beta_, *running_mean_, *running_var_,
                           mode == Mode::train ? tensor::BatchNormMode::train : tensor::BatchNormMode::eval);
}

}  // namespace crossgen::models
