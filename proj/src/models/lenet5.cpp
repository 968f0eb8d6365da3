#include "crossgen/models/lenet5.hpp"

#include "crossgen/models/model.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::models {

Lenet5::Lenet5(std::uint64_t seed) {
  Rng rng(seed);
  const auto init = Init::uniform_fan_in;
  c1_ = Conv2d(params_, "c1", 1, 6, 5, {1, 0}, true, init, rng);
  c3_ = Conv2d(params_, "c3", 6, 16, 5, {1, 0}, true, init, rng);
  c5_ = Conv2d(params_, "c5", 16, 120, 5, {1, 0}, true, init, rng);
  f6_ = Linear(params_, "f6", 120, 84, init, rng);
  out_ = Linear(params_, "out", 84, 10, init, rng);
}

Var Lenet5::logits(const Var& images) {
  using tensor::relu;
  Var h = as_image_batch(images, 32, 32, "lenet5");
  const std::size_t batch = h.shape()[0];
  h = tensor::maxpool2d(relu(c1_(h)), 2, 2);
  h = tensor::maxpool2d(relu(c3_(h)), 2, 2);
  h = tensor::reshape(relu(c5_(h)), {batch, 120});
  h = relu(f6_(h));
  return out_(h);
}

std::vector<int> Lenet5::predict28(const Tensor& images28) {
  tensor::NoGradGuard no_grad;
  const Var input = Var::constant(tensor::pad2d(images28, 2));
  const Var out = logits(input);
  const std::size_t batch = out.shape()[0];
  std::vector<int> predictions(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    int best = 0;
    for (int c = 1; c < 10; ++c) {
      if (out.value()[b * 10 + c] > out.value()[b * 10 + best]) best = c;
    }
    predictions[b] = best;
  }
  return predictions;
}

}  // namespace crossgen::models
