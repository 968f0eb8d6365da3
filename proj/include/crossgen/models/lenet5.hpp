#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crossgen/models/layers.hpp"

namespace crossgen::models {

// Classic LeNet5 on 32x32 inputs:
//   conv5 6 -> 6x28x28, pool -> 14x14, conv5 16 -> 10x10, pool -> 5x5,
//   conv5 120 -> 1x1, FC 84, FC 10 (ReLU on all hidden layers).
class Lenet5 {
 public:
  static constexpr const char* kArchitecture = "lenet5";

  explicit Lenet5(std::uint64_t seed);

  // [B, 1, 32, 32] to [B, 10] logits.
  Var logits(const Var& images);
  // Softmax probabilities.
  Var forward(const Var& images) { return tensor::softmax(logits(images)); }

  // Argmax class per row of a batch of 28x28 images, padded to 32x32 here.
  std::vector<int> predict28(const Tensor& images28);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  ParamStore params_;
  Conv2d c1_, c3_, c5_;
  Linear f6_, out_;
};

}  // namespace crossgen::models
