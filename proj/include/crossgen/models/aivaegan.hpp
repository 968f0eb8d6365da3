#pragma once

#include "crossgen/models/model.hpp"

namespace crossgen::models {

// All-convolutional generator with LeakyReLU(0.2) encoder, ReLU decoder and
// batch normalization after every hidden layer:
//   encoder 1x48x48 -> 128x24x24 -> 256x12x12 -> 512x6x6 -> 64x3x3 (conv 4/2/1 each)
//           -conv3-> 128x1x1, split into mu (first 64) and log_var (last 64)
//   decoder 64x1x1 -up3/2-> 512x3x3 -up3/2-> 256x7x7 -up2/2-> 128x14x14 -up2/2-> 1x28x28
class AivaeganGenerator : public AudioToImageModel {
 public:
  static constexpr const char* kArchitecture = "aivaegan";

  explicit AivaeganGenerator(std::uint64_t seed);

  std::string architecture() const override { return kArchitecture; }
  Latent encode(const Var& spectrograms) override;
  Var decode_logits(const Var& f) override;

 private:
  Conv2d enc_conv_[4];
  BatchNorm enc_bn_[4];
  Conv2d head_;
  ConvTranspose2d dec_up_[4];
  BatchNorm dec_bn_[3];
};

// Image critic: 1x28x28 -> 128x14x14 -> 256x7x7 -> 512x3x3 (conv 4/2/1,
// LeakyReLU 0.2, batch norm after all but the first) -> 1x1 conv to one
// logit per position; the nine position logits are averaged.
class Discriminator {
 public:
  static constexpr const char* kArchitecture = "discriminator";

  explicit Discriminator(std::uint64_t seed);

  // [B, 1, 28, 28] images to [B] logits.
  Var logits(const Var& images);
  // Probability that each image is real, in (0, 1).
  Var discriminate(const Var& images) { return tensor::sigmoid(logits(images)); }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

 private:
  ParamStore params_;
  Mode mode_ = Mode::train;
  Conv2d conv_[3];
  BatchNorm bn_[2];
  Conv2d out_;
};

}  // namespace crossgen::models
