#pragma once

#include "crossgen/models/model.hpp"

namespace crossgen::models {

// Convolutional encoder with fully connected layers on both sides of the
// latent code:
//   encoder 1x48x48 -conv4/2-> 64x24x24 -conv4/2-> 128x12x12 -> FC 1024 -> FC 512 -> (mu, log_var) FC 64 each
//   decoder 64 -> FC 512 -> FC 1024 -> FC 6272 = 128x7x7 -upconv4/2-> 64x14x14 -upconv4/2-> 1x28x28
// ReLU after every hidden layer; the latent heads and the output are linear.
class Aivae : public AudioToImageModel {
 public:
  static constexpr const char* kArchitecture = "aivae";

  explicit Aivae(std::uint64_t seed);

  std::string architecture() const override { return kArchitecture; }
  Latent encode(const Var& spectrograms) override;
  Var decode_logits(const Var& f) override;

 private:
  Conv2d enc_conv1_, enc_conv2_;
  Linear enc_fc1_, enc_fc2_, mu_head_, log_var_head_;
  Linear dec_fc1_, dec_fc2_, dec_fc3_;
  ConvTranspose2d dec_up1_, dec_up2_;
};

}  // namespace crossgen::models
