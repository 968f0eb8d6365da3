#include "crossgen/models/aivaegan.hpp"

#include "crossgen/util/errors.hpp"

namespace crossgen::models {

using tensor::Conv2dOptions;

namespace {
constexpr float kSlope = 0.2f;
}

AivaeganGenerator::AivaeganGenerator(std::uint64_t seed) {
  Rng rng(seed);
  const auto init = Init::dcgan;
  const std::size_t enc_channels[] = {1, 128, 256, 512, 64};
  for (int i = 0; i < 4; ++i) {
    const auto name = "enc.conv" + std::to_string(i + 1);
    enc_conv_[i] = Conv2d(params_, name, enc_channels[i], enc_channels[i + 1], 4, {2, 1}, false, init, rng);
    enc_bn_[i] = BatchNorm(params_, "enc.bn" + std::to_string(i + 1), enc_channels[i + 1], init, rng);
  }
  head_ = Conv2d(params_, "enc.head", 64, 2 * kLatentDim, 3, {1, 0}, true, init, rng);

  const std::size_t dec_channels[] = {kLatentDim, 512, 256, 128, 1};
  const std::size_t dec_kernels[] = {3, 3, 2, 2};
  for (int i = 0; i < 4; ++i) {
    const bool last = i == 3;
    dec_up_[i] = ConvTranspose2d(params_, "dec.up" + std::to_string(i + 1), dec_channels[i], dec_channels[i + 1],
                                 dec_kernels[i], {2, 0}, last, init, rng);
    if (!last) dec_bn_[i] = BatchNorm(params_, "dec.bn" + std::to_string(i + 1), dec_channels[i + 1], init, rng);
  }
}

Latent AivaeganGenerator::encode(const Var& spectrograms) {
  Var h = as_image_batch(spectrograms, 48, 48, "aivaegan encode");
  const std::size_t batch = h.shape()[0];
  for (int i = 0; i < 4; ++i) h = tensor::leaky_relu(enc_bn_[i](enc_conv_[i](h), mode_), kSlope);
  h = tensor::reshape(head_(h), {batch, 2 * kLatentDim});
  return {tensor::narrow(h, 1, 0, kLatentDim), tensor::narrow(h, 1, kLatentDim, kLatentDim)};
}

Var AivaeganGenerator::decode_logits(const Var& f) {
  if (f.shape().size() != 2 || f.shape()[1] != kLatentDim) {
    throw DimensionError("aivaegan decode: expected [B,64], got " + tensor::to_string(f.shape()));
  }
  Var h = tensor::reshape(f, {f.shape()[0], kLatentDim, 1, 1});
  for (int i = 0; i < 3; ++i) h = tensor::relu(dec_bn_[i](dec_up_[i](h), mode_));
  return dec_up_[3](h);
}

Discriminator::Discriminator(std::uint64_t seed) {
  Rng rng(seed);
  const auto init = Init::dcgan;
  const std::size_t channels[] = {1, 128, 256, 512};
  for (int i = 0; i < 3; ++i) {
    const bool first = i == 0;
    conv_[i] = Conv2d(params_, "conv" + std::to_string(i + 1), channels[i], channels[i + 1], 4, {2, 1}, first, init,
                      rng);
    if (!first) bn_[i - 1] = BatchNorm(params_, "bn" + std::to_string(i + 1), channels[i + 1], init, rng);
  }
  out_ = Conv2d(params_, "out", 512, 1, 1, {1, 0}, true, init, rng);
}

Var Discriminator::logits(const Var& images) {
  Var h = as_image_batch(images, 28, 28, "discriminate");
  const std::size_t batch = h.shape()[0];
  h = tensor::leaky_relu(conv_[0](h), kSlope);
  for (int i = 1; i < 3; ++i) h = tensor::leaky_relu(bn_[i - 1](conv_[i](h), mode_), kSlope);
  h = tensor::reshape(out_(h), {batch, 9});
  const Var average = Var::constant(Tensor({1, 9}, 1.0f / 9.0f));
  return tensor::reshape(tensor::dense(h, average, Var()), {batch});
}

}  // namespace crossgen::models
