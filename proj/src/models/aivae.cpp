#include "crossgen/models/aivae.hpp"

#include "crossgen/util/errors.hpp"

namespace crossgen::models {

using tensor::Conv2dOptions;

Var as_image_batch(const Var& x, std::size_t h, std::size_t w, const char* who) {
  const auto& s = x.shape();
  if (s.size() == 3 && s[0] == 1 && s[1] == h && s[2] == w) return tensor::reshape(x, {1, 1, h, w});
  if (s.size() != 4 || s[1] != 1 || s[2] != h || s[3] != w) {
    throw DimensionError(std::string(who) + ": expected [B,1," + std::to_string(h) + "," + std::to_string(w) +
                         "], got " + tensor::to_string(s));
  }
  return x;
}

Aivae::Aivae(std::uint64_t seed) {
  Rng rng(seed);
  const auto init = Init::uniform_fan_in;
  const Conv2dOptions down{2, 1};
  enc_conv1_ = Conv2d(params_, "enc.conv1", 1, 64, 4, down, true, init, rng);
  enc_conv2_ = Conv2d(params_, "enc.conv2", 64, 128, 4, down, true, init, rng);
  enc_fc1_ = Linear(params_, "enc.fc1", 128 * 12 * 12, 1024, init, rng);
  enc_fc2_ = Linear(params_, "enc.fc2", 1024, 512, init, rng);
  mu_head_ = Linear(params_, "enc.mu", 512, kLatentDim, init, rng);
  log_var_head_ = Linear(params_, "enc.log_var", 512, kLatentDim, init, rng);
  dec_fc1_ = Linear(params_, "dec.fc1", kLatentDim, 512, init, rng);
  dec_fc2_ = Linear(params_, "dec.fc2", 512, 1024, init, rng);
  dec_fc3_ = Linear(params_, "dec.fc3", 1024, 128 * 7 * 7, init, rng);
  dec_up1_ = ConvTranspose2d(params_, "dec.up1", 128, 64, 4, down, true, init, rng);
  dec_up2_ = ConvTranspose2d(params_, "dec.up2", 64, 1, 4, down, true, init, rng);
}

Latent Aivae::encode(const Var& spectrograms) {
  using tensor::relu;
  const Var x = as_image_batch(spectrograms, 48, 48, "aivae encode");
  const std::size_t batch = x.shape()[0];
  Var h = relu(enc_conv1_(x));
  h = relu(enc_conv2_(h));
  h = tensor::reshape(h, {batch, 128 * 12 * 12});
  h = relu(enc_fc1_(h));
  h = relu(enc_fc2_(h));
  return {mu_head_(h), log_var_head_(h)};
}

Var Aivae::decode_logits(const Var& f) {
  using tensor::relu;
  if (f.shape().size() != 2 || f.shape()[1] != kLatentDim) {
    throw DimensionError("aivae decode: expected [B,64], got " + tensor::to_string(f.shape()));
  }
  const std::size_t batch = f.shape()[0];
  Var h = relu(dec_fc1_(f));
  h = relu(dec_fc2_(h));
  h = relu(dec_fc3_(h));
  h = tensor::reshape(h, {batch, 128, 7, 7});
  h = relu(dec_up1_(h));
  return dec_up2_(h);
}

}  // namespace crossgen::models
