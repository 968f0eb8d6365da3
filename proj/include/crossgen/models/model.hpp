#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "crossgen/models/layers.hpp"

namespace crossgen::models {

inline constexpr std::size_t kLatentDim = 64;

struct Latent {
  Var mu;       // [B, 64]
  Var log_var;  // [B, 64]; sigma = exp(0.5 * log_var)
};

// Spectrogram encoder plus image decoder; AIVAE and the AIVAEGAN generator
// share this shape.
class AudioToImageModel {
 public:
  virtual ~AudioToImageModel() = default;

  virtual std::string architecture() const = 0;

  // [B, 1, 48, 48] spectrograms in [0, 1].
  virtual Latent encode(const Var& spectrograms) = 0;
  // [B, 64] latent codes to [B, 1, 28, 28] pre-sigmoid logits.
  virtual Var decode_logits(const Var& f) = 0;
  Var decode(const Var& f) { return tensor::sigmoid(decode_logits(f)); }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

 protected:
  ParamStore params_;
  Mode mode_ = Mode::train;
};

// Validates [B, 1, h, w] (or a single [1, h, w] sample, returned as a batch of one).
Var as_image_batch(const Var& x, std::size_t h, std::size_t w, const char* who);

}  // namespace crossgen::models
