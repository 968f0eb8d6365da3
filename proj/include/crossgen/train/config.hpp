#pragma once

#include <cstdint>
#include <string>

#include "crossgen/util/key_value.hpp"

namespace crossgen::train {

enum class GeneratorLossMode { minimax, non_saturating };

std::string to_string(GeneratorLossMode mode);
GeneratorLossMode parse_generator_loss_mode(const std::string& text);

struct TrainConfig {
  std::size_t latent_dim = 64;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr_aivae = 1e-3;
  double lr_gan = 2e-4;
  double lr_lenet = 1e-3;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::string dataset;
  GeneratorLossMode generator_loss_mode = GeneratorLossMode::non_saturating;
  std::size_t checkpoint_every = 1;  // epochs between periodic checkpoints
  double collapse_threshold = 1e-3;  // generated-batch pixel variance
  std::size_t collapse_patience = 5;  // consecutive epochs below threshold

  // Raises on any nonpositive or out-of-range field.
  void validate() const;
};

KeyValues to_key_values(const TrainConfig& config);

// Overrides fields named in `entries`; unknown keys and malformed values raise
// ParseError naming the key.
void apply_key_values(TrainConfig& config, const KeyValues& entries);

}  // namespace crossgen::train
