#include "crossgen/train/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>

#include "crossgen/models/model.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::train {
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw ParseError(fmt::format("config key '{}': cannot parse '{}'", key, value));
  }
  return out;
}

}  // namespace

std::string to_string(GeneratorLossMode mode) {
  return mode == GeneratorLossMode::minimax ? "minimax" : "non_saturating";
}

GeneratorLossMode parse_generator_loss_mode(const std::string& text) {
  if (text == "minimax") return GeneratorLossMode::minimax;
  if (text == "non_saturating") return GeneratorLossMode::non_saturating;
  throw ParseError("generator_loss_mode must be minimax or non_saturating, got '" + text + "'");
}

void TrainConfig::validate() const {
  if (latent_dim != models::kLatentDim) {
    throw Error(fmt::format("latent_dim is fixed by the architectures at {}, got {}", models::kLatentDim, latent_dim));
  }
  if (epochs == 0) throw Error("epochs must be positive");
  if (batch_size == 0) throw Error("batch_size must be positive");
  for (auto [name, v] : {std::pair{"lr_aivae", lr_aivae}, {"lr_gan", lr_gan}, {"lr_lenet", lr_lenet}}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(fmt::format("{} must be positive", name));
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error("alpha must be nonnegative");
  if (checkpoint_every == 0) throw Error("checkpoint_every must be positive");
  if (collapse_patience == 0) throw Error("collapse_patience must be positive");
}

KeyValues to_key_values(const TrainConfig& c) {
  return {
      {"latent_dim", std::to_string(c.latent_dim)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"lr_aivae", fmt::format("{}", c.lr_aivae)},
      {"lr_gan", fmt::format("{}", c.lr_gan)},
      {"lr_lenet", fmt::format("{}", c.lr_lenet)},
      {"alpha", fmt::format("{}", c.alpha)},
      {"seed", std::to_string(c.seed)},
      {"dataset", c.dataset},
      {"generator_loss_mode", to_string(c.generator_loss_mode)},
      {"checkpoint_every", std::to_string(c.checkpoint_every)},
      {"collapse_threshold", fmt::format("{}", c.collapse_threshold)},
      {"collapse_patience", std::to_string(c.collapse_patience)},
  };
}

void apply_key_values(TrainConfig& c, const KeyValues& entries) {
  for (const auto& [key, value] : entries) {
    if (key == "latent_dim") c.latent_dim = parse_number<std::size_t>(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "lr_aivae") c.lr_aivae = parse_number<double>(key, value);
    else if (key == "lr_gan") c.lr_gan = parse_number<double>(key, value);
    else if (key == "lr_lenet") c.lr_lenet = parse_number<double>(key, value);
    else if (key == "alpha") c.alpha = parse_number<double>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "dataset") c.dataset = value;
    else if (key == "generator_loss_mode") c.generator_loss_mode = parse_generator_loss_mode(value);
    else if (key == "checkpoint_every") c.checkpoint_every = parse_number<std::size_t>(key, value);
    else if (key == "collapse_threshold") c.collapse_threshold = parse_number<double>(key, value);
    else if (key == "collapse_patience") c.collapse_patience = parse_number<std::size_t>(key, value);
    else throw ParseError("unknown training config key '" + key + "'");
  }
}

}  // namespace crossgen::train
