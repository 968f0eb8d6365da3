#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crossgen/data/align.hpp"
#include "crossgen/models/aivaegan.hpp"
#include "crossgen/models/lenet5.hpp"
#include "crossgen/models/model.hpp"
#include "crossgen/train/checkpoint.hpp"
#include "crossgen/train/config.hpp"
#include "crossgen/train/losses.hpp"

namespace crossgen::train {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // objective being minimized (VAE loss, generator loss, cross-entropy)
  double reconstruction = 0.0;
  double kl = 0.0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double accuracy = 0.0;             // LeNet5 test accuracy
  double generated_variance = 0.0;   // mean per-pixel variance across generated batches
  double wall_seconds = 0.0;         // not persisted: zero after a checkpoint round trip
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  bool collapse_warning = false;
};

// Tab-separated table with a header row; wall time is omitted so the
// table is reproducible.
std::string format_train_log(const TrainLog& log);

struct Batch {
  Tensor spectrograms;  // [B, 1, 48, 48]
  Tensor images;        // [B, 1, 28, 28]
  std::vector<int> labels;
};

Batch make_batch(const data::PairSet& set, std::span<const std::size_t> indices);
// [B, 1, 28, 28] images in [0, 1].
Tensor image_batch(std::span<const data::ImageSample> images, std::span<const std::size_t> indices);

struct TrainOptions {
  // Periodic checkpoints go to checkpoint_dir/checkpoint.aick when nonempty.
  std::filesystem::path checkpoint_dir;
  // Continue from this state instead of a fresh initialization.
  std::optional<Checkpoint> resume;
  // Stop after this many completed epochs (0 runs to config.epochs).
  std::size_t stop_after_epoch = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;  // final state (best state for LeNet5)
  TrainLog log;
};

TrainResult train_aivae(const TrainConfig& config, const data::PairSet& pairs, const TrainOptions& options = {});
TrainResult train_aivaegan(const TrainConfig& config, const data::PairSet& pairs, const TrainOptions& options = {});
TrainResult train_lenet5(const TrainConfig& config, const std::vector<data::ImageSample>& train_images,
                         const std::vector<data::ImageSample>& test_images, const TrainOptions& options = {});

// Models rebuilt from a checkpoint, in eval mode.
std::unique_ptr<models::AudioToImageModel> restore_generator(const Checkpoint& checkpoint);
std::unique_ptr<models::Lenet5> restore_lenet5(const Checkpoint& checkpoint);

// Fraction of images the classifier labels correctly.
double classifier_accuracy(models::Lenet5& net, const std::vector<data::ImageSample>& images);

}  // namespace crossgen::train
