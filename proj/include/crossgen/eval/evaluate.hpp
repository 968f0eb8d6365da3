#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crossgen/data/align.hpp"
#include "crossgen/models/lenet5.hpp"
#include "crossgen/models/model.hpp"
#include "crossgen/train/checkpoint.hpp"
#include "crossgen/util/rng.hpp"

namespace crossgen::eval {

using tensor::Tensor;
using tensor::Var;
using models::Mode;

struct EvalOptions {
  std::uint64_t seed = 0;
  // Decode the posterior mean instead of a reparametrized sample.
  bool use_mean = false;
  // Batch size only bounds memory; results do not depend on it.
  std::size_t batch_size = 250;
};

// Latent codes for every pair of a set, in pair order.
struct LatentSet {
  Tensor f;  // [N, 64]
  std::vector<int> labels;
};

struct GeneratedSet {
  Tensor images;  // [N, 1, 28, 28] in [0, 1]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// Example i uses the i-th block of 64 normals from the "eval/eps" stream of
// the seed, so the codes do not depend on batching.
LatentSet encode_test_set(models::AudioToImageModel& model, const data::PairSet& pairs, const EvalOptions& options);
GeneratedSet decode_latents(models::AudioToImageModel& model, const LatentSet& latents, std::size_t batch_size = 250);

GeneratedSet generate_test_images(models::AudioToImageModel& model, const data::PairSet& pairs,
                                  const EvalOptions& options);
// Restores the generator; throws when the checkpoint architecture differs
// from `expected_architecture` (if given) or is not a generator.
GeneratedSet generate_test_images(const train::Checkpoint& checkpoint, const data::PairSet& pairs,
                                  const EvalOptions& options, const std::string& expected_architecture = {});

struct EvalReport {
  std::string dataset;
  std::string model;
  std::optional<double> alpha;
  double accuracy = 0.0;
  std::array<std::array<std::uint64_t, 10>, 10> confusion{};  // [true][predicted]
  std::uint64_t n_examples = 0;
  std::uint64_t seed = 0;
  std::optional<double> intra_class_variance;
};

EvalReport classify_generated(models::Lenet5& classifier, const GeneratedSet& generated, std::size_t batch_size = 500);
std::vector<int> classify(models::Lenet5& classifier, const Tensor& images, std::size_t batch_size = 500);

struct MaskSweepOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::size_t max_k = 64;
  bool use_mean = false;
  std::size_t batch_size = 250;
};

struct MaskSweepResult {
  std::vector<std::size_t> k;
  std::vector<double> accuracy;                  // mean over trials
  std::vector<std::vector<double>> trial_accuracy;  // [k][trial]
  std::size_t trials = 0;
  std::uint64_t seed = 0;
};

// Zeroes `k` distinct latent components per row, drawn uniformly from rng.
void mask_latents(Tensor& f, std::size_t k, Rng& rng);

// For each k, zeroes a fresh random subset of k latent components of every
// example before decoding. All k share the same eps stream, so k = 0
// reproduces the unmasked accuracy exactly.
MaskSweepResult mask_sweep(models::AudioToImageModel& model, const data::PairSet& pairs, models::Lenet5& classifier,
                           const MaskSweepOptions& options);

// Mean over classes of the mean per-pixel variance among that class's images.
double intra_class_variance(const GeneratedSet& generated);

// ((1 - acc_a) - (1 - acc_b)) / (1 - acc_a); empty when acc_a == 1.
std::optional<double> compare_error_rates(const EvalReport& a, const EvalReport& b);

}  // namespace crossgen::eval
