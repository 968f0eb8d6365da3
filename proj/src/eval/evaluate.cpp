#include "crossgen/eval/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "crossgen/train/trainer.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::eval {

namespace {

constexpr std::size_t kImagePixels = 28 * 28;

Tensor slice_rows(const Tensor& t, std::size_t start, std::size_t count) {
  tensor::Shape shape = t.shape();
  const std::size_t row = t.size() / shape[0];
  shape[0] = count;
  const auto src = t.data().subspan(start * row, count * row);
  return Tensor(std::move(shape), std::vector<float>(src.begin(), src.end()));
}

std::size_t checked_batch(std::size_t batch_size) {
  if (batch_size == 0) throw Error("evaluation batch size must be positive");
  return batch_size;
}

}  // namespace

LatentSet encode_test_set(models::AudioToImageModel& model, const data::PairSet& pairs, const EvalOptions& options) {
  if (pairs.size() == 0) throw Error("evaluation: empty pair set");
  const std::size_t batch = checked_batch(options.batch_size);
  const auto previous_mode = model.mode();
  model.set_mode(Mode::eval);
  tensor::NoGradGuard no_grad;

  const std::size_t n = pairs.size();
  LatentSet out{Tensor({n, models::kLatentDim}), std::vector<int>(n)};
  Rng eps_rng(derive_seed(options.seed, "eval/eps"));
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch) {
    idx.resize(std::min(batch, n - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto b = train::make_batch(pairs, idx);
    const auto latent = model.encode(Var::constant(b.spectrograms));
    Tensor f;
    if (options.use_mean) {
      f = latent.mu.value();
    } else {
      Tensor eps({idx.size(), models::kLatentDim});
      for (auto& v : eps.data()) v = static_cast<float>(eps_rng.normal());
      f = tensor::reparametrize(latent.mu, latent.log_var, eps).value();
    }
    std::copy(f.data().begin(), f.data().end(), out.f.data().begin() + start * models::kLatentDim);
    std::copy(b.labels.begin(), b.labels.end(), out.labels.begin() + start);
  }
  model.set_mode(previous_mode);
  return out;
}

GeneratedSet decode_latents(models::AudioToImageModel& model, const LatentSet& latents, std::size_t batch_size) {
  const std::size_t batch = checked_batch(batch_size);
  const std::size_t n = latents.labels.size();
  if (latents.f.rank() != 2 || latents.f.shape()[0] != n || latents.f.shape()[1] != models::kLatentDim)
    throw DimensionError("decode_latents: expected [" + std::to_string(n) + ",64] codes, got " +
                         tensor::to_string(latents.f.shape()));
  const auto previous_mode = model.mode();
  model.set_mode(Mode::eval);
  tensor::NoGradGuard no_grad;

  GeneratedSet out{Tensor({n, 1, 28, 28}), latents.labels};
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    const Var images = model.decode(Var::constant(slice_rows(latents.f, start, count)));
    std::copy(images.value().data().begin(), images.value().data().end(),
              out.images.data().begin() + start * kImagePixels);
  }
  model.set_mode(previous_mode);
  return out;
}

GeneratedSet generate_test_images(models::AudioToImageModel& model, const data::PairSet& pairs,
                                  const EvalOptions& options) {
  return decode_latents(model, encode_test_set(model, pairs, options), options.batch_size);
}

GeneratedSet generate_test_images(const train::Checkpoint& checkpoint, const data::PairSet& pairs,
                                  const EvalOptions& options, const std::string& expected_architecture) {
  if (!expected_architecture.empty() && checkpoint.architecture != expected_architecture)
    throw Error("checkpoint architecture '" + checkpoint.architecture + "' does not match expected '" +
                expected_architecture + "'");
  auto model = train::restore_generator(checkpoint);
  return generate_test_images(*model, pairs, options);
}

std::vector<int> classify(models::Lenet5& classifier, const Tensor& images, std::size_t batch_size) {
  const std::size_t batch = checked_batch(batch_size);
  if (images.rank() != 4 || images.shape()[1] != 1 || images.shape()[2] != 28 || images.shape()[3] != 28)
    throw DimensionError("classify: expected [N,1,28,28] images, got " + tensor::to_string(images.shape()));
  const std::size_t n = images.shape()[0];
  std::vector<int> predicted;
  predicted.reserve(n);
  for (std::size_t start = 0; start < n; start += batch) {
    const auto p = classifier.predict28(slice_rows(images, start, std::min(batch, n - start)));
    predicted.insert(predicted.end(), p.begin(), p.end());
  }
  return predicted;
}

EvalReport classify_generated(models::Lenet5& classifier, const GeneratedSet& generated, std::size_t batch_size) {
  EvalReport report;
  const auto predicted = classify(classifier, generated.images, batch_size);
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int truth = generated.labels[i];
    if (truth < 0 || truth > 9) throw Error(fmt::format("classify_generated: label {} out of range", truth));
    ++report.confusion[truth][predicted[i]];
    correct += truth == predicted[i];
  }
  report.n_examples = predicted.size();
  report.accuracy = predicted.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted.size());
  return report;
}

void mask_latents(Tensor& f, std::size_t k, Rng& rng) {
  const std::size_t dim = f.shape().back();
  if (k > dim) throw Error(fmt::format("mask_latents: cannot mask {} of {} components", k, dim));
  if (k == 0) return;
  const std::size_t rows = f.size() / dim;
  std::vector<std::size_t> order(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first k entries form a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_index(dim - i);
      std::swap(order[i], order[j]);
      f[r * dim + order[i]] = 0.0f;
    }
  }
}

MaskSweepResult mask_sweep(models::AudioToImageModel& model, const data::PairSet& pairs, models::Lenet5& classifier,
                           const MaskSweepOptions& options) {
  if (options.trials == 0) throw Error("mask_sweep: trials must be positive");
  if (options.max_k > models::kLatentDim)
    throw Error(fmt::format("mask_sweep: max_k {} exceeds the latent size", options.max_k));
  const EvalOptions eval_options{options.seed, options.use_mean, options.batch_size};
  const LatentSet base = encode_test_set(model, pairs, eval_options);

  MaskSweepResult result;
  result.trials = options.trials;
  result.seed = options.seed;
  for (std::size_t k = 0; k <= options.max_k; ++k) {
    std::vector<double> per_trial;
    double sum = 0.0;
    for (std::size_t t = 0; t < options.trials; ++t) {
      LatentSet masked = base;
      Rng rng(derive_seed(options.seed, fmt::format("eval/mask/{}/{}", k, t)));
      mask_latents(masked.f, k, rng);
      const auto report = classify_generated(classifier, decode_latents(model, masked, options.batch_size));
      per_trial.push_back(report.accuracy);
      sum += report.accuracy;
    }
    result.k.push_back(k);
    result.accuracy.push_back(sum / static_cast<double>(options.trials));
    result.trial_accuracy.push_back(std::move(per_trial));
  }
  return result;
}

double intra_class_variance(const GeneratedSet& generated) {
  const std::size_t n = generated.size();
  if (n == 0) throw Error("intra_class_variance: empty set");
  const auto pixels = generated.images.data();
  if (pixels.size() != n * kImagePixels) throw DimensionError("intra_class_variance: expected 28x28 images");

  double total = 0.0;
  std::size_t classes = 0;
  for (int c = 0; c < 10; ++c) {
    std::vector<double> mean(kImagePixels, 0.0), m2(kImagePixels, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (generated.labels[i] != c) continue;
      ++count;
      for (std::size_t p = 0; p < kImagePixels; ++p) {
        const double x = pixels[i * kImagePixels + p];
        const double delta = x - mean[p];
        mean[p] += delta / static_cast<double>(count);
        m2[p] += delta * (x - mean[p]);
      }
    }
    if (count == 0) continue;
    double var = 0.0;
    for (double v : m2) var += v / static_cast<double>(count);
    total += var / static_cast<double>(kImagePixels);
    ++classes;
  }
  return total / static_cast<double>(classes);
}

std::optional<double> compare_error_rates(const EvalReport& a, const EvalReport& b) {
  if (a.n_examples == 0 || b.n_examples == 0) throw Error("compare_error_rates: empty report");
  const double err_a = 1.0 - a.accuracy;
  const double err_b = 1.0 - b.accuracy;
  if (err_a == 0.0) return std::nullopt;
  return (err_a - err_b) / err_a;
}

}  // namespace crossgen::eval
