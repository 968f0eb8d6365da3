#include "crossgen/train/trainer.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crossgen/models/aivae.hpp"
#include "crossgen/train/losses.hpp"
#include "crossgen/util/errors.hpp"
#include "crossgen/util/log.hpp"

namespace crossgen::train {

using models::Mode;
using tensor::NoGradGuard;

namespace {

constexpr const char* kLogPrefix = "log.epoch.";
constexpr std::size_t kEvalBatch = 500;

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return order;
}

Tensor normal_tensor(tensor::Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

void require_finite(double value, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(value)) {
    throw NumericError(fmt::format("non-finite {} at epoch {} batch {}", what, epoch, batch));
  }
}

// Mean over pixels of the variance across the batch; zero when every
// generated image is identical.
double batch_pixel_variance(const Tensor& images) {
  const std::size_t batch = images.dim(0);
  const std::size_t pixels = images.size() / batch;
  if (batch < 2) return 0.0;
  double total = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    double mean = 0.0;
    for (std::size_t b = 0; b < batch; ++b) mean += images[b * pixels + p];
    mean /= static_cast<double>(batch);
    double var = 0.0;
    for (std::size_t b = 0; b < batch; ++b) var += std::pow(images[b * pixels + p] - mean, 2);
    total += var / static_cast<double>(batch);
  }
  return total / static_cast<double>(pixels);
}

std::string encode_record(const EpochRecord& r) {
  // Wall time is left out so reruns produce byte-identical checkpoints.
  return fmt::format("{} {} {} {} {} {} {}", r.loss, r.reconstruction, r.kl, r.d_loss, r.g_loss, r.accuracy,
                     r.generated_variance);
}

EpochRecord decode_record(std::size_t epoch, const std::string& text) {
  EpochRecord r;
  r.epoch = epoch;
  std::istringstream in(text);
  in >> r.loss >> r.reconstruction >> r.kl >> r.d_loss >> r.g_loss >> r.accuracy >> r.generated_variance;
  if (!in) throw ParseError("checkpoint: malformed log record for epoch " + std::to_string(epoch));
  return r;
}

KeyValues log_metadata(const TrainLog& log) {
  KeyValues kv;
  for (const auto& r : log.epochs) kv.emplace_back(kLogPrefix + std::to_string(r.epoch), encode_record(r));
  kv.emplace_back("log.collapse_warning", log.collapse_warning ? "1" : "0");
  return kv;
}

TrainLog log_from_metadata(const KeyValues& kv) {
  TrainLog log;
  const std::string prefix = kLogPrefix;
  for (const auto& [k, v] : kv) {
    if (k.rfind(prefix, 0) == 0) log.epochs.push_back(decode_record(std::stoul(k.substr(prefix.size())), v));
    if (k == "log.collapse_warning") log.collapse_warning = v == "1";
  }
  return log;
}

const std::string* find_value(const KeyValues& kv, const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return &v;
  return nullptr;
}

// Shared epoch bookkeeping: resume, periodic checkpoints, logging.
class Session {
 public:
  Session(const TrainConfig& config, const TrainOptions& options, std::string architecture)
      : config_(config), options_(options), architecture_(std::move(architecture)) {
    config_.validate();
    rng_ = Rng(derive_seed(config_.seed, "train/" + architecture_));
    if (options_.resume) {
      const auto& ck = *options_.resume;
      if (ck.architecture != architecture_) {
        throw Error("cannot resume " + architecture_ + " training from a '" + ck.architecture + "' checkpoint");
      }
      start_epoch_ = ck.epoch;
      rng_ = Rng::deserialize(ck.rng_state);
      log_ = log_from_metadata(ck.metadata);
    }
  }

  std::size_t start_epoch() const { return start_epoch_; }
  std::size_t end_epoch() const {
    return options_.stop_after_epoch ? std::min(options_.stop_after_epoch, config_.epochs) : config_.epochs;
  }
  Rng& rng() { return rng_; }
  TrainLog& log() { return log_; }
  const TrainConfig& config() const { return config_; }

  Checkpoint snapshot(std::size_t epoch, std::vector<NamedStore> stores, KeyValues extra = {}) const {
    Checkpoint ck;
    ck.architecture = architecture_;
    ck.epoch = static_cast<std::uint32_t>(epoch);
    ck.config = to_key_values(config_);
    ck.rng_state = rng_.serialize();
    ck.stores = std::move(stores);
    ck.metadata = log_metadata(log_);
    ck.metadata.insert(ck.metadata.end(), extra.begin(), extra.end());
    return ck;
  }

  void finish_epoch(EpochRecord record, const std::function<Checkpoint()>& make_checkpoint) {
    log_.epochs.push_back(record);
    log_info(fmt::format("{} epoch {}/{}: loss {:.6g}", architecture_, record.epoch, config_.epochs, record.loss));
    if (options_.on_epoch) options_.on_epoch(record);
    const bool due = record.epoch % config_.checkpoint_every == 0 || record.epoch == end_epoch();
    if (!options_.checkpoint_dir.empty() && due) {
      std::filesystem::create_directories(options_.checkpoint_dir);
      save_checkpoint(options_.checkpoint_dir / "checkpoint.aick", make_checkpoint());
    }
  }

 private:
  TrainConfig config_;
  const TrainOptions& options_;
  std::string architecture_;
  Rng rng_;
  TrainLog log_;
  std::size_t start_epoch_ = 0;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string format_train_log(const TrainLog& log) {
  std::string out = "epoch\tloss\treconstruction\tkl\td_loss\tg_loss\taccuracy\tgenerated_variance\n";
  for (const auto& r : log.epochs) {
    out += fmt::format("{}\t{:.9g}\t{:.9g}\t{:.9g}\t{:.9g}\t{:.9g}\t{:.9g}\t{:.9g}\n", r.epoch, r.loss,
                       r.reconstruction, r.kl, r.d_loss, r.g_loss, r.accuracy, r.generated_variance);
  }
  return out;
}

Tensor image_batch(std::span<const data::ImageSample> images, std::span<const std::size_t> indices) {
  Tensor out({indices.size(), 1, data::kImageSide, data::kImageSide});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& px = images[indices[b]].pixels;
    for (std::size_t i = 0; i < data::kImagePixels; ++i) out[b * data::kImagePixels + i] = px[i] / 255.0f;
  }
  return out;
}

Batch make_batch(const data::PairSet& set, std::span<const std::size_t> indices) {
  const std::size_t n = indices.size();
  Batch batch{Tensor({n, 1, audio::kSpectrogramSide, audio::kSpectrogramSide}),
              Tensor({n, 1, data::kImageSide, data::kImageSide}), std::vector<int>(n)};
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t i = indices[b];
    const auto spec = set.spectrogram(i).pixels.data();
    std::copy(spec.begin(), spec.end(), batch.spectrograms.data().begin() + b * audio::kSpectrogramPixels);
    const auto& px = set.image(i).pixels;
    for (std::size_t p = 0; p < data::kImagePixels; ++p) batch.images[b * data::kImagePixels + p] = px[p] / 255.0f;
    batch.labels[b] = set.label(i);
  }
  return batch;
}

TrainResult train_aivae(const TrainConfig& config, const data::PairSet& pairs, const TrainOptions& options) {
  if (pairs.size() == 0) throw Error("train_aivae: empty pair set");
  Session session(config, options, models::Aivae::kArchitecture);
  models::Aivae model(derive_seed(config.seed, "init/aivae"));
  if (options.resume) model.params().import_state(options.resume->store("model"));
  model.set_mode(Mode::train);
  auto checkpoint = [&](std::size_t epoch) { return session.snapshot(epoch, {{"model", model.params().export_state()}}); };

  const tensor::AdamOptions adam{.lr = config.lr_aivae};
  for (std::size_t epoch = session.start_epoch() + 1; epoch <= session.end_epoch(); ++epoch) {
    const auto t0 = Clock::now();
    const auto order = permutation(pairs.size(), session.rng());
    double loss_sum = 0, recon_sum = 0, kl_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, order.size() - start));
      const Batch batch = make_batch(pairs, idx);
      const Tensor eps = normal_tensor({idx.size(), models::kLatentDim}, session.rng());

      model.params().zero_grad();
      const auto latent = model.encode(Var::constant(batch.spectrograms));
      const Var f = tensor::reparametrize(latent.mu, latent.log_var, eps);
      const auto terms = vae_loss(model.decode_logits(f), batch.images, latent.mu, latent.log_var);
      require_finite(terms.total.value()[0], "loss", epoch, batch_index);
      tensor::backward(terms.total);
      tensor::adam_step(model.params(), adam);

      const double w = static_cast<double>(idx.size());
      loss_sum += terms.total.value()[0] * w;
      recon_sum += terms.reconstruction * w;
      kl_sum += terms.kl * w;
    }
    const double n = static_cast<double>(pairs.size());
    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / n;
    record.reconstruction = recon_sum / n;
    record.kl = kl_sum / n;
    record.wall_seconds = seconds_since(t0);
    session.finish_epoch(record, [&] { return checkpoint(epoch); });
  }
  model.set_mode(Mode::eval);
  return {checkpoint(session.end_epoch()), session.log()};
}

TrainResult train_aivaegan(const TrainConfig& config, const data::PairSet& pairs, const TrainOptions& options) {
  if (pairs.size() < 2) throw Error("train_aivaegan: need at least two pairs for batch statistics");
  Session session(config, options, models::AivaeganGenerator::kArchitecture);
  models::AivaeganGenerator gen(derive_seed(config.seed, "init/aivaegan/generator"));
  models::Discriminator disc(derive_seed(config.seed, "init/aivaegan/discriminator"));
  if (options.resume) {
    gen.params().import_state(options.resume->store("generator"));
    disc.params().import_state(options.resume->store("discriminator"));
  }
  gen.set_mode(Mode::train);
  disc.set_mode(Mode::train);
  auto checkpoint = [&](std::size_t epoch) {
    return session.snapshot(epoch, {{"generator", gen.params().export_state()},
                                    {"discriminator", disc.params().export_state()}});
  };

  std::size_t low_variance_run = 0;
  for (const auto& r : session.log().epochs) {
    low_variance_run = r.generated_variance < config.collapse_threshold ? low_variance_run + 1 : 0;
  }

  const tensor::AdamOptions adam{.lr = config.lr_gan, .beta1 = 0.5};
  for (std::size_t epoch = session.start_epoch() + 1; epoch <= session.end_epoch(); ++epoch) {
    const auto t0 = Clock::now();
    const auto order = permutation(pairs.size(), session.rng());
    double d_sum = 0, g_sum = 0, recon_sum = 0, kl_sum = 0, var_sum = 0, seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t size = std::min(config.batch_size, order.size() - start);
      if (size < 2) continue;  // batch normalization needs two samples
      const std::span<const std::size_t> idx(order.data() + start, size);
      const Batch batch = make_batch(pairs, idx);
      const Tensor eps = normal_tensor({size, models::kLatentDim}, session.rng());

      gen.params().zero_grad();
      const auto latent = gen.encode(Var::constant(batch.spectrograms));
      const Var logits = gen.decode_logits(tensor::reparametrize(latent.mu, latent.log_var, eps));
      const Var fake = tensor::sigmoid(logits);

      // Discriminator step on real images and detached generated images.
      disc.params().zero_grad();
      const Var d_loss =
          discriminator_loss(disc.discriminate(Var::constant(batch.images)), disc.discriminate(fake.detach()));
      require_finite(d_loss.value()[0], "discriminator loss", epoch, batch_index);
      tensor::backward(d_loss);
      tensor::adam_step(disc.params(), adam);

      // Generator step against the updated discriminator.
      disc.params().zero_grad();
      const auto g = generator_loss(disc.discriminate(fake), logits, batch.images, latent.mu, latent.log_var,
                                    config.alpha, config.generator_loss_mode);
      require_finite(g.total.value()[0], "generator loss", epoch, batch_index);
      tensor::backward(g.total);
      tensor::adam_step(gen.params(), adam);
      for (auto& e : disc.params().entries()) e.var.clear_grad();

      const double w = static_cast<double>(size);
      d_sum += d_loss.value()[0] * w;
      g_sum += g.total.value()[0] * w;
      recon_sum += g.reconstruction * w;
      kl_sum += g.kl * w;
      var_sum += batch_pixel_variance(fake.value()) * w;
      seen += w;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.d_loss = d_sum / seen;
    record.g_loss = record.loss = g_sum / seen;
    record.reconstruction = recon_sum / seen;
    record.kl = kl_sum / seen;
    record.generated_variance = var_sum / seen;
    record.wall_seconds = seconds_since(t0);

    low_variance_run = record.generated_variance < config.collapse_threshold ? low_variance_run + 1 : 0;
    if (low_variance_run >= config.collapse_patience && !session.log().collapse_warning) {
      session.log().collapse_warning = true;
      log_warning(fmt::format("possible mode collapse: generated pixel variance below {} for {} consecutive epochs",
                              config.collapse_threshold, low_variance_run));
    }
    session.finish_epoch(record, [&] { return checkpoint(epoch); });
  }
  gen.set_mode(Mode::eval);
  return {checkpoint(session.end_epoch()), session.log()};
}

double classifier_accuracy(models::Lenet5& net, const std::vector<data::ImageSample>& images) {
  if (images.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.size(); start += kEvalBatch) {
    idx.resize(std::min(kEvalBatch, images.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto predicted = net.predict28(image_batch(images, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) correct += predicted[b] == images[idx[b]].label;
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

TrainResult train_lenet5(const TrainConfig& config, const std::vector<data::ImageSample>& train_images,
                         const std::vector<data::ImageSample>& test_images, const TrainOptions& options) {
  if (train_images.empty() || test_images.empty()) throw Error("train_lenet5: empty image set");
  Session session(config, options, models::Lenet5::kArchitecture);
  models::Lenet5 net(derive_seed(config.seed, "init/lenet5"));

  // The running state and the best state are kept separately; the
  // checkpoint carries both so a resumed run can continue the search.
  tensor::StoreState best;
  double best_accuracy = -1.0;
  std::size_t best_epoch = 0;
  if (options.resume) {
    net.params().import_state(options.resume->store("model"));
    best = options.resume->store("best");
    if (const auto* v = find_value(options.resume->metadata, "best_accuracy")) best_accuracy = std::stod(*v);
    if (const auto* v = find_value(options.resume->metadata, "best_epoch")) best_epoch = std::stoul(*v);
  }
  auto extra = [&] {
    return KeyValues{{"best_accuracy", fmt::format("{:.17g}", best_accuracy)},
                     {"best_epoch", std::to_string(best_epoch)}};
  };
  auto checkpoint = [&](std::size_t epoch) {
    return session.snapshot(epoch, {{"model", net.params().export_state()}, {"best", best}}, extra());
  };

  const tensor::AdamOptions adam{.lr = config.lr_lenet};
  for (std::size_t epoch = session.start_epoch() + 1; epoch <= session.end_epoch(); ++epoch) {
    const auto t0 = Clock::now();
    const auto order = permutation(train_images.size(), session.rng());
    double loss_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(config.batch_size, order.size() - start));
      std::vector<int> labels(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = train_images[idx[b]].label;
      net.params().zero_grad();
      const Var input = Var::constant(tensor::pad2d(image_batch(train_images, idx), 2));
      const Var loss = tensor::cross_entropy(net.logits(input), labels);
      require_finite(loss.value()[0], "loss", epoch, batch_index);
      tensor::backward(loss);
      tensor::adam_step(net.params(), adam);
      loss_sum += loss.value()[0] * static_cast<double>(idx.size());
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(train_images.size());
    record.accuracy = classifier_accuracy(net, test_images);
    record.wall_seconds = seconds_since(t0);
    if (record.accuracy > best_accuracy) {
      best_accuracy = record.accuracy;
      best_epoch = epoch;
      best = net.params().export_state();
    }
    session.finish_epoch(record, [&] { return checkpoint(epoch); });
  }

  // The returned checkpoint holds the best weights as its model.
  Checkpoint result = checkpoint(session.end_epoch());
  result.stores = {{"model", best}};
  return {std::move(result), session.log()};
}

std::unique_ptr<models::AudioToImageModel> restore_generator(const Checkpoint& checkpoint) {
  std::unique_ptr<models::AudioToImageModel> model;
  if (checkpoint.architecture == models::Aivae::kArchitecture) {
    model = std::make_unique<models::Aivae>(0);
    model->params().import_state(checkpoint.store("model"));
  } else if (checkpoint.architecture == models::AivaeganGenerator::kArchitecture) {
    model = std::make_unique<models::AivaeganGenerator>(0);
    model->params().import_state(checkpoint.store("generator"));
  } else {
    throw Error("checkpoint architecture '" + checkpoint.architecture + "' is not an audio-to-image model");
  }
  model->set_mode(Mode::eval);
  return model;
}

std::unique_ptr<models::Lenet5> restore_lenet5(const Checkpoint& checkpoint) {
  if (checkpoint.architecture != models::Lenet5::kArchitecture) {
    throw Error("checkpoint architecture '" + checkpoint.architecture + "' is not a LeNet5 classifier");
  }
  auto net = std::make_unique<models::Lenet5>(0);
  net->params().import_state(checkpoint.store("model"));
  return net;
}

}  // namespace crossgen::train
