#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "crossgen/models/aivae.hpp"
#include "crossgen/train/checkpoint.hpp"
#include "crossgen/train/config.hpp"
#include "crossgen/train/losses.hpp"
#include "crossgen/train/trainer.hpp"
#include "crossgen/util/errors.hpp"
#include "crossgen/util/log.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace crossgen;
using namespace crossgen::train;
using tensor::Shape;

namespace {

Var constant(Shape shape, float v) { return Var::constant(Tensor(std::move(shape), v)); }

Var random_var(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return Var::constant(std::move(t));
}

double kl_value(std::vector<float> mu, std::vector<float> lv) {
  const std::size_t n = mu.size();
  return tensor::kl_divergence(Var::constant(Tensor({1, n}, std::move(mu))), Var::constant(Tensor({1, n}, std::move(lv))))
      .value()[0];
}

TrainConfig tiny_config(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 8;
  c.seed = 77;
  return c;
}

void check_same_state(const Checkpoint& a, const Checkpoint& b) {
  REQUIRE(a.stores.size() == b.stores.size());
  for (std::size_t s = 0; s < a.stores.size(); ++s) {
    const auto& x = a.stores[s].state;
    const auto& y = b.stores[s].state;
    CHECK(x.step_count == y.step_count);
    REQUIRE(x.params.size() == y.params.size());
    for (std::size_t i = 0; i < x.params.size(); ++i) {
      CAPTURE(x.params[i].name);
      CHECK(x.params[i].value == y.params[i].value);
      CHECK(x.moments_m[i].value == y.moments_m[i].value);
      CHECK(x.moments_v[i].value == y.moments_v[i].value);
    }
    REQUIRE(x.buffers.size() == y.buffers.size());
    for (std::size_t i = 0; i < x.buffers.size(); ++i) CHECK(x.buffers[i].value == y.buffers[i].value);
  }
  CHECK(a.rng_state == b.rng_state);
  CHECK(a.epoch == b.epoch);
}

void check_same_log(const TrainLog& a, const TrainLog& b) {
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].loss == b.epochs[i].loss);
    CHECK(a.epochs[i].d_loss == b.epochs[i].d_loss);
    CHECK(a.epochs[i].reconstruction == b.epochs[i].reconstruction);
  }
}

}  // namespace

TEST_CASE("KL divergence closed form") {
  CHECK(kl_value({0, 0, 0}, {0, 0, 0}) == 0.0);
  CHECK(kl_value({1}, {0}) == doctest::Approx(0.5));
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> mu(8), lv(8);
    for (auto& v : mu) v = static_cast<float>(rng.uniform(-3, 3));
    for (auto& v : lv) v = static_cast<float>(rng.uniform(-4, 4));
    CHECK(kl_value(mu, lv) >= 0.0);
  }
}

TEST_CASE("KL closed form agrees with a Monte-Carlo estimate") {
  const std::vector<float> mu = {0.8f, -1.2f, 0.3f};
  const std::vector<float> lv = {-0.5f, 0.7f, 0.0f};
  Rng rng(2);
  const int n = 100000;
  double acc = 0;
  for (int s = 0; s < n; ++s) {
    // log q(z) - log p(z) at z ~ q.
    double log_ratio = 0;
    for (std::size_t d = 0; d < mu.size(); ++d) {
      const double sigma = std::exp(0.5 * lv[d]);
      const double eps = rng.normal();
      const double z = mu[d] + sigma * eps;
      log_ratio += -0.5 * eps * eps - std::log(sigma) + 0.5 * z * z;
    }
    acc += log_ratio;
  }
  const double estimate = acc / n;
  const double closed = kl_value(mu, lv);
  CHECK(std::abs(estimate - closed) / closed < 0.01);
}

TEST_CASE("reconstruction loss") {
  Rng rng(3);
  Tensor binary({1, 1, 28, 28});
  for (auto& v : binary.data()) v = rng.uniform() < 0.3 ? 1.0f : 0.0f;
  CHECK(reconstruction_loss(Var::constant(binary), binary).value()[0] == 0.0f);

  auto target = random_var({1, 1, 28, 28}, 4).value();
  const double at_half = reconstruction_loss(constant({1, 1, 28, 28}, 0.5f), target).value()[0];
  CHECK(at_half == doctest::Approx(784 * std::numbers::ln2).epsilon(1e-5));
  CHECK(reconstruction_loss_from_logits(constant({1, 1, 28, 28}, 0.0f), target).value()[0] ==
        doctest::Approx(784 * std::numbers::ln2).epsilon(1e-5));

  // Moving every prediction toward the target lowers the loss.
  auto pred = random_var({1, 1, 28, 28}, 5, 0.05, 0.95).value();
  double previous = reconstruction_loss(Var::constant(pred), binary).value()[0];
  for (int step = 0; step < 5; ++step) {
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += 0.3f * (binary[i] - pred[i]);
    const double now = reconstruction_loss(Var::constant(pred), binary).value()[0];
    CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("batch of identical pairs has the single-pair VAE loss") {
  auto logits1 = random_var({1, 1, 28, 28}, 6, -2, 2).value();
  auto target1 = random_var({1, 1, 28, 28}, 7).value();
  auto mu1 = random_var({1, 64}, 8, -1, 1).value();
  auto lv1 = random_var({1, 64}, 9, -1, 1).value();
  auto repeat = [](const Tensor& t, std::size_t n) {
    Shape s = t.shape();
    s[0] = n;
    Tensor out(s);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i % t.size()];
    return out;
  };
  const auto one = vae_loss(Var::constant(logits1), target1, Var::constant(mu1), Var::constant(lv1));
  const auto four = vae_loss(Var::constant(repeat(logits1, 4)), repeat(target1, 4), Var::constant(repeat(mu1, 4)),
                             Var::constant(repeat(lv1, 4)));
  CHECK(four.total.value()[0] == doctest::Approx(one.total.value()[0]).epsilon(1e-6));
  CHECK(one.total.value()[0] > 0.0f);
}

TEST_CASE("adversarial losses") {
  const Var half = constant({16}, 0.5f);
  CHECK(discriminator_loss(half, half).value()[0] == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-6));
  CHECK(generator_adversarial_loss(half, GeneratorLossMode::non_saturating).value()[0] ==
        doctest::Approx(std::numbers::ln2).epsilon(1e-6));
  CHECK(generator_adversarial_loss(half, GeneratorLossMode::minimax).value()[0] ==
        doctest::Approx(-std::numbers::ln2).epsilon(1e-6));
  // Saturated outputs are clamped rather than producing infinities.
  CHECK(std::isfinite(discriminator_loss(constant({2}, 0.0f), constant({2}, 1.0f)).value()[0]));

  const Var d_fake = random_var({4}, 10, 0.1, 0.9);
  const Var logits = random_var({4, 1, 28, 28}, 11, -3, 3);
  const auto target = random_var({4, 1, 28, 28}, 12).value();
  const Var mu = random_var({4, 64}, 13, -1, 1);
  const Var lv = random_var({4, 64}, 14, -1, 1);
  const auto mode = GeneratorLossMode::non_saturating;
  const auto g0 = generator_loss(d_fake, logits, target, mu, lv, 0.0, mode);
  CHECK(g0.total.value()[0] == doctest::Approx(g0.adversarial + g0.kl).epsilon(1e-6));
  const auto g1 = generator_loss(d_fake, logits, target, mu, lv, 1.0, mode);
  const auto g2 = generator_loss(d_fake, logits, target, mu, lv, 2.0, mode);
  CHECK(g1.reconstruction == g2.reconstruction);
  CHECK(g1.adversarial == g2.adversarial);
  CHECK(g1.kl == g2.kl);
  // Linear in alpha with slope equal to the reconstruction term.
  const double slope = g2.total.value()[0] - g1.total.value()[0];
  CHECK(slope == doctest::Approx(g1.reconstruction).epsilon(1e-5));
}

TEST_CASE("config key/value round trip and validation") {
  TrainConfig c;
  c.alpha = 0.5;
  c.seed = 1234567890123ull;
  c.generator_loss_mode = GeneratorLossMode::minimax;
  TrainConfig d;
  apply_key_values(d, to_key_values(c));
  CHECK(to_key_values(d) == to_key_values(c));
  CHECK(d.alpha == 0.5);
  CHECK_THROWS_AS(apply_key_values(d, {{"learning_rate", "1"}}), ParseError);
  CHECK_THROWS_AS(apply_key_values(d, {{"epochs", "ten"}}), ParseError);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TrainConfig{};
  bad.latent_dim = 32;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("checkpoint round trip reproduces forward outputs") {
  fixtures::TempDir dir("ckpt");
  models::Aivae model(5);
  Checkpoint ck;
  ck.architecture = "aivae";
  ck.epoch = 3;
  ck.config = to_key_values(TrainConfig{});
  Rng rng(9);
  rng.normal();
  ck.rng_state = rng.serialize();
  ck.stores = {{"model", model.params().export_state()}};
  ck.metadata = {{"note", "x"}};
  save_checkpoint(dir.path() / "a.aick", ck);

  auto back = load_checkpoint(dir.path() / "a.aick", "aivae");
  CHECK(back.epoch == 3);
  CHECK(back.config == ck.config);
  CHECK(back.metadata == ck.metadata);
  CHECK(Rng::deserialize(back.rng_state) == rng);
  auto restored = restore_generator(back);
  model.set_mode(models::Mode::eval);
  const Var f = random_var({2, 64}, 15, -1, 1);
  CHECK(restored->decode(f).value() == model.decode(f).value());
  const Var spec = random_var({2, 1, 48, 48}, 16);
  CHECK(restored->encode(spec).mu.value() == model.encode(spec).mu.value());

  CHECK_THROWS_AS(load_checkpoint(dir.path() / "a.aick", "lenet5"), Error);
  CHECK_THROWS_AS(restore_lenet5(back), Error);

  std::ifstream in(dir.path() / "a.aick", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  bytes[bytes.size() / 2] ^= 0x10;
  std::ofstream(dir.path() / "bad.aick", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.aick"), ParseError);
  bytes[4] = 9;  // version
  std::ofstream(dir.path() / "ver.aick", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path() / "ver.aick"), doctest::Contains("version"), ParseError);
}

TEST_CASE("AIVAE training is deterministic and resumes step for step") {
  const auto pairs = fixtures::small_pairset(2, 1, data::MappingKind::many_to_one, 3);
  const auto a = train_aivae(tiny_config(3), pairs);
  const auto b = train_aivae(tiny_config(3), pairs);
  check_same_state(a.checkpoint, b.checkpoint);
  REQUIRE(a.log.epochs.size() == 3);
  for (const auto& r : a.log.epochs) CHECK(std::isfinite(r.loss));
  CHECK(a.log.epochs.back().loss < a.log.epochs.front().loss);

  fixtures::TempDir dir("resume");
  TrainOptions first;
  first.checkpoint_dir = dir.path();
  first.stop_after_epoch = 1;
  const auto partial = train_aivae(tiny_config(3), pairs, first);
  CHECK(partial.checkpoint.epoch == 1);
  TrainOptions second;
  second.resume = load_checkpoint(dir.path() / "checkpoint.aick", "aivae");
  const auto resumed = train_aivae(tiny_config(3), pairs, second);
  check_same_state(resumed.checkpoint, a.checkpoint);
  check_same_log(resumed.log, a.log);
}

TEST_CASE("AIVAEGAN training resumes step for step and logs both losses") {
  const auto pairs = fixtures::small_pairset(1, 1, data::MappingKind::one_to_one, 4);
  auto config = tiny_config(2);
  config.alpha = 2.0;
  const auto full = train_aivaegan(config, pairs);
  REQUIRE(full.log.epochs.size() == 2);
  for (const auto& r : full.log.epochs) {
    CHECK(std::isfinite(r.d_loss));
    CHECK(std::isfinite(r.g_loss));
    CHECK(r.d_loss > 0.0);
  }
  TrainOptions first;
  first.stop_after_epoch = 1;
  const auto partial = train_aivaegan(config, pairs, first);
  TrainOptions second;
  second.resume = partial.checkpoint;
  const auto resumed = train_aivaegan(config, pairs, second);
  check_same_state(resumed.checkpoint, full.checkpoint);
  check_same_log(resumed.log, full.log);
  CHECK_THROWS_AS(train_aivae(config, pairs, second), Error);
}

TEST_CASE("mode collapse heuristic warns after the patience window") {
  const auto pairs = fixtures::small_pairset(1, 1, data::MappingKind::one_to_one, 4);
  auto config = tiny_config(2);
  config.collapse_threshold = 10.0;  // any variance counts as collapsed
  config.collapse_patience = 2;
  std::vector<std::string> warnings;
  auto previous = set_log_sink([&](LogLevel level, const std::string& m) {
    if (level == LogLevel::warning) warnings.push_back(m);
  });
  const auto result = train_aivaegan(config, pairs);
  set_log_sink(previous);
  CHECK(result.log.collapse_warning);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("mode collapse") != std::string::npos);
}

TEST_CASE("non-finite loss aborts with epoch and batch") {
  const auto pairs = fixtures::small_pairset(1, 1, data::MappingKind::many_to_one, 5);
  TrainOptions first;
  first.stop_after_epoch = 1;
  auto poisoned = train_aivae(tiny_config(2), pairs, first).checkpoint;
  for (auto& p : poisoned.stores[0].state.params) {
    if (p.name == "dec.up2.bias") p.value[0] = std::nanf("");
  }
  TrainOptions second;
  second.resume = poisoned;
  CHECK_THROWS_WITH_AS(train_aivae(tiny_config(2), pairs, second), doctest::Contains("epoch 2 batch 0"), NumericError);
}

TEST_CASE("LeNet5 learns synthetic digits and keeps the best epoch") {
  const auto train_images = fixtures::synthetic_digits(30, 1);
  const auto test_images = fixtures::synthetic_digits(5, 2);

  // A single batch is fit progressively.
  models::Lenet5 net(1);
  std::vector<std::size_t> idx(32);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> labels;
  for (auto i : idx) labels.push_back(train_images[i].label);
  const Var input = Var::constant(tensor::pad2d(image_batch(train_images, idx), 2));
  double first = 0, last = 0;
  for (int step = 0; step < 20; ++step) {
    net.params().zero_grad();
    const Var loss = tensor::cross_entropy(net.logits(input), labels);
    if (step == 0) first = loss.value()[0];
    last = loss.value()[0];
    tensor::backward(loss);
    tensor::adam_step(net.params(), {.lr = 1e-3});
  }
  CHECK(last < first);

  auto config = tiny_config(3);
  config.batch_size = 32;
  const auto result = train_lenet5(config, train_images, test_images);
  double best = 0;
  for (const auto& r : result.log.epochs) best = std::max(best, r.accuracy);
  auto restored = restore_lenet5(result.checkpoint);
  CHECK(classifier_accuracy(*restored, test_images) == best);
  CHECK(best > 0.5);
}
