#include <algorithm>
#include <cmath>
#include <set>

#include "crossgen/eval/evaluate.hpp"
#include "crossgen/eval/report.hpp"
#include "crossgen/models/aivae.hpp"
#include "crossgen/models/aivaegan.hpp"
#include "crossgen/train/trainer.hpp"
#include "crossgen/util/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace crossgen;
using namespace crossgen::eval;

namespace {

const data::PairSet& test_pairs() {
  static const data::PairSet set = fixtures::small_pairset(4, 3, data::MappingKind::one_to_one, 11);
  return set;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

EvalReport report_with_accuracy(double accuracy) {
  EvalReport r;
  r.accuracy = accuracy;
  r.n_examples = 1000;
  return r;
}

}  // namespace

TEST_CASE("generate_test_images yields one image per pair with the pair's label") {
  models::Aivae model(1);
  const auto& pairs = test_pairs();
  const auto generated = generate_test_images(model, pairs, {.seed = 5});
  CHECK(generated.size() == pairs.size());
  CHECK(generated.images.shape() == tensor::Shape{pairs.size(), 1, 28, 28});
  for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(generated.labels[i] == pairs.label(i));
  for (float v : generated.images.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("generation is a pure function of the seed and independent of batching") {
  models::Aivae model(1);
  const auto& pairs = test_pairs();
  const auto a = generate_test_images(model, pairs, {.seed = 5, .batch_size = 7});
  const auto b = generate_test_images(model, pairs, {.seed = 5, .batch_size = 250});
  const auto c = generate_test_images(model, pairs, {.seed = 6});
  CHECK(same_values(a.images, b.images));
  CHECK_FALSE(same_values(a.images, c.images));
}

TEST_CASE("sampled codes follow mu + sigma * eps with eps from the evaluation stream") {
  models::Aivae model(2);
  model.set_mode(Mode::eval);
  const auto& pairs = test_pairs();
  const auto codes = encode_test_set(model, pairs, {.seed = 9});

  std::vector<std::size_t> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = train::make_batch(pairs, idx);
  tensor::NoGradGuard no_grad;
  const auto latent = model.encode(Var::constant(batch.spectrograms));
  Rng eps(derive_seed(9, "eval/eps"));
  for (std::size_t i = 0; i < codes.f.size(); ++i) {
    const double expected =
        latent.mu.value()[i] + std::exp(0.5 * latent.log_var.value()[i]) * eps.normal();
    CHECK(codes.f[i] == doctest::Approx(expected).epsilon(1e-5));
  }

  const auto mean_codes = encode_test_set(model, pairs, {.seed = 9, .use_mean = true});
  CHECK(same_values(mean_codes.f, latent.mu.value()));
}

TEST_CASE("generate_test_images from a checkpoint checks the architecture") {
  models::Aivae model(3);
  train::Checkpoint ckpt;
  ckpt.architecture = models::Aivae::kArchitecture;
  ckpt.stores = {{"model", model.params().export_state()}};
  const auto& pairs = test_pairs();
  const auto direct = generate_test_images(model, pairs, {.seed = 1});
  const auto restored = generate_test_images(ckpt, pairs, {.seed = 1}, "aivae");
  CHECK(same_values(direct.images, restored.images));
  CHECK_THROWS_AS(generate_test_images(ckpt, pairs, {.seed = 1}, "aivaegan"), Error);
  ckpt.architecture = "lenet5";
  CHECK_THROWS_AS(generate_test_images(ckpt, pairs, {.seed = 1}), Error);
}

TEST_CASE("confusion matrix is consistent with the accuracy") {
  models::Aivae model(4);
  models::Lenet5 classifier(5);
  const auto& pairs = test_pairs();
  const auto generated = generate_test_images(model, pairs, {.seed = 2});
  const auto report = classify_generated(classifier, generated, 5);
  CHECK(report.n_examples == pairs.size());
  std::uint64_t trace = 0, total = 0;
  for (int t = 0; t < 10; ++t) {
    std::uint64_t row = 0;
    for (int p = 0; p < 10; ++p) row += report.confusion[t][p];
    CHECK(row == static_cast<std::uint64_t>(std::count(generated.labels.begin(), generated.labels.end(), t)));
    trace += report.confusion[t][t];
    total += row;
  }
  CHECK(total == report.n_examples);
  CHECK(report.accuracy == static_cast<double>(trace) / static_cast<double>(report.n_examples));
  CHECK(classify(classifier, generated.images, 3) == classify(classifier, generated.images, 500));
}

TEST_CASE("classify_generated scores labels by the classifier's argmax") {
  models::Lenet5 classifier(6);
  const auto images = fixtures::synthetic_digits(2, 3);
  GeneratedSet set{Tensor({images.size(), 1, 28, 28}), {}};
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t p = 0; p < 784; ++p) set.images[i * 784 + p] = images[i].pixels[p] / 255.0f;
    set.labels.push_back(images[i].label);
  }
  const auto predicted = classify(classifier, set.images);
  // Relabel with the predictions: accuracy must be exactly 1.
  GeneratedSet relabeled{set.images, predicted};
  CHECK(classify_generated(classifier, relabeled).accuracy == 1.0);
}

TEST_CASE("mask_latents zeroes exactly k distinct components per row, uniformly") {
  const std::size_t rows = 4000, k = 16;
  Tensor f({rows, 64}, 1.0f);
  Rng rng(3);
  mask_latents(f, k, rng);
  std::vector<std::size_t> hits(64, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t zeros = 0;
    for (std::size_t j = 0; j < 64; ++j) {
      if (f[r * 64 + j] == 0.0f) {
        ++zeros;
        ++hits[j];
      }
    }
    CHECK(zeros == k);
  }
  // Each index is masked with probability k/64: expected 1000, sd about 27.
  for (auto h : hits) CHECK(std::abs(static_cast<double>(h) - 1000.0) < 150.0);

  Tensor untouched({2, 64}, 1.0f);
  mask_latents(untouched, 0, rng);
  for (float v : untouched.data()) CHECK(v == 1.0f);
  CHECK_THROWS_AS(mask_latents(untouched, 65, rng), Error);
}

TEST_CASE("mask sweep anchors: k = 0 matches unmasked, k = 64 decodes one constant image") {
  models::Aivae model(7);
  models::Lenet5 classifier(8);
  const auto& pairs = test_pairs();
  const auto sweep = mask_sweep(model, pairs, classifier, {.seed = 4, .trials = 2});
  REQUIRE(sweep.k.size() == 65);
  CHECK(sweep.k.front() == 0);
  CHECK(sweep.k.back() == 64);
  CHECK(sweep.trial_accuracy[0].size() == 2);

  const auto unmasked = classify_generated(classifier, generate_test_images(model, pairs, {.seed = 4}));
  CHECK(sweep.accuracy[0] == unmasked.accuracy);

  // decode(0) is a single image; accuracy equals the frequency of its class.
  LatentSet zeros{Tensor({1, 64}), {0}};
  const auto constant = decode_latents(model, zeros);
  const int cls = classify(classifier, constant.images)[0];
  std::size_t matching = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) matching += pairs.label(i) == cls;
  const double freq = static_cast<double>(matching) / static_cast<double>(pairs.size());
  CHECK(sweep.accuracy[64] == freq);

  const auto again = mask_sweep(model, pairs, classifier, {.seed = 4, .trials = 2});
  CHECK(again.accuracy == sweep.accuracy);
}

TEST_CASE("intra-class variance matches a hand computation") {
  GeneratedSet set{Tensor({4, 1, 28, 28}), {0, 0, 1, 1}};
  // Class 0: pixel values 0 and 1 everywhere -> variance 0.25 per pixel.
  for (std::size_t p = 0; p < 784; ++p) set.images[784 + p] = 1.0f;
  // Class 1: identical images -> variance 0.
  for (std::size_t p = 0; p < 784; ++p) set.images[2 * 784 + p] = set.images[3 * 784 + p] = 0.3f;
  CHECK(intra_class_variance(set) == doctest::Approx(0.125));
}

TEST_CASE("compare_error_rates") {
  CHECK(*compare_error_rates(report_with_accuracy(0.669), report_with_accuracy(0.815)) ==
        doctest::Approx(0.441).epsilon(1e-3));
  CHECK(*compare_error_rates(report_with_accuracy(0.810), report_with_accuracy(0.943)) ==
        doctest::Approx(0.70).epsilon(1e-2));
  CHECK(*compare_error_rates(report_with_accuracy(0.9), report_with_accuracy(0.9)) == 0.0);
  CHECK_FALSE(compare_error_rates(report_with_accuracy(1.0), report_with_accuracy(0.9)).has_value());
  EvalReport empty;
  CHECK_THROWS_AS(compare_error_rates(empty, report_with_accuracy(0.5)), Error);
}

TEST_CASE("image grid layout and scaling") {
  Tensor many({64, 1, 28, 28}, 0.5f);
  const auto grid = make_image_grid(many, 8);
  CHECK(grid.width == 8 * 28 + 7 * 2);
  CHECK(grid.height == 8 * 28 + 7 * 2);
  CHECK(grid.pixels[28] == kSeparatorValue);
  CHECK(grid.pixels[0] == 128);

  Tensor one({1, 1, 28, 28}, 1.0f);
  const auto single = make_image_grid(one, 8);
  CHECK(single.width == 28);
  CHECK(single.height == 28);
  CHECK(std::all_of(single.pixels.begin(), single.pixels.end(), [](auto v) { return v == 255; }));

  fixtures::TempDir dir("grid");
  emit_image_grid(one, 4, dir.path() / "one.png");
  const auto back = read_png(dir.path() / "one.png");
  CHECK(back.width == 28);
  CHECK(back.pixels == single.pixels);

  CHECK_THROWS_AS(make_image_grid(Tensor({0, 1, 28, 28}), 8), Error);
  CHECK_THROWS_AS(emit_image_grid(one, 1, dir.path() / "missing" / "x.png"), Error);
}

TEST_CASE("interleave_rows alternates rows of generated and real images") {
  Tensor top({3, 1, 1, 1}, std::vector<float>{1, 2, 3});
  Tensor bottom({3, 1, 1, 1}, std::vector<float>{4, 5, 6});
  const auto mixed = interleave_rows(top, bottom, 2);
  CHECK(std::vector<float>(mixed.data().begin(), mixed.data().end()) == std::vector<float>{1, 2, 4, 5, 3, 6});
}

TEST_CASE("report formats are line-oriented and deterministic") {
  EvalReport r;
  r.dataset = "mnist-fsdd";
  r.model = "aivaegan";
  r.alpha = 0.5;
  r.accuracy = 0.75;
  r.n_examples = 4;
  r.seed = 3;
  r.confusion[1][1] = 3;
  r.confusion[2][1] = 1;
  const auto text = format_eval_report(r);
  CHECK(text.find("dataset: mnist-fsdd\n") != std::string::npos);
  CHECK(text.find("alpha: 0.5\n") != std::string::npos);
  CHECK(text.find("accuracy: 0.75\n") != std::string::npos);
  CHECK(text.find("confusion.2: 0 1 0 0 0 0 0 0 0 0\n") != std::string::npos);
  CHECK(text == format_eval_report(r));

  MaskSweepResult sweep;
  sweep.k = {0, 1};
  sweep.accuracy = {0.5, 0.25};
  CHECK(format_sweep_table(sweep) == "k\taccuracy\n0\t0.5\n1\t0.25\n");
}
