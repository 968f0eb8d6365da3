#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crossgen/data/pairset_io.hpp"
#include "crossgen/pipeline/pipeline.hpp"
#include "crossgen/util/errors.hpp"
#include "crossgen/util/log.hpp"
#include "crossgen/util/png.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace crossgen;
using namespace crossgen::pipeline;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string* lookup(const KeyValues& kv, const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return &v;
  return nullptr;
}

// Small synthetic corpora shared by the tests in this file.
struct Corpora {
  fixtures::TempDir dir{"pipeline"};
  fs::path mnist = dir.path() / "mnist", fsdd = dir.path() / "fsdd", scd = dir.path() / "scd";
  Corpora() {
    fixtures::write_mnist_dir(mnist, 3, 2, 1);
    fixtures::write_fsdd_dir(fsdd, 2, 30);
    fixtures::write_scd_dir(scd, 60);
  }
};

Corpora& corpora() {
  static Corpora c;
  return c;
}

// Silences progress logging for the lifetime of the guard.
struct QuietLog {
  LogSink previous = set_log_sink([](LogLevel, const std::string&) {});
  ~QuietLog() { set_log_sink(previous); }
};

train::TrainConfig tiny_config(const std::string& dataset) {
  train::TrainConfig c;
  c.epochs = 1;
  c.batch_size = 16;
  c.seed = 3;
  c.dataset = dataset;
  return c;
}

}  // namespace

TEST_CASE("prepare writes pair files and a manifest, reproducibly") {
  QuietLog quiet;
  auto& c = corpora();
  const fs::path out1 = c.dir.path() / "prep1", out2 = c.dir.path() / "prep2";
  const auto m1 = prepare_datasets({c.mnist, c.fsdd, c.scd, out1, 7});
  const auto m2 = prepare_datasets({c.mnist, c.fsdd, c.scd, out2, 7});

  for (const auto* name : {"mnist-fsdd.train.aipx", "mnist-fsdd.test.aipx", "mnist-scd.train.aipx",
                           "mnist-scd.test.aipx"}) {
    CHECK(fs::exists(out1 / name));
    CHECK(slurp(out1 / name) == slurp(out2 / name));
    CHECK(*lookup(m1, std::string(name) + ".crc32") == *lookup(m2, std::string(name) + ".crc32"));
  }
  CHECK(slurp(out1 / "manifest.txt") == slurp(out2 / "manifest.txt"));
  CHECK(fs::exists(out1 / "config.txt"));

  // Many-to-one: one pair per MNIST image.
  CHECK(*lookup(m1, "mnist-fsdd.train.aipx.pairs") == "30");
  CHECK(*lookup(m1, "mnist-fsdd.test.aipx.pairs") == "20");
  CHECK(*lookup(m1, "fsdd.clips") == "600");
  CHECK(*lookup(m1, "fsdd.train_clips") == "540");
  CHECK(*lookup(m1, "scd.clips") == "600");

  const auto train = data::read_pairset(out1 / "mnist-fsdd.train.aipx");
  const auto test = data::read_pairset(out1 / "mnist-fsdd.test.aipx");
  for (const auto& a : train.spectrograms)
    for (const auto& b : test.spectrograms) CHECK(a.source_id != b.source_id);

  const auto m3 = prepare_datasets({c.mnist, c.fsdd, c.scd, c.dir.path() / "prep3", 8});
  CHECK(*lookup(m3, "mnist-fsdd.train.aipx.crc32") != *lookup(m1, "mnist-fsdd.train.aipx.crc32"));
}

TEST_CASE("prepare --only fsdd needs no SCD corpus; missing corpora name the path") {
  QuietLog quiet;
  auto& c = corpora();
  const fs::path out = c.dir.path() / "only";
  PrepareOptions options{c.mnist, c.fsdd, c.dir.path() / "no-such-scd", out, 7, true, false};
  prepare_datasets(options);
  CHECK(fs::exists(out / "mnist-fsdd.train.aipx"));
  CHECK_FALSE(fs::exists(out / "mnist-scd.train.aipx"));

  options.include_scd = true;
  try {
    prepare_datasets(options);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("no-such-scd") != std::string::npos);
  }
}

TEST_CASE("train and eval write their artifacts; eval reports are byte-identical per seed") {
  QuietLog quiet;
  auto& c = corpora();
  const fs::path data = c.dir.path() / "te-data";
  prepare_datasets({c.mnist, c.fsdd, c.scd, data, 7, true, false});

  const fs::path lenet_dir = c.dir.path() / "lenet";
  run_training({"lenet5", tiny_config("mnist"), c.mnist, lenet_dir});
  CHECK(fs::exists(lenet_dir / "model.aick"));
  CHECK(fs::exists(lenet_dir / "train_log.tsv"));
  CHECK(fs::exists(lenet_dir / "config.txt"));

  const fs::path vae_dir = c.dir.path() / "vae";
  const auto artifacts =
      run_training({"aivae", tiny_config(kMnistFsdd), data / "mnist-fsdd.train.aipx", vae_dir});
  CHECK(artifacts.log.epochs.size() == 1);
  for (const auto* f : {"model.aick", "checkpoint.aick", "train_log.tsv", "config.txt", "grid.png"})
    CHECK(fs::exists(vae_dir / f));
  const auto grid = read_png(vae_dir / "grid.png");
  CHECK(grid.width == 8 * 28 + 7 * 2);
  CHECK(grid.height == 8 * 28 + 7 * 2);  // 30 pairs: 4 generated rows and 4 real rows
  const auto snapshot = read_key_values(vae_dir / "config.txt");
  CHECK(*lookup(snapshot, "seed") == "3");
  CHECK(*lookup(snapshot, "architecture") == "aivae");
  CHECK(lookup(snapshot, "crossgen_version") != nullptr);

  EvalJob job{vae_dir / "model.aick", data / "mnist-fsdd.test.aipx", lenet_dir / "model.aick",
              c.dir.path() / "eval1", 5, false, false, 1, "", "eval"};
  job.mask_sweep = true;
  const auto e1 = run_evaluation(job);
  job.run_dir = c.dir.path() / "eval2";
  const auto e2 = run_evaluation(job);
  CHECK(e1.report.n_examples == 20);
  CHECK(e1.report.dataset == "mnist-fsdd");
  CHECK(e1.report.model == "aivae");
  CHECK(slurp(c.dir.path() / "eval1" / "report.txt") == slurp(c.dir.path() / "eval2" / "report.txt"));
  CHECK(slurp(c.dir.path() / "eval1" / "sweep.tsv") == slurp(c.dir.path() / "eval2" / "sweep.tsv"));
  REQUIRE(e1.sweep);
  CHECK(e1.sweep->accuracy.size() == 65);
  CHECK(e1.sweep->accuracy[0] == e1.report.accuracy);
  std::istringstream sweep(slurp(c.dir.path() / "eval1" / "sweep.tsv"));
  std::size_t lines = 0;
  for (std::string line; std::getline(sweep, line);) ++lines;
  CHECK(lines == 66);

  job.expected_architecture = "aivaegan";
  CHECK_THROWS_AS(run_evaluation(job), Error);
  job.expected_architecture.clear();
  job.classifier = vae_dir / "model.aick";
  CHECK_THROWS_AS(run_evaluation(job), Error);
}

TEST_CASE("training resumes from the run directory's periodic checkpoint") {
  QuietLog quiet;
  auto& c = corpora();
  const fs::path data = c.dir.path() / "resume-data";
  prepare_datasets({c.mnist, c.fsdd, c.scd, data, 7, true, false});
  auto config = tiny_config(kMnistFsdd);
  config.epochs = 2;

  const fs::path straight = c.dir.path() / "straight";
  run_training({"aivae", config, data / "mnist-fsdd.train.aipx", straight});

  const fs::path split = c.dir.path() / "split";
  auto first = config;
  first.epochs = 1;
  run_training({"aivae", first, data / "mnist-fsdd.train.aipx", split});
  // The config snapshot and periodic checkpoint of the one-epoch run carry on.
  TrainJob resume{"aivae", config, data / "mnist-fsdd.train.aipx", split, true};
  const auto resumed = run_training(resume);
  CHECK(resumed.log.epochs.size() == 2);
  const auto a = train::load_checkpoint(straight / "model.aick");
  const auto b = train::load_checkpoint(split / "model.aick");
  const auto& pa = a.store("model").params;
  const auto& pb = b.store("model").params;
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::equal(pa[i].value.data().begin(), pa[i].value.data().end(), pb[i].value.data().begin()));
  }
}

TEST_CASE("run directories are named by timestamp and seed and never shared") {
  fixtures::TempDir dir("rundir");
  const auto a = make_run_dir(dir.path(), "aivae", 42);
  const auto b = make_run_dir(dir.path(), "aivae", 42);
  CHECK(a != b);
  CHECK(a.filename().string().starts_with("aivae-"));
  CHECK(a.filename().string().find("-seed42") != std::string::npos);
}

TEST_CASE("CROSSGEN_SEED supplies the default seed") {
  ::unsetenv("CROSSGEN_SEED");
  CHECK(default_seed() == 0);
  ::setenv("CROSSGEN_SEED", "1234", 1);
  CHECK(default_seed() == 1234);
  ::setenv("CROSSGEN_SEED", "12x", 1);
  CHECK_THROWS_AS(default_seed(), ParseError);
  ::unsetenv("CROSSGEN_SEED");
}

TEST_CASE("verdicts follow the tolerance rules") {
  TableResults r;
  CHECK_FALSE(judge_results(r)[0].pass);

  r.lenet_accuracy = 0.985;
  r.aivae_accuracy = {{kMnistFsdd, 0.93}, {kMnistScd, 0.85}};
  r.aivaegan_accuracy[kMnistFsdd] = {{0.2, 0.80}, {0.5, 0.81}, {1.0, 0.90}, {2.0, 0.94}};
  r.aivaegan_accuracy[kMnistScd] = {{0.2, 0.66}, {0.5, 0.75}, {1.0, 0.80}, {2.0, 0.81}};
  r.aivae_intra_class_variance = {{kMnistFsdd, 0.001}, {kMnistScd, 0.02}};
  eval::MaskSweepResult f, s;
  for (std::size_t k = 0; k <= 64; ++k) {
    f.k.push_back(k);
    s.k.push_back(k);
    f.accuracy.push_back(k == 0 ? 0.93 : 0.93 - 0.8 * static_cast<double>(k) / 64.0);
    s.accuracy.push_back(k == 0 ? 0.85 : 0.85 - 0.72 * static_cast<double>(k) / 64.0);
  }
  r.sweeps = {{kMnistFsdd, f}, {kMnistScd, s}};
  for (const auto& v : judge_results(r)) CHECK_MESSAGE(v.pass, v.name << ": " << v.detail);

  r.aivaegan_accuracy[kMnistScd][2.0] = 0.70;  // no longer 5 points above alpha 0.2
  bool ordering = true;
  for (const auto& v : judge_results(r))
    if (v.name == "aivaegan alpha ordering") ordering = v.pass;
  CHECK_FALSE(ordering);

  KeyValues manifest = {{"mnist-fsdd.train.aipx.pairs", "60000"}, {"mnist-fsdd.test.aipx.pairs", "10000"},
                        {"mnist-scd.train.aipx.pairs", "21299"},  {"mnist-scd.test.aipx.pairs", "2367"},
                        {"fsdd.clips", "2000"},                   {"scd.clips", "23666"}};
  CHECK(judge_dataset_counts(manifest)[0].pass);
  manifest[2].second = "21500";
  CHECK_FALSE(judge_dataset_counts(manifest)[0].pass);
}

TEST_CASE("reproduce runs every stage, halts with a state file, and resumes") {
  QuietLog quiet;
  auto& c = corpora();
  const fs::path data = c.dir.path() / "repro-data";
  prepare_datasets({c.mnist, c.fsdd, c.scd, data, 7, true, false});

  ReproduceOptions options;
  options.data_dir = data;
  options.mnist_dir = c.mnist;
  options.run_dir = c.dir.path() / "repro";
  options.seed = 3;
  options.base.batch_size = 16;
  options.lenet_epochs = 1;
  options.generator_epochs = 1;
  std::vector<std::string> messages;
  options.progress = [&](const std::string& m) { messages.push_back(m); };

  // SCD pair files are absent, so the MNIST-SCD stage fails.
  CHECK_THROWS(reproduce(options));
  const auto state = read_key_values(options.run_dir / "state.txt");
  CHECK(*lookup(state, "stage.lenet5") == "done");
  CHECK(*lookup(state, "stage.eval-aivae-mnist-fsdd") == "done");
  REQUIRE(lookup(state, "failed") != nullptr);
  CHECK(lookup(state, "failed")->starts_with("aivae-mnist-scd"));

  // Without --resume an existing state file is not overwritten.
  CHECK_THROWS_AS(reproduce(options), Error);

  prepare_datasets({c.mnist, c.fsdd, c.scd, data, 7, false, true});
  messages.clear();
  options.resume = true;
  const auto result = reproduce(options);
  CHECK(std::find(messages.begin(), messages.end(), "skip lenet5 (done)") != messages.end());
  CHECK(std::find(messages.begin(), messages.end(), "skip aivae-mnist-fsdd (done)") != messages.end());
  CHECK(std::find(messages.begin(), messages.end(), "run aivae-mnist-scd") != messages.end());

  std::size_t trained = 0;
  for (const auto& entry : fs::directory_iterator(options.run_dir))
    trained += fs::exists(entry.path() / "model.aick");
  CHECK(trained == 11);  // 1 LeNet5 + 2 AIVAE + 8 AIVAEGAN
  CHECK(result.results.aivaegan_accuracy.at(kMnistScd).size() == 4);
  CHECK(result.verdicts.size() == 7);
  const auto summary = slurp(options.run_dir / "summary.txt");
  CHECK(summary.find("aivaegan/mnist-scd/alpha=0.2") != std::string::npos);
  CHECK(summary.find("criterion: mask sweep:") != std::string::npos);
  CHECK(lookup(read_key_values(options.run_dir / "state.txt"), "failed") == nullptr);
}
