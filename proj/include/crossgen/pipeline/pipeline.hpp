#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crossgen/data/align.hpp"
#include "crossgen/eval/evaluate.hpp"
#include "crossgen/train/config.hpp"
#include "crossgen/train/trainer.hpp"
#include "crossgen/util/key_value.hpp"

namespace crossgen::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kMnistFsdd = "mnist-fsdd";
inline constexpr const char* kMnistScd = "mnist-scd";

// "mnist-fsdd.train.aipx" and friends.
std::string pair_file_name(const std::string& dataset, data::Split split);
// Dataset tag of a pair file: the file name up to its first dot.
std::string dataset_tag(const fs::path& pair_file);

// Run-scoped directory `parent/<prefix>-<YYYYmmdd-HHMMSS>-seed<N>`, created on call.
fs::path make_run_dir(const fs::path& parent, const std::string& prefix, std::uint64_t seed);

// Seed when no flag or config file sets one: CROSSGEN_SEED if set, else 0.
std::uint64_t default_seed();

// Facts every artifact directory records beside its outputs.
KeyValues snapshot_header(const std::string& command);
void write_snapshot(const fs::path& path, const KeyValues& entries);

struct AlignedDatasets {
  data::PairSet train;
  data::PairSet test;
  std::size_t clips = 0;
  std::size_t train_clips = 0;
  std::size_t test_clips = 0;
};

// 90/10 clip split, then many-to-one (FSDD) or one-to-one (SCD) alignment
// against the MNIST train and test images.
AlignedDatasets build_aligned(const std::string& dataset, const std::vector<data::ImageSample>& mnist_train,
                              const std::vector<data::ImageSample>& mnist_test,
                              const std::vector<audio::Spectrogram>& spectrograms, std::uint64_t seed);

struct PrepareOptions {
  fs::path mnist;
  fs::path fsdd;
  fs::path scd;
  fs::path out;
  std::uint64_t seed = 0;
  bool include_fsdd = true;
  bool include_scd = true;
};

// Writes the requested pair files plus manifest.txt (counts and CRCs) and
// config.txt into `out`; returns the manifest entries.
KeyValues prepare_datasets(const PrepareOptions& options);

struct TrainJob {
  std::string architecture;  // aivae | aivaegan | lenet5
  train::TrainConfig config;
  fs::path data;             // pair file, or an MNIST directory for lenet5
  fs::path run_dir;
  // Continue from run_dir/checkpoint.aick when present.
  bool resume = false;
  std::string command = "train";
};

struct TrainArtifacts {
  fs::path checkpoint;
  train::TrainLog log;
};

// Writes config.txt, checkpoint.aick (periodic), model.aick (final),
// train_log.tsv, timing.tsv (wall time per epoch, the only output that varies
// between reruns) and, for generators, grid.png (generated rows above real rows).
TrainArtifacts run_training(const TrainJob& job);

struct EvalJob {
  fs::path model;
  fs::path data;
  fs::path classifier;
  fs::path run_dir;
  std::uint64_t seed = 0;
  bool use_mean = false;
  bool mask_sweep = false;
  std::size_t mask_trials = 1;
  std::string expected_architecture;
  std::string command = "eval";
};

struct EvalArtifacts {
  eval::EvalReport report;
  std::optional<eval::MaskSweepResult> sweep;
};

// Writes config.txt, report.txt, grid.png and, with mask_sweep, sweep.tsv.
EvalArtifacts run_evaluation(const EvalJob& job);

// Results gathered by the reproduction driver; keyed by dataset tag.
struct TableResults {
  std::optional<double> lenet_accuracy;
  std::map<std::string, double> aivae_accuracy;
  std::map<std::string, std::map<double, double>> aivaegan_accuracy;  // dataset -> alpha -> accuracy
  std::map<std::string, double> aivae_intra_class_variance;
  std::map<std::string, eval::MaskSweepResult> sweeps;
  KeyValues manifest;
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Tolerance checks against reference results; missing inputs fail.
std::vector<Verdict> judge_dataset_counts(const KeyValues& manifest);
std::vector<Verdict> judge_results(const TableResults& results);

inline const std::vector<double> kAlphas = {0.2, 0.5, 1.0, 2.0};

struct ReproduceOptions {
  fs::path data_dir;   // prepared pair files and manifest.txt
  fs::path mnist_dir;  // MNIST IDX files for the classifier
  fs::path run_dir;
  std::uint64_t seed = 0;
  bool resume = false;
  train::TrainConfig base;  // epochs are overridden per stage
  std::size_t lenet_epochs = 10;
  std::size_t generator_epochs = 30;
  std::size_t mask_trials = 1;
  std::function<void(const std::string&)> progress;
};

struct ReproduceResult {
  TableResults results;
  std::vector<Verdict> verdicts;
};

// Trains 1 LeNet5, 2 AIVAE and 8 AIVAEGAN models, evaluates them, and
// writes summary.txt. Progress is kept in run_dir/state.txt; with `resume`,
// finished stages are skipped and an interrupted training stage continues
// from its periodic checkpoint.
ReproduceResult reproduce(const ReproduceOptions& options);

std::string format_summary(const TableResults& results, const std::vector<Verdict>& verdicts);

}  // namespace crossgen::pipeline
