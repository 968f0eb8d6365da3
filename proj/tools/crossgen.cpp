// Command-line driver: prepare, train, eval, reproduce.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "crossgen/eval/report.hpp"
#include "crossgen/pipeline/pipeline.hpp"
#include "crossgen/util/errors.hpp"
#include "crossgen/util/log.hpp"

namespace fs = std::filesystem;
using namespace crossgen;

namespace {

// Flags shared by commands that build a TrainConfig. Precedence: flags,
// then the --config file, then CROSSGEN_SEED for the seed, then defaults.
struct TrainFlags {
  fs::path config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> checkpoint_every;
  std::optional<std::string> generator_loss_mode;

  void add_to(CLI::App& cmd, bool with_epochs) {
    cmd.add_option("--config", config_file, "key = value file of training settings")->check(CLI::ExistingFile);
    cmd.add_option("--seed", seed, "master seed");
    if (with_epochs) cmd.add_option("--epochs", epochs, "training epochs");
    cmd.add_option("--batch-size", batch_size, "examples per batch");
    cmd.add_option("--lr", lr, "learning rate for the model being trained");
    cmd.add_option("--checkpoint-every", checkpoint_every, "epochs between periodic checkpoints");
    cmd.add_option("--generator-loss-mode", generator_loss_mode, "non_saturating or minimax");
  }

  train::TrainConfig build(const std::string& architecture) const {
    train::TrainConfig c;
    c.seed = pipeline::default_seed();
    if (!config_file.empty()) train::apply_key_values(c, read_key_values(config_file));
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (checkpoint_every) c.checkpoint_every = *checkpoint_every;
    if (generator_loss_mode) c.generator_loss_mode = train::parse_generator_loss_mode(*generator_loss_mode);
    if (lr) {
      if (architecture == "aivae") c.lr_aivae = *lr;
      else if (architecture == "aivaegan") c.lr_gan = *lr;
      else if (architecture == "lenet5") c.lr_lenet = *lr;
      else c.lr_aivae = c.lr_gan = c.lr_lenet = *lr;
    }
    return c;
  }
};

std::string format_alpha(double alpha) { return fmt::format("{}", alpha); }

int cmd_prepare(const pipeline::PrepareOptions& base, const std::optional<std::uint64_t>& seed,
                const std::string& only) {
  auto options = base;
  options.seed = seed ? *seed : pipeline::default_seed();
  options.include_fsdd = only.empty() || only == "fsdd";
  options.include_scd = only.empty() || only == "scd";
  const auto manifest = pipeline::prepare_datasets(options);
  std::cout << format_key_values(manifest);
  return 0;
}

struct TrainArgs {
  std::string architecture;
  fs::path data;
  std::vector<double> alphas;
  fs::path out = "runs";
  fs::path run_dir;
  bool resume = false;
  TrainFlags flags;
};

int cmd_train(const TrainArgs& args) {
  const auto config = args.flags.build(args.architecture);
  if (!args.alphas.empty() && args.architecture != "aivaegan")
    throw Error("--alpha applies to aivaegan only");
  if (args.resume && args.run_dir.empty()) throw Error("--resume needs --run-dir");

  std::vector<std::optional<double>> alphas;
  if (args.alphas.empty()) alphas.push_back(std::nullopt);
  for (double a : args.alphas) alphas.push_back(a);

  for (const auto& alpha : alphas) {
    pipeline::TrainJob job;
    job.architecture = args.architecture;
    job.config = config;
    if (alpha) job.config.alpha = *alpha;
    job.data = args.data;
    if (job.config.dataset.empty())
      job.config.dataset = args.architecture == "lenet5" ? "mnist" : pipeline::dataset_tag(args.data);
    job.resume = args.resume;
    const std::string name =
        alpha ? fmt::format("{}-alpha{}", args.architecture, format_alpha(*alpha)) : args.architecture;
    if (args.run_dir.empty())
      job.run_dir = pipeline::make_run_dir(args.out, name, job.config.seed);
    else
      job.run_dir = alphas.size() > 1 ? args.run_dir / name : args.run_dir;
    const auto artifacts = pipeline::run_training(job);
    std::cout << "checkpoint: " << artifacts.checkpoint.string() << "\n";
  }
  return 0;
}

struct EvalArgs {
  fs::path model, data, classifier;
  std::optional<std::uint64_t> seed;
  bool mask_sweep = false;
  std::size_t trials = 1;
  bool use_mean = false;
  fs::path out = "runs";
  fs::path run_dir;
};

int cmd_eval(const EvalArgs& args) {
  pipeline::EvalJob job;
  job.model = args.model;
  job.data = args.data;
  job.classifier = args.classifier;
  job.seed = args.seed ? *args.seed : pipeline::default_seed();
  job.mask_sweep = args.mask_sweep;
  job.mask_trials = args.trials;
  job.use_mean = args.use_mean;
  job.run_dir = args.run_dir.empty() ? pipeline::make_run_dir(args.out, "eval", job.seed) : args.run_dir;
  const auto artifacts = pipeline::run_evaluation(job);
  std::cout << eval::format_eval_report(artifacts.report);
  std::cout << "run_dir: " << job.run_dir.string() << "\n";
  return 0;
}

struct ReproduceArgs {
  bool paper_tables = false;
  fs::path data, mnist;
  fs::path out = "runs";
  fs::path run_dir;
  bool resume = false;
  std::size_t lenet_epochs = 10;
  std::size_t epochs = 30;
  std::size_t trials = 1;
  TrainFlags flags;
};

// Latest reproduce-* directory under `out` holding a state file.
fs::path latest_reproduce_dir(const fs::path& out) {
  fs::path best;
  if (fs::is_directory(out)) {
    for (const auto& entry : fs::directory_iterator(out)) {
      const auto name = entry.path().filename().string();
      if (entry.is_directory() && name.starts_with("reproduce-") && fs::exists(entry.path() / "state.txt") &&
          (best.empty() || name > best.filename().string()))
        best = entry.path();
    }
  }
  if (best.empty()) throw Error("--resume: no reproduce run with a state file under " + out.string());
  return best;
}

int cmd_reproduce(const ReproduceArgs& args) {
  if (!args.paper_tables) throw Error("reproduce needs --paper-tables");
  pipeline::ReproduceOptions options;
  options.base = args.flags.build("all");
  options.seed = options.base.seed;
  options.data_dir = args.data;
  options.mnist_dir = args.mnist;
  options.resume = args.resume;
  options.lenet_epochs = args.lenet_epochs;
  options.generator_epochs = args.epochs;
  options.mask_trials = args.trials;
  if (!args.run_dir.empty())
    options.run_dir = args.run_dir;
  else if (args.resume)
    options.run_dir = latest_reproduce_dir(args.out);
  else
    options.run_dir = pipeline::make_run_dir(args.out, "reproduce", options.seed);
  options.progress = [](const std::string& msg) { log_info(msg); };

  const auto result = pipeline::reproduce(options);
  // Every stage completed; tolerance verdicts are reported, not treated as failures.
  for (const auto& v : result.verdicts)
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
  std::cout << "summary: " << (options.run_dir / "summary.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-to-image generation: data preparation, training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pipeline::kVersion);

  auto* prepare = app.add_subcommand("prepare", "build aligned pair files from MNIST, FSDD and SCD");
  pipeline::PrepareOptions prep;
  std::optional<std::uint64_t> prep_seed;
  std::string only;
  prepare->add_option("--mnist", prep.mnist, "MNIST IDX directory")->required();
  prepare->add_option("--fsdd", prep.fsdd, "FSDD recordings directory");
  prepare->add_option("--scd", prep.scd, "Speech Commands directory");
  prepare->add_option("--out", prep.out, "output directory for pair files")->required();
  prepare->add_option("--seed", prep_seed, "master seed");
  prepare->add_option("--only", only, "build one dataset only")->check(CLI::IsMember({"fsdd", "scd"}));

  auto* train = app.add_subcommand("train", "train one model");
  TrainArgs targs;
  train->add_option("architecture", targs.architecture, "aivae, aivaegan or lenet5")
      ->required()
      ->check(CLI::IsMember({"aivae", "aivaegan", "lenet5"}));
  train->add_option("--data", targs.data, "training pair file, or MNIST directory for lenet5")->required();
  train->add_option("--alpha", targs.alphas, "reconstruction weights; one run per value")->expected(1, -1);
  train->add_option("--out", targs.out, "parent of the run directory");
  train->add_option("--run-dir", targs.run_dir, "exact run directory instead of a timestamped one");
  train->add_flag("--resume", targs.resume, "continue from the run directory's periodic checkpoint");
  targs.flags.add_to(*train, true);

  auto* evaluate = app.add_subcommand("eval", "score generated test images with a classifier");
  EvalArgs eargs;
  evaluate->add_option("--model", eargs.model, "generator checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", eargs.data, "test pair file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--classifier", eargs.classifier, "LeNet5 checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--seed", eargs.seed, "evaluation seed");
  evaluate->add_flag("--mask-sweep", eargs.mask_sweep, "also run the latent masking sweep k = 0..64");
  evaluate->add_option("--trials", eargs.trials, "mask draws per k")->check(CLI::PositiveNumber);
  evaluate->add_flag("--use-mean", eargs.use_mean, "decode the posterior mean instead of a sample");
  evaluate->add_option("--out", eargs.out, "parent of the run directory");
  evaluate->add_option("--run-dir", eargs.run_dir, "exact run directory instead of a timestamped one");

  auto* repro = app.add_subcommand("reproduce", "train and evaluate every model behind the result tables");
  ReproduceArgs rargs;
  repro->add_flag("--paper-tables", rargs.paper_tables, "run every stage for the accuracy tables and sweep");
  repro->add_option("--data", rargs.data, "directory of prepared pair files")->required();
  repro->add_option("--mnist", rargs.mnist, "MNIST IDX directory")->required();
  repro->add_option("--out", rargs.out, "parent of the run directory");
  repro->add_option("--run-dir", rargs.run_dir, "exact run directory");
  repro->add_flag("--resume", rargs.resume, "skip finished stages of an earlier run");
  repro->add_option("--lenet-epochs", rargs.lenet_epochs, "classifier epochs");
  repro->add_option("--generator-epochs", rargs.epochs, "AIVAE and AIVAEGAN epochs");
  repro->add_option("--trials", rargs.trials, "mask draws per k")->check(CLI::PositiveNumber);
  rargs.flags.add_to(*repro, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prep, prep_seed, only);
    if (train->parsed()) return cmd_train(targs);
    if (evaluate->parsed()) return cmd_eval(eargs);
    if (repro->parsed()) return cmd_reproduce(rargs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
