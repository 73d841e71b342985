#include <CLI11.hpp>
#include <iostream>

#include "rsak/cli/commands.hpp"

namespace {

using namespace rsak;
using namespace rsak::cli;

template <typename Enum, typename Parse>
CLI::Option* add_enum(CLI::App* app, const std::string& name, Enum& target, Parse parse,
                      const std::string& help) {
  return app->add_option_function<std::string>(
      name, [&target, parse](const std::string& text) { target = parse(text); }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adapter fine-tuning toolkit for a small multimodal transformer"};
  app.require_subcommand(1);

  TrainArgs train;
  std::uint64_t train_seed = 0;
  std::string train_log;
  auto* c_train = app.add_subcommand("train", "Train a model from a run configuration");
  c_train->add_option("--config", train.config, "Run configuration (JSON)")->required();
  c_train->add_option("--out", train.out, "Checkpoint to write")->required();
  auto* o_seed = c_train->add_option("--seed", train_seed, "Override train.seed");
  auto* o_log = c_train->add_option("--log", train_log, "Write the epoch log here");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  c_eval->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  c_eval->add_option("--data", eval.data, "Dataset")->required();
  add_enum(c_eval, "--scenario", eval.scenario, data::parse_scenario,
           "standard | question_only | random_image_test");
  c_eval->add_option("--seed", eval.seed, "Seed for random image swaps");

  MergeArgs merge;
  auto* c_merge = app.add_subcommand("merge", "Fold adapters into their inference form");
  c_merge->add_option("--ckpt", merge.ckpt, "Unmerged checkpoint")->required();
  c_merge->add_option("--out", merge.out, "Merged checkpoint to write")->required();

  VerifyMergeArgs verify;
  auto* c_verify = app.add_subcommand("verify-merge", "Compare logits before and after folding");
  c_verify->add_option("--ckpt", verify.ckpt, "Unmerged checkpoint")->required();
  c_verify->add_option("--trials", verify.trials, "Random inputs to compare");
  c_verify->add_option("--tol", verify.tol, "Largest accepted logit difference");
  c_verify->add_option("--seed", verify.seed, "Seed for the random inputs");

  AblateArgs ablate;
  std::uint64_t ablate_seed = 0;
  std::string ablate_out;
  auto* c_ablate = app.add_subcommand("ablate", "Train and evaluate one ablation grid");
  c_ablate->add_option("--config", ablate.config, "Run configuration (JSON)")->required();
  add_enum(c_ablate, "--axis", ablate.axis, parse_ablation_axis,
           "placement | skip | bottleneck | position | layers")
      ->required();
  auto* o_ablate_out = c_ablate->add_option("--out", ablate_out, "Write the table here");
  auto* o_ablate_seed = c_ablate->add_option("--seed", ablate_seed, "Override train.seed");
  c_ablate->add_flag("--dry-run", ablate.dry_run, "Report parameter counts without training");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time unmerged against merged inference");
  c_bench->add_option("--ckpt", bench.ckpt, "Unmerged checkpoint")->required();
  c_bench->add_option("--batch", bench.batch, "Samples per forward pass");
  c_bench->add_option("--iters", bench.iters, "Timed passes per model");
  c_bench->add_option("--warmup", bench.warmup, "Untimed passes per model");
  c_bench->add_option("--seed", bench.seed, "Seed for the random batch");

  GradcheckArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Check backward against finite differences");
  add_enum(c_grad, "--mode", grad.mode, adapter::parse_train_mode, "Training mode");
  c_grad->add_option("--d", grad.d, "Hidden width");
  c_grad->add_option("--layers", grad.layers, "Transformer blocks");
  c_grad->add_option("--heads", grad.heads, "Attention heads");
  c_grad->add_option("--d-prime", grad.d_prime, "Adapter bottleneck width");
  c_grad->add_option("--samples", grad.samples, "Random samples in the loss");
  c_grad->add_option("--eps", grad.eps, "Central difference step");
  c_grad->add_option("--tol", grad.tol, "Largest accepted relative error");
  c_grad->add_option("--noise", grad.noise, "Std of the parameter perturbation");
  c_grad->add_option("--seed", grad.seed, "Seed");

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a grid-image question dataset");
  c_gen->add_option("--out", gen.out, "Dataset to write")->required();
  c_gen->add_option("--n", gen.n, "Number of samples");
  c_gen->add_option("--seed", gen.seed, "Seed");
  c_gen->add_option("--max-count", gen.task.max_count, "Most cells of one color");
  c_gen->add_option("--margin", gen.task.comparison_margin, "Smallest unequal comparison gap");

  AttmapArgs attmap;
  auto* c_attmap = app.add_subcommand("attmap", "Export the class-token attention map");
  c_attmap->add_option("--ckpt", attmap.ckpt, "Checkpoint")->required();
  c_attmap->add_option("--data", attmap.data, "Dataset")->required();
  c_attmap->add_option("--sample", attmap.sample, "Sample index")->required();
  c_attmap->add_option("--out", attmap.out, "Output prefix")->required();

  // Enum parsers throw std::invalid_argument; report those as usage errors.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (*o_seed) train.seed = train_seed;
  if (*o_log) train.log = train_log;
  if (*o_ablate_seed) ablate.seed = ablate_seed;
  if (*o_ablate_out) ablate.out = ablate_out;

  auto& out = std::cout;
  auto& err = std::cerr;
  return run_guarded(
      [&]() -> int {
        if (c_train->parsed()) return cmd_train(train, out);
        if (c_eval->parsed()) return cmd_eval(eval, out);
        if (c_merge->parsed()) return cmd_merge(merge, out);
        if (c_verify->parsed()) return cmd_verify_merge(verify, out);
        if (c_ablate->parsed()) return cmd_ablate(ablate, out, &err);
        if (c_bench->parsed()) return cmd_bench(bench, out);
        if (c_grad->parsed()) return cmd_gradcheck(grad, out);
        if (c_gen->parsed()) return cmd_gen_data(gen, out);
        if (c_attmap->parsed()) return cmd_attmap(attmap, out);
        return kExitUsage;
      },
      err);
}
