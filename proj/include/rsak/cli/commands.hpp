#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>

#include "rsak/cli/ablation.hpp"
#include "rsak/data/generator.hpp"
#include "rsak/data/scenario.hpp"
#include "rsak/rsadapter/freeze.hpp"

namespace rsak::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,   // bad arguments or configuration
  kExitData = 2,    // unreadable or malformed data or checkpoint
  kExitVerify = 3,  // a verification did not pass
};

struct TrainArgs {
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;  // overrides train.seed
  std::optional<fs::path> log;        // epoch log; written to `out` stream when absent
};

struct EvalArgs {
  fs::path ckpt;
  fs::path data;
  data::Scenario scenario = data::Scenario::standard;
  std::uint64_t seed = 0;  // image swaps of the random-image scenarios
};

struct MergeArgs {
  fs::path ckpt;
  fs::path out;
};

struct VerifyMergeArgs {
  fs::path ckpt;
  std::size_t trials = 100;
  double tol = 1e-9;
  std::uint64_t seed = 0;
};

struct AblateArgs {
  fs::path config;
  AblationAxis axis = AblationAxis::placement;
  std::optional<fs::path> out;  // table destination; the `out` stream when absent
  std::optional<std::uint64_t> seed;
  bool dry_run = false;  // counts only, no training
};

struct BenchArgs {
  fs::path ckpt;
  std::size_t batch = 64;
  std::size_t iters = 10;
  std::size_t warmup = 2;
  std::uint64_t seed = 0;
};

struct GradcheckArgs {
  adapter::TrainMode mode = adapter::TrainMode::rsadapter;
  std::size_t d = 8;
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t d_prime = 4;
  std::size_t samples = 4;
  double eps = 1e-5;
  double tol = 1e-6;
  /// Std of the Gaussian perturbation added to every parameter so that
  /// zero-initialized tensors carry gradient signal.
  double noise = 0.3;
  std::uint64_t seed = 1;
};

struct GenDataArgs {
  fs::path out;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  data::TaskConfig task;
};

struct AttmapArgs {
  fs::path ckpt;
  fs::path data;
  std::size_t sample = 0;
  fs::path out;  // prefix for <out>.txt, <out>.pgm and <out>.tokens.txt
};

// Each command writes its report to `out` and returns an ExitCode. Errors
// surface as exceptions; run_guarded maps them to exit codes.
int cmd_train(const TrainArgs& args, std::ostream& out);
int cmd_eval(const EvalArgs& args, std::ostream& out);
int cmd_merge(const MergeArgs& args, std::ostream& out);
int cmd_verify_merge(const VerifyMergeArgs& args, std::ostream& out);
int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream* progress);
int cmd_bench(const BenchArgs& args, std::ostream& out);
int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out);
int cmd_gen_data(const GenDataArgs& args, std::ostream& out);
int cmd_attmap(const AttmapArgs& args, std::ostream& out);

/// Runs `fn`, printing "error: <message>" to `err` on failure. Configuration
/// and argument errors give kExitUsage; data, checkpoint, file and range errors
/// give kExitData.
int run_guarded(const std::function<int()>& fn, std::ostream& err);

}  // namespace rsak::cli
