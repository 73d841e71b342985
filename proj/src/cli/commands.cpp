#include "rsak/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rsak/cli/bench.hpp"
#include "rsak/cli/checkpoint.hpp"
#include "rsak/cli/run_config.hpp"
#include "rsak/data/dataset_io.hpp"
#include "rsak/data/metrics.hpp"
#include "rsak/numerics/rng.hpp"
#include "rsak/rsadapter/merge_model.hpp"
#include "rsak/training/gradcheck.hpp"
#include "rsak/training/trainer.hpp"

namespace rsak::cli {

namespace {

class DataFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::ofstream open_output(const fs::path& path) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataFailure("cannot write '" + path.string() + "'");
  return os;
}

data::Dataset eval_view(const data::Dataset& test, data::Scenario scenario, std::uint64_t seed) {
  if (scenario == data::Scenario::random_image_train) return test;
  return data::apply_scenario(test, scenario, seed);
}

std::string token_label(const std::optional<data::Vocab>& vocab, int id) {
  if (vocab && id >= 0 && static_cast<std::size_t>(id) < vocab->words.size())
    return vocab->words[static_cast<std::size_t>(id)];
  return "#" + std::to_string(id);
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) cfg.train.seed = *args.seed;
  cfg.train.validate();
  const auto model_cfg = cfg.resolved_model();
  model_cfg.validate();

  data::Dataset train_set = data::load_dataset(cfg.train_data);
  const data::Dataset test_raw = data::load_dataset(cfg.test_data);
  if (cfg.scenario == data::Scenario::random_image_train)
    train_set = data::apply_scenario(train_set, cfg.scenario, cfg.train.seed);
  const data::Dataset test_set = eval_view(test_raw, cfg.scenario, cfg.train.seed);

  std::optional<std::ofstream> log_file;
  if (args.log) log_file = open_output(*args.log);
  std::ostream& log = log_file ? *log_file : out;

  auto m = model::Model::initialize(model_cfg, cfg.train.seed);
  train::TrainOptions opts;
  opts.eval = test_set;
  opts.log = &log;
  const auto result = train::train(m, train_set, cfg.train, cfg.mode, opts);
  ensure_parent(args.out);
  save_checkpoint(args.out, m);

  const auto metrics = data::evaluate(m, test_set);
  out << "mode\t" << adapter::to_string(cfg.mode) << "\nscenario\t" << data::to_string(cfg.scenario)
      << "\ntunable\t" << result.tunable << "\nsteps\t" << result.steps << '\n'
      << data::format_metrics(metrics);
  return kExitOk;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const auto m = load_checkpoint(args.ckpt);
  const auto samples = data::load_dataset(args.data);
  out << data::format_metrics(data::evaluate(m, samples, args.scenario, args.seed));
  return kExitOk;
}

int cmd_merge(const MergeArgs& args, std::ostream& out) {
  const auto m = load_checkpoint(args.ckpt);
  const auto merged = adapter::merge_model(m);
  ensure_parent(args.out);
  save_checkpoint(args.out, merged);
  out << "adapters\t" << m.config().adapter_count() << "\ntensors_before\t" << m.params().size()
      << "\ntensors_after\t" << merged.params().size() << '\n';
  return kExitOk;
}

int cmd_verify_merge(const VerifyMergeArgs& args, std::ostream& out) {
  const auto m = load_checkpoint(args.ckpt);
  const auto merged = adapter::merge_model(m);
  const auto inputs = synthetic_inputs(m.config(), args.trials, args.seed);
  const double diff = max_logit_diff(m, merged, inputs);
  const bool pass = diff <= args.tol;
  out << "trials\t" << args.trials << "\nmax_abs_diff\t" << std::setprecision(6) << diff
      << "\ntol\t" << args.tol << "\nresult\t" << (pass ? "pass" : "fail") << '\n';
  return pass ? kExitOk : kExitVerify;
}

int cmd_ablate(const AblateArgs& args, std::ostream& out, std::ostream* progress) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) cfg.train.seed = *args.seed;
  cfg.train.validate();
  data::Dataset train_set;
  data::Dataset test_set;
  if (!args.dry_run) {
    train_set = data::load_dataset(cfg.train_data);
    if (cfg.scenario == data::Scenario::random_image_train)
      train_set = data::apply_scenario(train_set, cfg.scenario, cfg.train.seed);
    test_set = eval_view(data::load_dataset(cfg.test_data), cfg.scenario, cfg.train.seed);
  }
  const auto rows = run_ablation(cfg, args.axis, train_set, test_set, args.dry_run, progress);
  const std::string table = format_ablation_table(rows);
  if (args.out) {
    auto os = open_output(*args.out);
    os << table;
  } else {
    out << table;
  }
  return kExitOk;
}

int cmd_bench(const BenchArgs& args, std::ostream& out) {
  if (args.batch == 0) throw model::ConfigError("--batch must be positive");
  const auto m = load_checkpoint(args.ckpt);
  if (m.config().merged) throw DataFailure("bench needs an unmerged checkpoint");
  const auto merged = adapter::merge_model(m);
  const auto batch = synthetic_inputs(m.config(), args.batch, args.seed);
  const auto report = run_bench(m, merged, batch, args.iters, args.warmup);
  out << format_bench(report);
  return report.outputs_match ? kExitOk : kExitVerify;
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out) {
  model::ModelConfig base;
  base.d = args.d;
  base.n_layers = args.layers;
  base.n_heads = args.heads;
  base.d_prime = args.d_prime;
  base.head_hidden = args.d;
  base.vocab_size = 16;
  const auto cfg = adapter::configure_for_mode(base, args.mode);
  cfg.validate();

  auto m = model::Model::initialize(cfg, args.seed);
  Rng rng = Rng(args.seed).child("perturb");
  for (auto& [name, p] : m.params())
    p.value += rng_normal(rng, p.value.rows(), p.value.cols(), args.noise);
  adapter::build_freeze_mask(args.mode, m.params());

  const auto samples = synthetic_inputs(cfg, args.samples, args.seed);
  const auto r = train::gradcheck(m, samples, args.eps, args.tol);
  out << "mode\t" << adapter::to_string(args.mode) << "\ntensors\t" << r.tensors << "\nentries\t"
      << r.checked << std::setprecision(6) << "\nmax_rel_error\t" << r.max_rel_error
      << "\nmax_abs_error\t" << r.max_abs_error << "\nworst\t" << r.worst_tensor << '['
      << r.worst_index << "]\ntol\t" << r.tol << "\nresult\t" << (r.passed ? "pass" : "fail")
      << '\n';
  return r.passed ? kExitOk : kExitVerify;
}

int cmd_gen_data(const GenDataArgs& args, std::ostream& out) {
  if (args.n == 0) throw model::ConfigError("--n must be positive");
  const auto samples = data::generate(args.n, args.seed, args.task);
  ensure_parent(args.out);
  data::save_dataset(args.out, samples);
  out << "samples\t" << samples.size() << "\ndata\t" << args.out.string() << "\nvocab\t"
      << data::vocab_path(args.out).string() << '\n';
  return kExitOk;
}

int cmd_attmap(const AttmapArgs& args, std::ostream& out) {
  const auto m = load_checkpoint(args.ckpt);
  const auto samples = data::load_dataset(args.data);
  if (args.sample >= samples.size())
    throw std::out_of_range("sample index " + std::to_string(args.sample) +
                            " out of range (dataset has " + std::to_string(samples.size()) +
                            " samples)");
  std::optional<data::Vocab> vocab;
  if (fs::exists(data::vocab_path(args.data))) vocab = data::load_vocab(data::vocab_path(args.data));

  const std::span<const data::VQASample> one(&samples[args.sample], 1);
  const auto fwd = m.forward(one, true);
  const auto map = model::attention_map(fwd.attention.at(0), m.config());
  const auto& cfg = m.config();

  fs::path grid_path = args.out;
  grid_path += ".txt";
  fs::path pgm_path = args.out;
  pgm_path += ".pgm";
  fs::path tokens_path = args.out;
  tokens_path += ".tokens.txt";

  double image_mass = 0.0;
  double peak = 0.0;
  {
    auto os = open_output(grid_path);
    os << std::setprecision(17);
    for (std::size_t r = 0; r < map.image.rows(); ++r) {
      for (std::size_t c = 0; c < map.image.cols(); ++c) {
        os << (c ? "\t" : "") << map.image(r, c);
        image_mass += map.image(r, c);
        peak = std::max(peak, map.image(r, c));
      }
      os << '\n';
    }
  }
  {
    // Plain graymap scaled so the strongest patch is white.
    auto os = open_output(pgm_path);
    os << "P2\n" << map.image.cols() << ' ' << map.image.rows() << "\n255\n";
    for (std::size_t r = 0; r < map.image.rows(); ++r) {
      for (std::size_t c = 0; c < map.image.cols(); ++c) {
        const double v = peak > 0.0 ? map.image(r, c) / peak : 0.0;
        os << (c ? " " : "") << static_cast<int>(std::lround(255.0 * v));
      }
      os << '\n';
    }
  }
  double text_mass = 0.0;
  {
    auto os = open_output(tokens_path);
    os << std::setprecision(17);
    const auto& tokens = samples[args.sample].tokens;
    for (std::size_t i = 0; i < map.text.size(); ++i) {
      std::string label = "[class]";
      if (i > 0) {
        const int id = i - 1 < tokens.size() ? tokens[i - 1] : model::kPadTokenId;
        label = token_label(vocab, id);
      }
      os << label << ':' << map.text[i] << '\n';
      text_mass += map.text[i];
    }
    os << "[image-class]:" << map.image_class << '\n';
  }
  double row_sum = 0.0;
  for (double v : map.full_row) row_sum += v;

  out << std::setprecision(10) << "sample\t" << args.sample << "\npatch_grid\t" << cfg.patch_grid
      << "\ntext_mass\t" << text_mass << "\nimage_class_mass\t" << map.image_class
      << "\nimage_mass\t" << image_mass << "\nrow_sum\t" << row_sum << "\ngrid\t"
      << grid_path.string() << "\ngraymap\t" << pgm_path.string() << "\ntokens\t"
      << tokens_path.string() << '\n';
  return kExitOk;
}

int run_guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const adapter::NothingToMerge& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const model::ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const data::DatasetError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace rsak::cli
