#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsak/cli/ablation.hpp"
#include "rsak/cli/bench.hpp"
#include "rsak/cli/checkpoint.hpp"
#include "rsak/cli/commands.hpp"
#include "rsak/cli/run_config.hpp"
#include "rsak/data/dataset_io.hpp"
#include "rsak/numerics/rng.hpp"
#include "rsak/rsadapter/merge_model.hpp"
#include "rsak/rsadapter/param_count.hpp"

namespace rsak::cli {
namespace {

namespace fs = std::filesystem;
using adapter::TrainMode;

model::Model small_model(TrainMode mode, std::uint64_t seed, double noise = 0.0) {
  model::ModelConfig c;
  c.d = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_prime = 3;
  c.vocab_size = 15;
  c.max_text_len = 7;
  c.image_side = 8;
  c.patch_grid = 4;
  c.n_answers = 12;
  c.head_hidden = 8;
  c.init_std = 0.1;
  auto m = model::Model::initialize(adapter::configure_for_mode(c, mode), seed);
  if (noise > 0.0) {
    Rng rng(seed + 7);
    for (auto& [name, p] : m.params())
      p.value += rng_normal(rng, p.value.rows(), p.value.cols(), noise);
  }
  adapter::build_freeze_mask(mode, m.params());
  return m;
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  for (auto mode : {TrainMode::rsadapter, TrainMode::linear_probe, TrainMode::adapter_plain}) {
    const auto m = small_model(mode, 3, 0.2);
    const auto bytes = encode_checkpoint(m);
    const auto back = decode_checkpoint(bytes);
    EXPECT_EQ(back.config(), m.config());
    EXPECT_EQ(encode_checkpoint(back), bytes);
    for (const auto& [name, p] : m.params()) {
      EXPECT_TRUE(bitwise_equal(back.params().at(name).value, p.value)) << name;
      EXPECT_EQ(back.params().at(name).trainable, p.trainable) << name;
    }
  }
  const auto merged = adapter::merge_model(small_model(TrainMode::rsadapter, 4, 0.2));
  const auto bytes = encode_checkpoint(merged);
  EXPECT_TRUE(decode_checkpoint(bytes).config().merged);
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = encode_checkpoint(small_model(TrainMode::linear_probe, 1));
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RSAK");
  EXPECT_EQ(bytes[4], kCheckpointVersion);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
}

TEST(Checkpoint, EverySingleByteCorruptionIsDetected) {
  const auto bytes = encode_checkpoint(small_model(TrainMode::rsadapter, 5, 0.1));
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto bad = bytes;
    const std::size_t at = rng.below(bad.size());
    bad[at] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    EXPECT_THROW(decode_checkpoint(bad), CheckpointError) << "byte " << at;
  }
  for (std::size_t len : {std::size_t{0}, std::size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(len));
    EXPECT_THROW(decode_checkpoint(cut), CheckpointError) << len;
  }
}

TEST(Checkpoint, ConfigValuesRoundTrip) {
  model::ModelConfig c = small_model(TrainMode::rsadapter_mlp_only, 1).config();
  c.adapter_layer_mask = {true, false};
  c.skip_connection_in_adapter = true;
  c.init_std = 0.037;
  EXPECT_EQ(config_from_values(config_to_values(c)), c);
}

TEST(Checkpoint, FileErrors) {
  const auto dir = fs::temp_directory_path() / "rsak_ckpt_test";
  fs::create_directories(dir);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
  const auto m = small_model(TrainMode::rsadapter, 2, 0.1);
  save_checkpoint(dir / "m.ckpt", m);
  EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "m.ckpt")), encode_checkpoint(m));
  fs::remove_all(dir);
}

constexpr const char* kConfigText = R"({
  "model": {"d": 16, "n_layers": 2, "n_heads": 2, "d_prime": 4, "vocab_size": 15,
            "max_text_len": 7, "image_side": 8, "patch_grid": 4, "patch_channels": 3,
            "n_answers": 12, "head_hidden": 16, "init_std": 0.1,
            "skip_connection_in_adapter": false, "adapter_layer_mask": []},
  "train": {"epochs": 2, "batch_size": 16, "warmup_epochs": 1, "warmup_lr": 0.001,
            "base_lr": 0.003, "adam_beta1": 0.9, "adam_beta2": 0.999, "adam_eps": 1e-8,
            "seed": 3},
  "data": {"train": "train.jsonl", "test": "test.jsonl"},
  "mode": "rsadapter",
  "scenario": "standard"
})";

TEST(RunConfig, ParseDumpRoundTrip) {
  const RunConfig cfg = parse_run_config(kConfigText, "/base");
  EXPECT_EQ(cfg.model.d, 16u);
  EXPECT_EQ(cfg.train.warmup_epochs, 1u);
  EXPECT_EQ(cfg.train_data, fs::path("/base/train.jsonl"));
  EXPECT_EQ(cfg.mode, TrainMode::rsadapter);
  EXPECT_EQ(cfg.resolved_model().adapter_mode, model::AdapterMode::parallel_both);
  const RunConfig again = parse_run_config(dump_run_config(cfg));
  EXPECT_EQ(again.model, cfg.model);
  EXPECT_EQ(again.train, cfg.train);
  EXPECT_EQ(again.train_data, cfg.train_data);
  EXPECT_EQ(again.scenario, cfg.scenario);
}

TEST(RunConfig, ShippedToyConfigParses) {
  const RunConfig cfg = load_run_config(fs::path(RSAK_SOURCE_DIR) / "configs" / "toy.json");
  EXPECT_NO_THROW(cfg.resolved_model().validate());
  EXPECT_NO_THROW(cfg.train.validate());
  EXPECT_EQ(cfg.model.d, 64u);
  EXPECT_EQ(cfg.model.n_layers, 4u);
  EXPECT_EQ(cfg.model.d_prime, 16u);
}

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    parse_run_config(text);
    FAIL() << "accepted config missing " << needle;
  } catch (const model::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(RunConfig, MissingUnknownAndBadKeys) {
  const std::string base = kConfigText;
  auto replace = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  expect_config_error(replace(R"("d_prime": 4, )", ""), "model.d_prime");
  expect_config_error(replace(R"("seed": 3)", R"("seed": 3, "momentum": 0.5)"), "train.momentum");
  expect_config_error(replace(R"("mode": "rsadapter")", R"("mode": "lora")"), "lora");
  expect_config_error(replace(R"("epochs": 2)", R"("epochs": -1)"), "train.epochs");
  expect_config_error(replace(R"("n_heads": 2)", R"("n_heads": 3)"), "n_heads");
  expect_config_error("{", "JSON");
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), model::ConfigError);
}

TEST(Bench, AdapterOpDifferenceMatchesFormula) {
  for (std::size_t d : {8u, 64u, 768u}) {
    for (std::size_t dp : {1u, 16u, 192u}) {
      const auto rs = adapter_token_ops(d, dp, model::AdapterVariant::rs, false);
      const auto merged = adapter_token_ops(d, dp, model::AdapterVariant::rs, true);
      EXPECT_EQ(rs.ops() - merged.ops(), 2 * (dp * dp + d * d) + (dp + d));
      EXPECT_EQ(merged.macs, 2 * d * dp);
      EXPECT_EQ(merged.bias_adds, d + dp);
    }
  }
}

TEST(Bench, ForwardCountsDifferByAdapterTokens) {
  const auto m = small_model(TrainMode::rsadapter, 1);
  const auto merged = adapter::merge_model(m);
  const std::size_t batch = 5;
  const auto& c = m.config();
  const std::uint64_t tokens = batch * c.n_tokens();
  const std::uint64_t diff = forward_op_count(c, batch).ops() -
                             forward_op_count(merged.config(), batch).ops();
  EXPECT_EQ(diff, c.adapter_count() * tokens *
                      (2 * (c.d_prime * c.d_prime + c.d * c.d) + (c.d_prime + c.d)));
  const auto vanilla = small_model(TrainMode::linear_probe, 1);
  EXPECT_LT(forward_op_count(vanilla.config(), batch).ops(), forward_op_count(c, batch).ops());
}

TEST(Bench, RunBenchReportsMatchAndSavings) {
  const auto m = small_model(TrainMode::rsadapter, 2, 0.2);
  const auto merged = adapter::merge_model(m);
  const auto batch = synthetic_inputs(m.config(), 8, 1);
  ASSERT_EQ(batch.size(), 8u);
  const auto r = run_bench(m, merged, batch, 2, 1);
  EXPECT_TRUE(r.outputs_match);
  EXPECT_LE(r.max_abs_diff, 1e-9);
  EXPECT_EQ(r.tokens, 8 * m.config().n_tokens());
  EXPECT_EQ(r.adapter_count, 4u);
  const std::size_t d = 8, dp = 3;
  EXPECT_EQ(r.saved_ops_per_adapter_token, 2 * (dp * dp + d * d) + (dp + d));
  EXPECT_GT(r.unmerged_seconds, 0.0);
  EXPECT_NE(format_bench(r).find("saved_ops_per_adapter_token"), std::string::npos);
}

TEST(Bench, SyntheticInputsAreDeterministicAndValid) {
  const auto c = small_model(TrainMode::rsadapter, 1).config();
  const auto a = synthetic_inputs(c, 20, 4);
  EXPECT_EQ(a, synthetic_inputs(c, 20, 4));
  EXPECT_NE(a, synthetic_inputs(c, 20, 5));
  for (const auto& s : a) {
    EXPECT_EQ(s.tokens.size(), c.max_text_len);
    for (int t : s.tokens) {
      EXPECT_GE(t, 1);
      EXPECT_LT(t, static_cast<int>(c.vocab_size));
    }
    EXPECT_LT(s.answer, static_cast<int>(c.n_answers));
  }
}

TEST(Ablation, PlacementDryRunCountsAreConsistent) {
  RunConfig cfg = parse_run_config(kConfigText);
  const auto rows = run_ablation(cfg, AblationAxis::placement, {}, {}, true);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].tunable, rows[i].expected_tunable) << rows[i].variant.label;
    EXPECT_FALSE(rows[i].metrics.has_value());
    if (i > 0) {
      EXPECT_GE(rows[i].tunable, rows[i - 1].tunable) << rows[i].variant.label;
    }
  }
  EXPECT_LT(rows[0].tunable, rows[1].tunable);
  EXPECT_EQ(rows[1].tunable, rows[2].tunable);  // MSA and MLP sites are the same size
  EXPECT_LT(rows[2].tunable, rows[3].tunable);
  EXPECT_LT(rows[3].tunable, rows[4].tunable);
  EXPECT_EQ(rows[0].variant.mode, TrainMode::linear_probe);
  EXPECT_EQ(rows[4].variant.mode, TrainMode::full_finetune);
  const std::string table = format_ablation_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 6);
}

TEST(Ablation, OtherAxesBuildValidGrids) {
  RunConfig cfg = parse_run_config(kConfigText);
  cfg.model.n_layers = 4;
  EXPECT_EQ(ablation_grid(cfg, AblationAxis::skip).size(), 6u);
  const auto bottleneck = ablation_grid(cfg, AblationAxis::bottleneck);
  ASSERT_EQ(bottleneck.size(), 4u);
  EXPECT_EQ(bottleneck[0].model.d_prime, 2u);
  EXPECT_EQ(bottleneck[3].model.d_prime, 16u);
  const auto position = ablation_grid(cfg, AblationAxis::position);
  ASSERT_EQ(position.size(), 5u);
  for (const auto& v : position) {
    EXPECT_NO_THROW(v.model.validate());
    EXPECT_EQ(expected_tunable(v.model, v.mode), adapter::tunable_count(v.model, v.mode));
  }
  // Layers 2 and 4 (even 1-based numbers) are indices 1 and 3.
  const auto& even = position[2].model.adapter_layer_mask;
  EXPECT_EQ(even, (std::vector<bool>{false, true, false, true}));
  const auto layers = ablation_grid(cfg, AblationAxis::layers);
  ASSERT_EQ(layers.size(), 4u);
  EXPECT_EQ(layers[0].model.n_layers, 1u);
  EXPECT_EQ(layers[3].model.n_layers, 4u);
  EXPECT_EQ(parse_ablation_axis("bottleneck"), AblationAxis::bottleneck);
  EXPECT_THROW(parse_ablation_axis("width"), model::ConfigError);
}

// End-to-end command tests share one small dataset and config on disk.
class Commands : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "rsak_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data::save_dataset(dir_ / "train.jsonl", data::generate(96, 1));
    data::save_dataset(dir_ / "test.jsonl", data::generate(45, 2));
    std::ofstream(dir_ / "run.json") << kConfigText;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static int run(const std::function<int(std::ostream&)>& fn, std::string* out = nullptr,
                 std::string* err = nullptr) {
    std::ostringstream os, es;
    const int code = run_guarded([&] { return fn(os); }, es);
    if (out) *out = os.str();
    if (err) *err = es.str();
    return code;
  }

  static std::string value_of(const std::string& report, const std::string& key) {
    std::istringstream is(report);
    std::string line;
    while (std::getline(is, line))
      if (line.rfind(key + "\t", 0) == 0) return line.substr(key.size() + 1);
    return {};
  }

  static fs::path trained() {
    const fs::path ckpt = dir_ / "ckpt" / "model.ckpt";
    if (!fs::exists(ckpt)) {
      TrainArgs a;
      a.config = dir_ / "run.json";
      a.out = ckpt;
      a.log = dir_ / "train.log";
      std::string out;
      EXPECT_EQ(run([&](std::ostream& os) { return cmd_train(a, os); }, &out), kExitOk);
      train_report_ = out;
    }
    return ckpt;
  }

  static inline fs::path dir_;
  static inline std::string train_report_;
};

TEST_F(Commands, TrainThenEvalReproducesFinalAccuracy) {
  const fs::path ckpt = trained();
  EXPECT_TRUE(fs::exists(dir_ / "train.log"));
  const std::string tunable = value_of(train_report_, "tunable");
  const auto resolved = parse_run_config(kConfigText).resolved_model();
  EXPECT_EQ(tunable, std::to_string(adapter::param_count(resolved, adapter::Phase::train)
                                        .tunable_exact()));
  EvalArgs e;
  e.ckpt = ckpt;
  e.data = dir_ / "test.jsonl";
  std::string out;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_eval(e, os); }, &out), kExitOk);
  EXPECT_FALSE(value_of(out, "OA").empty());
  EXPECT_EQ(value_of(out, "OA"), value_of(train_report_, "OA"));
  EXPECT_EQ(value_of(out, "AA"), value_of(train_report_, "AA"));
}

TEST_F(Commands, MergeAndVerify) {
  const fs::path ckpt = trained();
  MergeArgs m;
  m.ckpt = ckpt;
  m.out = dir_ / "merged" / "model.ckpt";
  std::string out;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_merge(m, os); }, &out), kExitOk);
  const long before = std::stol(value_of(out, "tensors_before"));
  const long after = std::stol(value_of(out, "tensors_after"));
  EXPECT_EQ(before - after, 4 * std::stol(value_of(out, "adapters")));
  EXPECT_TRUE(load_checkpoint(m.out).config().merged);

  VerifyMergeArgs v;
  v.ckpt = ckpt;
  v.trials = 20;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_verify_merge(v, os); }, &out), kExitOk);
  EXPECT_EQ(value_of(out, "result"), "pass");
  EXPECT_LE(std::stod(value_of(out, "max_abs_diff")), 1e-9);

  // Merging the merged checkpoint has nothing left to fold.
  MergeArgs again{m.out, dir_ / "twice.ckpt"};
  std::string err;
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_merge(again, os); }, nullptr, &err), kExitData);
  EXPECT_NE(err.find("nothing to merge"), std::string::npos) << err;
}

TEST_F(Commands, VerifyMergeAtInitIsExact) {
  save_checkpoint(dir_ / "init.ckpt", small_model(TrainMode::rsadapter, 8));
  VerifyMergeArgs v;
  v.ckpt = dir_ / "init.ckpt";
  v.trials = 10;
  std::string out;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_verify_merge(v, os); }, &out), kExitOk);
  EXPECT_EQ(std::stod(value_of(out, "max_abs_diff")), 0.0);
}

TEST_F(Commands, MergeWithoutAdaptersExitsWithDataError) {
  save_checkpoint(dir_ / "lp.ckpt", small_model(TrainMode::linear_probe, 1));
  MergeArgs m{dir_ / "lp.ckpt", dir_ / "lp_merged.ckpt"};
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_merge(m, os); }), kExitData);
  EXPECT_FALSE(fs::exists(m.out));
}

TEST_F(Commands, AblateDryRunWritesTable) {
  AblateArgs a;
  a.config = dir_ / "run.json";
  a.axis = AblationAxis::bottleneck;
  a.dry_run = true;
  a.out = dir_ / "tables" / "bottleneck.tsv";
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_ablate(a, os, nullptr); }), kExitOk);
  std::ifstream is(*a.out);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header.rfind("variant\t", 0), 0u);
}

TEST_F(Commands, BenchAndGradcheck) {
  save_checkpoint(dir_ / "bench.ckpt", small_model(TrainMode::rsadapter, 3, 0.2));
  BenchArgs b;
  b.ckpt = dir_ / "bench.ckpt";
  b.batch = 4;
  b.iters = 2;
  b.warmup = 1;
  std::string out;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_bench(b, os); }, &out), kExitOk);
  EXPECT_EQ(value_of(out, "saved_ops_per_adapter_token"),
            std::to_string(2 * (9 + 64) + (3 + 8)));

  GradcheckArgs g;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_gradcheck(g, os); }, &out), kExitOk);
  EXPECT_EQ(value_of(out, "result"), "pass");
  g.tol = 0.0;
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_gradcheck(g, os); }, &out), kExitVerify);
}

TEST_F(Commands, AttmapFilesAreValid) {
  const fs::path ckpt = trained();
  AttmapArgs a;
  a.ckpt = ckpt;
  a.data = dir_ / "test.jsonl";
  a.sample = 4;
  a.out = dir_ / "maps" / "s4";
  std::string out;
  ASSERT_EQ(run([&](std::ostream& os) { return cmd_attmap(a, os); }, &out), kExitOk);
  EXPECT_NEAR(std::stod(value_of(out, "row_sum")), 1.0, 1e-9);

  std::ifstream grid(dir_ / "maps" / "s4.txt");
  double v = 0.0, image_mass = 0.0;
  std::size_t cells = 0;
  while (grid >> v) {
    EXPECT_GE(v, 0.0);
    image_mass += v;
    ++cells;
  }
  EXPECT_EQ(cells, 16u);
  EXPECT_NEAR(image_mass, std::stod(value_of(out, "image_mass")), 1e-8);

  std::ifstream tokens(dir_ / "maps" / "s4.tokens.txt");
  std::string line;
  double text_mass = 0.0;
  std::size_t lines = 0;
  while (std::getline(tokens, line)) {
    text_mass += std::stod(line.substr(line.rfind(':') + 1));
    ++lines;
  }
  EXPECT_EQ(lines, 9u);  // text class, 7 question slots, image class
  EXPECT_NEAR(text_mass + image_mass, 1.0, 1e-9);

  std::ifstream pgm(dir_ / "maps" / "s4.pgm");
  std::string magic;
  pgm >> magic;
  EXPECT_EQ(magic, "P2");

  a.sample = 45;
  std::string err;
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_attmap(a, os); }, nullptr, &err), kExitData);
  EXPECT_NE(err.find("out of range"), std::string::npos);
}

TEST_F(Commands, ExitCodesForBadInputs) {
  TrainArgs t;
  t.config = dir_ / "missing.json";
  t.out = dir_ / "x.ckpt";
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_train(t, os); }), kExitUsage);
  EvalArgs e;
  e.ckpt = dir_ / "missing.ckpt";
  e.data = dir_ / "test.jsonl";
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_eval(e, os); }), kExitData);
  std::ofstream(dir_ / "broken.jsonl") << "{\"image\": [[0,0,0]]\n";
  save_checkpoint(dir_ / "small.ckpt", small_model(TrainMode::rsadapter, 1));
  e.ckpt = dir_ / "small.ckpt";
  e.data = dir_ / "broken.jsonl";
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_eval(e, os); }), kExitData);
  GenDataArgs g;
  g.out = dir_ / "gen" / "none.jsonl";
  g.n = 0;
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_gen_data(g, os); }), kExitUsage);
  g.n = 12;
  EXPECT_EQ(run([&](std::ostream& os) { return cmd_gen_data(g, os); }), kExitOk);
  EXPECT_EQ(data::load_dataset(g.out).size(), 12u);
}

TEST_F(Commands, RandomPredictorScoresNearChance) {
  // An untrained wide-init model predicts almost independently of the answer,
  // so on a large balanced set its accuracy stays far from perfect.
  const auto ds = data::generate(600, 12);
  model::ModelConfig c = small_model(TrainMode::linear_probe, 1).config();
  const auto m = model::Model::initialize(c, 21);
  const auto metrics = data::evaluate(m, ds);
  EXPECT_LT(metrics.overall_accuracy, 0.4);
}

}  // namespace
}  // namespace rsak::cli
