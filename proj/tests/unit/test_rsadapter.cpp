#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rsak/model/model.hpp"
#include "rsak/numerics/rng.hpp"
#include "rsak/rsadapter/adapter.hpp"
#include "rsak/rsadapter/freeze.hpp"
#include "rsak/rsadapter/merge_model.hpp"
#include "rsak/rsadapter/param_count.hpp"

namespace rsak::adapter {
namespace {

using model::AdapterMode;
using model::ModelConfig;

ModelConfig reference_scale() {
  ModelConfig c;
  c.d = 768;
  c.d_prime = 192;
  c.n_layers = 12;
  c.n_heads = 12;
  c.n_answers = 9;
  c.head_hidden = 768;
  c.adapter_mode = AdapterMode::parallel_both;
  return c;
}

ModelConfig small_config() {
  ModelConfig c;
  c.d = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_prime = 4;
  c.vocab_size = 12;
  c.max_text_len = 4;
  c.image_side = 4;
  c.patch_grid = 2;
  c.n_answers = 5;
  c.head_hidden = 16;
  return c;
}

// Reference for the rs branch, composed from primitive ops.
Matrix reference_rs(const Matrix& x, const AdapterWeights& w) {
  auto affine = [](const Matrix& in, const Matrix& m, const Matrix& b) {
    Matrix out = matmul(in, m);
    add_row_broadcast(out, b);
    return out;
  };
  const Matrix h = gelu(affine(affine(x, w.w_down, w.b_down), w.phi_down_w, w.phi_down_b));
  return affine(affine(h, w.w_up, w.b_up), w.phi_up_w, w.phi_up_b);
}

TEST(Adapter, ForwardMatchesComposition) {
  const auto w = AdapterWeights::random(6, 3, 1, 0.5);
  Rng rng(2);
  const Matrix x = rng_normal(rng, 4, 6, 1.0);
  EXPECT_LE(max_abs_diff(adapter_forward(x, w, AdapterVariant::rs, false), reference_rs(x, w)),
            1e-13);
  EXPECT_LE(max_abs_diff(adapter_forward(x, w, AdapterVariant::rs, true), add(x, reference_rs(x, w))),
            1e-13);
}

TEST(Adapter, PlainVariantIgnoresPhi) {
  auto w = AdapterWeights::random(5, 2, 3, 0.5);
  Rng rng(4);
  const Matrix x = rng_normal(rng, 3, 5, 1.0);
  Matrix pre = matmul(x, w.w_down);
  add_row_broadcast(pre, w.b_down);
  Matrix expected = matmul(gelu(pre), w.w_up);
  add_row_broadcast(expected, w.b_up);
  EXPECT_LE(max_abs_diff(adapter_forward(x, w, AdapterVariant::plain, false), expected), 1e-13);
  w.phi_up_w = Matrix();
  w.phi_down_w = Matrix();
  EXPECT_LE(max_abs_diff(adapter_forward(x, w, AdapterVariant::plain, false), expected), 1e-13);
}

TEST(Adapter, ZeroInputAndBiasesGiveZero) {
  const AdapterWeights w = AdapterWeights::initial(8, 4, 1);
  EXPECT_EQ(adapter_forward(Matrix(3, 8), w, AdapterVariant::rs, false), Matrix(3, 8));
  const MergedAdapter m = merge(w);
  EXPECT_EQ(merged_forward(Matrix(3, 8), m), Matrix(3, 8));
}

TEST(Adapter, InitialStateIsNoOp) {
  const AdapterWeights w = AdapterWeights::initial(8, 4, 7, 0.02);
  EXPECT_EQ(w.phi_down_w, Matrix::identity(4));
  EXPECT_EQ(w.phi_up_w, Matrix::identity(8));
  EXPECT_EQ(w.w_up, Matrix(4, 8));
  EXPECT_EQ(w.scale, 1.0);
  Rng rng(1);
  const Matrix x = rng_normal(rng, 5, 8, 1.0);
  EXPECT_EQ(adapter_forward(x, w, AdapterVariant::rs, false), Matrix(5, 8));
  EXPECT_EQ(adapter_forward(x, w, AdapterVariant::rs, true), x);
}

TEST(Merge, InitialMergeIsIdentityOnFcPairs) {
  const AdapterWeights w = AdapterWeights::initial(12, 5, 3, 0.1);
  const MergedAdapter m = merge(w);
  EXPECT_TRUE(bitwise_equal(m.w_down_rep, w.w_down));
  EXPECT_TRUE(bitwise_equal(m.b_down_rep, w.b_down));
  EXPECT_TRUE(bitwise_equal(m.w_up_rep, w.w_up));
  EXPECT_TRUE(bitwise_equal(m.b_up_rep, w.b_up));
  EXPECT_EQ(m.weight_count(), 2u * 12u * 5u);
  EXPECT_EQ(m.bias_count(), 12u + 5u);
}

TEST(Merge, FoldedWeightsMatchHandExpansion) {
  const auto w = AdapterWeights::random(4, 3, 9, 1.0);
  const MergedAdapter m = merge(w);
  EXPECT_LE(max_abs_diff(m.w_down_rep, matmul(w.w_down, w.phi_down_w)), 1e-13);
  Matrix b = matmul(w.b_down, w.phi_down_w);
  b += w.phi_down_b;
  EXPECT_LE(max_abs_diff(m.b_down_rep, b), 1e-13);
  EXPECT_EQ(m.scale, w.scale);
}

TEST(Merge, PropertyOverRandomShapes) {
  Rng shapes(11);
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 1 + shapes.below(24);
    const std::size_t dp = 1 + shapes.below(12);
    const auto w = AdapterWeights::random(d, dp, 100 + trial, 0.4);
    Rng xr = Rng(12).child(static_cast<std::uint64_t>(trial));
    const Matrix x = rng_normal(xr, 1 + xr.below(6), d, 1.0);
    const MergedAdapter m = merge(w);
    worst = std::max(worst, max_abs_diff(adapter_forward(x, w, AdapterVariant::rs, false),
                                         merged_forward(x, m)));
    ASSERT_LE(max_abs_diff(adapter_forward(x, w, AdapterVariant::rs, true),
                           merged_forward(x, m, true)),
              1e-12);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(AdapterBackward, MatchesFiniteDifferences) {
  for (bool skip : {false, true}) {
    for (auto variant : {AdapterVariant::rs, AdapterVariant::plain}) {
      const AdapterWeights w = AdapterWeights::random(5, 3, 21, 0.6);
      Rng rng(22);
      const Matrix x = rng_normal(rng, 4, 5, 1.0);
      const Matrix dy = rng_normal(rng, 4, 5, 1.0);
      AdapterCache cache;
      (void)adapter_forward(x, w, variant, skip, &cache);
      Matrix dx(4, 5);
      const AdapterGrads g = adapter_backward(dy, w, variant, skip, cache, dx);
      auto loss = [&](const AdapterWeights& ww, const Matrix& xx) {
        return dot(adapter_forward(xx, ww, variant, skip), dy);
      };
      const double h = 1e-6;
      auto check = [&](Matrix AdapterWeights::*field, const Matrix& grad, const char* name) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
          AdapterWeights p = w;
          AdapterWeights m = w;
          (p.*field).data()[i] += h;
          (m.*field).data()[i] -= h;
          const double numeric = (loss(p, x) - loss(m, x)) / (2 * h);
          ASSERT_NEAR(grad.data()[i], numeric, 1e-7) << name << '[' << i << ']';
        }
      };
      check(&AdapterWeights::w_down, g.w_down, "w_down");
      check(&AdapterWeights::b_down, g.b_down, "b_down");
      check(&AdapterWeights::w_up, g.w_up, "w_up");
      check(&AdapterWeights::b_up, g.b_up, "b_up");
      if (variant == AdapterVariant::rs) {
        check(&AdapterWeights::phi_down_w, g.phi_down_w, "phi_down_w");
        check(&AdapterWeights::phi_down_b, g.phi_down_b, "phi_down_b");
        check(&AdapterWeights::phi_up_w, g.phi_up_w, "phi_up_w");
        check(&AdapterWeights::phi_up_b, g.phi_up_b, "phi_up_b");
        for (const Matrix* m : {&g.w_down, &g.b_down, &g.phi_down_w, &g.phi_down_b, &g.w_up,
                                &g.b_up, &g.phi_up_w, &g.phi_up_b})
          EXPECT_GT(max_abs(*m), 0.0);
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        Matrix xp = x, xm = x;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        EXPECT_NEAR(dx.data()[i], (loss(w, xp) - loss(w, xm)) / (2 * h), 1e-7);
      }
      EXPECT_EQ(g.scale, 0.0);
    }
  }
}

TEST(ParamCount, ClosedFormPerAdapterAtReferenceScale) {
  const auto b = param_count(reference_scale(), Phase::train);
  EXPECT_EQ(b.per_adapter_closed_form, 296832u);
  EXPECT_EQ(b.adapter_count, 24u);
  EXPECT_EQ(b.head, 768u * 768 + 768 + 768u * 768 + 768 + 768u * 9 + 9);
  EXPECT_NEAR(static_cast<double>(b.tunable_closed_form()), 8.4e6, 0.1e6);
}

TEST(ParamCount, LinearProbeAtReferenceScale) {
  ModelConfig c = reference_scale();
  c.adapter_mode = AdapterMode::none;
  const auto b = param_count(c, Phase::train);
  EXPECT_EQ(b.adapter_count, 0u);
  EXPECT_NEAR(static_cast<double>(b.tunable_exact()), 1.2e6, 0.1e6);
  EXPECT_EQ(tunable_count(c, TrainMode::linear_probe), b.head);
}

TEST(ParamCount, ExactAccountingMatchesLayout) {
  for (auto mode : {TrainMode::rsadapter, TrainMode::rsadapter_msa_only,
                    TrainMode::rsadapter_mlp_only, TrainMode::adapter_plain}) {
    const ModelConfig c = configure_for_mode(reference_scale(), mode);
    const auto b = param_count(c, Phase::train);
    EXPECT_EQ(tunable_count(c, mode), b.tunable_exact()) << to_string(mode);
    std::size_t total = 0;
    for (const auto& spec : model::parameter_layout(c)) total += spec.size();
    EXPECT_EQ(total, b.total_exact()) << to_string(mode);
  }
}

TEST(ParamCount, FoldingRemovesExactlyPhi) {
  const ModelConfig c = reference_scale();
  const auto tr = param_count(c, Phase::train);
  const auto inf = param_count(c, Phase::inference);
  const std::size_t d = 768, dp = 192;
  EXPECT_EQ(tr.per_adapter_phi, dp * dp + d * d + dp + d);
  EXPECT_EQ(tr.per_adapter_exact - inf.per_adapter_exact, tr.per_adapter_phi);
  EXPECT_EQ(inf.per_adapter_exact, 2 * d * dp + d + dp);
  EXPECT_EQ(inf.per_adapter_closed_form, 2 * d * dp);
  EXPECT_EQ(inf.per_adapter_phi, 0u);
}

TEST(ParamCount, ZeroBottleneckContributesNothing) {
  ModelConfig c = reference_scale();
  c.d_prime = 0;
  const auto b = param_count(c, Phase::train);
  EXPECT_EQ(b.adapter_count, 0u);
  EXPECT_EQ(b.adapters_exact, 0u);
  EXPECT_EQ(b.scales, 0u);
}

TEST(Freeze, ModesFlagTheRightGroups) {
  const ModelConfig base = small_config();
  for (auto mode : {TrainMode::linear_probe, TrainMode::full_finetune, TrainMode::rsadapter,
                    TrainMode::rsadapter_msa_only, TrainMode::rsadapter_mlp_only,
                    TrainMode::adapter_plain}) {
    const ModelConfig c = configure_for_mode(base, mode);
    auto store = model::init_params(c, 1);
    build_freeze_mask(mode, store);
    for (const auto& [name, p] : store) {
      const auto g = model::param_group(name);
      bool expected = false;
      if (mode == TrainMode::full_finetune) expected = true;
      else if (mode == TrainMode::linear_probe) expected = g == model::ParamGroup::head;
      else expected = g != model::ParamGroup::backbone && g != model::ParamGroup::embedding;
      EXPECT_EQ(p.trainable, expected) << to_string(mode) << ' ' << name;
    }
    EXPECT_EQ(store.trainable_count(), tunable_count(c, mode)) << to_string(mode);
    if (mode == TrainMode::full_finetune) {
      EXPECT_EQ(store.trainable_count(), store.total_count());
    }
  }
}

TEST(Freeze, ConfigureForMode) {
  const ModelConfig base = small_config();
  EXPECT_EQ(configure_for_mode(base, TrainMode::rsadapter).adapter_mode, AdapterMode::parallel_both);
  EXPECT_EQ(configure_for_mode(base, TrainMode::rsadapter_msa_only).adapter_mode,
            AdapterMode::parallel_msa);
  EXPECT_FALSE(configure_for_mode(base, TrainMode::rsadapter_mlp_only).scaling_enabled);
  EXPECT_EQ(configure_for_mode(base, TrainMode::linear_probe).adapter_mode, AdapterMode::none);
  EXPECT_EQ(configure_for_mode(base, TrainMode::adapter_plain).adapter_variant,
            AdapterVariant::plain);
  EXPECT_EQ(tunable_count(configure_for_mode(base, TrainMode::rsadapter_msa_only),
                          TrainMode::rsadapter_msa_only),
            tunable_count(configure_for_mode(base, TrainMode::rsadapter_mlp_only),
                          TrainMode::rsadapter_mlp_only));
  for (auto mode : {TrainMode::linear_probe, TrainMode::rsadapter, TrainMode::adapter_plain})
    EXPECT_EQ(parse_train_mode(to_string(mode)), mode);
  EXPECT_THROW(parse_train_mode("lora"), std::invalid_argument);
}

model::Model random_adapted_model(std::uint64_t seed) {
  ModelConfig c = configure_for_mode(small_config(), TrainMode::rsadapter);
  auto m = model::Model::initialize(c, seed);
  Rng rng(seed + 1);
  for (auto& [name, p] : m.params())
    p.value += rng_normal(rng, p.value.rows(), p.value.cols(), 0.2);
  return m;
}

TEST(MergeModel, ReplacesPhiTensorsAndKeepsLogits) {
  const auto m = random_adapted_model(3);
  const auto merged = merge_model(m);
  EXPECT_TRUE(merged.config().merged);
  const std::size_t adapters = m.config().adapter_count();
  EXPECT_EQ(m.params().size() - merged.params().size(), 4 * adapters);
  EXPECT_FALSE(merged.params().contains("blocks.0.msa_adapter.phi_down_w"));
  EXPECT_TRUE(merged.params().contains("blocks.1.mlp_adapter.w_up_rep"));
  EXPECT_EQ(merged.params().at("blocks.1.mlp_adapter.scale").value,
            m.params().at("blocks.1.mlp_adapter.scale").value);
  EXPECT_EQ(merged.params().at("head.w1").value, m.params().at("head.w1").value);

  std::vector<data::VQASample> batch;
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    data::VQASample s;
    s.tokens = {1 + static_cast<int>(rng.below(10)), 2};
    s.image = Matrix(16, 3);
    for (auto& v : s.image.data()) v = rng.uniform();
    batch.push_back(s);
  }
  EXPECT_LE(max_abs_diff(m.forward(batch).logits, merged.forward(batch).logits), 1e-9);
}

TEST(MergeModel, InitialModelMergesBitwise) {
  const ModelConfig c = configure_for_mode(small_config(), TrainMode::rsadapter);
  const auto m = model::Model::initialize(c, 9);
  const auto merged = merge_model(m);
  data::VQASample s;
  s.tokens = {3, 4, 5};
  s.image = Matrix(16, 3, 0.5);
  const std::vector batch{s};
  EXPECT_TRUE(bitwise_equal(m.forward(batch).logits, merged.forward(batch).logits));
}

TEST(MergeModel, RefusesWhenNothingToFold) {
  ModelConfig none = small_config();
  none.adapter_mode = AdapterMode::none;
  EXPECT_THROW(merge_model(model::Model::initialize(none, 1)), NothingToMerge);
  const auto plain =
      model::Model::initialize(configure_for_mode(small_config(), TrainMode::adapter_plain), 1);
  EXPECT_THROW(merge_model(plain), NothingToMerge);
  const auto merged = merge_model(random_adapted_model(2));
  EXPECT_THROW(merge_model(merged), NothingToMerge);
}

}  // namespace
}  // namespace rsak::adapter
