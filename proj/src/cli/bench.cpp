#include "rsak/cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "rsak/numerics/rng.hpp"

namespace rsak::cli {

OpCount adapter_token_ops(std::size_t d, std::size_t dp, model::AdapterVariant variant,
                          bool merged) {
  OpCount c;
  c.macs = 2 * d * dp;
  c.bias_adds = d + dp;
  if (variant == model::AdapterVariant::rs && !merged) {
    c.macs += dp * dp + d * d;
    c.bias_adds += dp + d;
  }
  return c;
}

OpCount forward_op_count(const model::ModelConfig& cfg, std::size_t batch) {
  const std::uint64_t d = cfg.d;
  const std::uint64_t t = cfg.n_tokens();
  const std::uint64_t hidden = cfg.mlp_hidden();
  OpCount per_sample;
  per_sample.macs += cfg.n_visual() * cfg.patch_dim() * d;

  const OpCount adapter = adapter_token_ops(cfg.d, cfg.d_prime, cfg.adapter_variant, cfg.merged);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    per_sample.macs += 4 * t * d * d;  // Q, K, V and output projections
    per_sample.macs += 2 * t * t * d;  // scores and weighted values over all heads
    per_sample.macs += 2 * t * d * hidden;
    per_sample.bias_adds += t * (hidden + d);
    const std::uint64_t sites = (cfg.has_msa_adapter(l) ? 1 : 0) + (cfg.has_mlp_adapter(l) ? 1 : 0);
    per_sample.macs += sites * t * adapter.macs;
    per_sample.bias_adds += sites * t * adapter.bias_adds;
  }

  const std::uint64_t h = cfg.head_hidden;
  per_sample.macs += d * h + h * h + h * cfg.n_answers;
  per_sample.bias_adds += 2 * h + cfg.n_answers;

  return {per_sample.macs * batch, per_sample.bias_adds * batch};
}

data::Dataset synthetic_inputs(const model::ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  const Rng root(seed);
  const std::size_t cells = cfg.image_side * cfg.image_side;
  data::Dataset out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.child(i);
    auto& s = out[i];
    s.tokens.resize(cfg.max_text_len);
    for (int& tok : s.tokens)
      tok = cfg.vocab_size > 1 ? 1 + static_cast<int>(rng.below(cfg.vocab_size - 1)) : 0;
    s.image = Matrix(cells, cfg.patch_channels);
    for (std::size_t r = 0; r < cells; ++r)
      for (std::size_t c = 0; c < cfg.patch_channels; ++c) s.image(r, c) = rng.uniform();
    s.answer = static_cast<int>(rng.below(cfg.n_answers));
  }
  return out;
}

double max_logit_diff(const model::Model& a, const model::Model& b,
                      std::span<const data::VQASample> samples) {
  constexpr std::size_t kChunk = 64;
  double worst = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
    const Matrix la = a.forward(chunk).logits;
    const Matrix lb = b.forward(chunk).logits;
    for (std::size_t i = 0; i < la.rows(); ++i)
      for (std::size_t j = 0; j < la.cols(); ++j)
        worst = std::max(worst, std::abs(la(i, j) - lb(i, j)));
  }
  return worst;
}

BenchReport run_bench(const model::Model& unmerged, const model::Model& merged,
                      std::span<const data::VQASample> batch, std::size_t iters,
                      std::size_t warmup, double tol) {
  using Clock = std::chrono::steady_clock;
  BenchReport r;
  r.batch = batch.size();
  r.iters = iters;
  r.warmup = warmup;
  r.tol = tol;

  const auto& cfg = unmerged.config();
  r.unmerged_ops = forward_op_count(cfg, batch.size());
  r.merged_ops = forward_op_count(merged.config(), batch.size());
  r.adapter_count = cfg.adapter_count();
  r.tokens = batch.size() * cfg.n_tokens();
  const auto a = adapter_token_ops(cfg.d, cfg.d_prime, cfg.adapter_variant, false);
  const auto b = adapter_token_ops(cfg.d, cfg.d_prime, cfg.adapter_variant, true);
  r.saved_ops_per_adapter_token = a.ops() - b.ops();

  const Matrix ref_u = unmerged.forward(batch).logits;
  const Matrix ref_m = merged.forward(batch).logits;
  for (std::size_t i = 0; i < ref_u.rows(); ++i)
    for (std::size_t j = 0; j < ref_u.cols(); ++j)
      r.max_abs_diff = std::max(r.max_abs_diff, std::abs(ref_u(i, j) - ref_m(i, j)));
  r.outputs_match = r.max_abs_diff <= tol;

  for (std::size_t i = 0; i < warmup; ++i) {
    (void)unmerged.forward(batch);
    (void)merged.forward(batch);
  }
  double tu = 0.0;
  double tm = 0.0;
  for (std::size_t i = 0; i < iters; ++i) {
    // Alternate which model goes first so cache and frequency effects even out.
    const bool unmerged_first = i % 2 == 0;
    for (int k = 0; k < 2; ++k) {
      const bool run_unmerged = (k == 0) == unmerged_first;
      const auto t0 = Clock::now();
      (void)(run_unmerged ? unmerged : merged).forward(batch);
      const double s = std::chrono::duration<double>(Clock::now() - t0).count();
      (run_unmerged ? tu : tm) += s;
    }
  }
  if (iters > 0) {
    r.unmerged_seconds = tu / static_cast<double>(iters);
    r.merged_seconds = tm / static_cast<double>(iters);
    r.ratio = r.unmerged_seconds > 0.0 ? r.merged_seconds / r.unmerged_seconds : 0.0;
  }
  return r;
}

std::string format_bench(const BenchReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << "batch\t" << r.batch << "\niters\t" << r.iters << "\nwarmup\t" << r.warmup
     << "\nunmerged_mean_s\t" << r.unmerged_seconds << "\nmerged_mean_s\t" << r.merged_seconds
     << "\nratio\t" << r.ratio << "\nunmerged_macs\t" << r.unmerged_ops.macs
     << "\nmerged_macs\t" << r.merged_ops.macs << "\nunmerged_ops\t" << r.unmerged_ops.ops()
     << "\nmerged_ops\t" << r.merged_ops.ops() << "\nadapters\t" << r.adapter_count
     << "\ntokens\t" << r.tokens << "\nsaved_ops_per_adapter_token\t"
     << r.saved_ops_per_adapter_token << "\nmax_abs_diff\t" << r.max_abs_diff
     << "\noutputs_match\t" << (r.outputs_match ? "yes" : "no") << '\n';
  return os.str();
}

}  // namespace rsak::cli
