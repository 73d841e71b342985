#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "rsak/data/sample.hpp"
#include "rsak/model/model.hpp"

namespace rsak::cli {

/// Arithmetic of one forward pass. A multiply-accumulate is one multiply plus
/// one add, so ops() counts 2 per MAC and 1 per bias addition.
struct OpCount {
  std::uint64_t macs = 0;
  std::uint64_t bias_adds = 0;
  std::uint64_t ops() const { return 2 * macs + bias_adds; }
};

/**
 * Analytic count for one adapter applied to one token. Unmerged rs adapters
 * run both FC layers and both phi layers; merged and plain adapters run the two
 * FC layers only.
 */
OpCount adapter_token_ops(std::size_t d, std::size_t d_prime, model::AdapterVariant variant,
                          bool merged);

/**
 * Analytic count for a forward pass over `batch` samples: patch projection,
 * attention projections and products, MLP, adapters and head. Normalization,
 * softmax, activations and residual additions are left out because folding
 * does not change them.
 */
OpCount forward_op_count(const model::ModelConfig& cfg, std::size_t batch);

/// Random inputs shaped for `cfg`: full-length questions over non-pad ids,
/// uniform pixel values and uniform answers. Deterministic in `seed`.
data::Dataset synthetic_inputs(const model::ModelConfig& cfg, std::size_t n, std::uint64_t seed);

/// Largest |a - b| between the two models' logits over `samples`.
double max_logit_diff(const model::Model& a, const model::Model& b,
                      std::span<const data::VQASample> samples);

struct BenchReport {
  std::size_t batch = 0;
  std::size_t iters = 0;
  std::size_t warmup = 0;
  double unmerged_seconds = 0.0;  // mean per forward pass
  double merged_seconds = 0.0;
  double ratio = 0.0;  // merged / unmerged
  OpCount unmerged_ops;
  OpCount merged_ops;
  std::size_t adapter_count = 0;
  std::size_t tokens = 0;                  // batch * tokens per sample
  std::uint64_t saved_ops_per_adapter_token = 0;
  double max_abs_diff = 0.0;
  double tol = 0.0;
  bool outputs_match = false;
};

/**
 * Times `iters` forward passes of each model on the same batch after `warmup`
 * untimed passes, alternating the two models so drift affects both equally.
 * Outputs are compared on the same batch; they match iff the largest logit
 * difference is at most `tol`.
 */
BenchReport run_bench(const model::Model& unmerged, const model::Model& merged,
                      std::span<const data::VQASample> batch, std::size_t iters,
                      std::size_t warmup, double tol = 1e-9);

std::string format_bench(const BenchReport& r);

}  // namespace rsak::cli
