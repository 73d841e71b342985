#pragma once

#include <cstddef>

#include "rsak/model/config.hpp"

namespace rsak::adapter {

enum class Phase { train, inference };

/**
 * Parameter totals for a configuration, with two adapter accountings.
 *
 * `exact` fields count every stored tensor element: in the train phase an
 * rs adapter holds 2dd' FC weights, d+d' FC biases, d'²+d² phi weights and
 * d'+d phi biases; folding leaves 2dd' weights and d+d' biases.
 *
 * `closed_form` fields use the closed-form per-adapter figure
 * 2dd' + 2(d+d') (train) or 2dd' (inference), which ignores the phi
 * weight matrices and, at inference, the folded biases. Both are reported so
 * the discrepancy is visible rather than silently resolved.
 */
struct ParamBreakdown {
  Phase phase = Phase::train;
  std::size_t adapter_count = 0;

  std::size_t embedding = 0;
  std::size_t backbone = 0;
  std::size_t head = 0;
  std::size_t scales = 0;

  std::size_t per_adapter_exact = 0;
  std::size_t per_adapter_phi = 0;    // phi weights + phi biases (0 at inference)
  std::size_t per_adapter_closed_form = 0;  // closed-form figure per adapter
  std::size_t adapters_exact = 0;     // adapter_count * per_adapter_exact

  /// adapters + scales + head, the set an adapter fine-tune updates.
  std::size_t tunable_exact() const { return adapters_exact + scales + head; }
  std::size_t tunable_closed_form() const {
    return adapter_count * per_adapter_closed_form + scales + head;
  }
  std::size_t total_exact() const { return embedding + backbone + tunable_exact(); }
};

/// A d_prime of 0 is treated as "no adapters" and contributes nothing.
ParamBreakdown param_count(const model::ModelConfig& cfg, Phase phase);

}  // namespace rsak::adapter
