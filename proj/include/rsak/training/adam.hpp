#pragma once

#include <cstddef>

#include "rsak/training/param_store.hpp"

namespace rsak::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// One bias-corrected Adam update at step `t` (1-based) on every trainable
/// tensor, then zeroes all gradient buffers. Frozen tensors and their moments
/// are never touched.
void adam_step(ParamStore& store, double lr, std::size_t t, const AdamConfig& cfg = {});

}  // namespace rsak::train
