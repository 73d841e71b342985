#pragma once

#include <cstdint>

#include "rsak/model/config.hpp"
#include "rsak/numerics/matrix.hpp"

namespace rsak::adapter {

using model::AdapterVariant;

/**
 * Training-time adapter: two FC layers, each optionally followed by a
 * learnable linear transformation phi(h) = h·W' + b'.
 *
 * For the plain variant the phi tensors are unused and may be empty.
 * `scale` is the per-instance scaling factor; the caller multiplies the
 * branch output by it.
 */
struct AdapterWeights {
  Matrix w_down;      // d × d'
  Matrix b_down;      // 1 × d'
  Matrix phi_down_w;  // d' × d'
  Matrix phi_down_b;  // 1 × d'
  Matrix w_up;        // d' × d
  Matrix b_up;        // 1 × d
  Matrix phi_up_w;    // d × d
  Matrix phi_up_b;    // 1 × d
  double scale = 1.0;

  std::size_t d() const { return w_down.rows(); }
  std::size_t d_prime() const { return w_down.cols(); }

  /// W_down normal(0, std), W_up zero, phi identity / zero, scale one.
  static AdapterWeights initial(std::size_t d, std::size_t d_prime, std::uint64_t seed,
                                double w_down_std = 0.02);
  /// Every field drawn from normal(0, stddev); for property tests.
  static AdapterWeights random(std::size_t d, std::size_t d_prime, std::uint64_t seed,
                               double stddev = 1.0);
};

/// Inference-time adapter with the phi layers folded into the FC layers.
struct MergedAdapter {
  Matrix w_down_rep;  // d × d'
  Matrix b_down_rep;  // 1 × d'
  Matrix w_up_rep;    // d' × d
  Matrix b_up_rep;    // 1 × d
  double scale = 1.0;

  std::size_t weight_count() const { return w_down_rep.size() + w_up_rep.size(); }
  std::size_t bias_count() const { return b_down_rep.size() + b_up_rep.size(); }
};

struct AdapterCache {
  Matrix input;
  Matrix down;         // x·W_down + b_down
  Matrix pre_act;      // phi_down(down) for rs, down for plain
  Matrix activated;    // gelu(pre_act)
  Matrix up;           // activated·W_up + b_up
};

/// Parameter gradients; same field layout as the weights.
using AdapterGrads = AdapterWeights;

/**
 * Adapter branch output before scaling.
 *
 *   plain: f(x·W_down + b_down)·W_up + b_up
 *   rs:    phi_up(f(phi_down(x·W_down + b_down))·W_up + b_up)
 *
 * plus x when `skip` is set.
 */
Matrix adapter_forward(const Matrix& x, const AdapterWeights& w, AdapterVariant variant,
                       bool skip, AdapterCache* cache = nullptr);

/// Backward of adapter_forward. Adds dL/dx into `dx` and returns parameter
/// gradients (the scale field of the result is left at zero).
AdapterGrads adapter_backward(const Matrix& dy, const AdapterWeights& w, AdapterVariant variant,
                              bool skip, const AdapterCache& cache, Matrix& dx);

/// Folds (x·W + b)·W' + b' into x·(W·W') + (b·W' + b') for both branches.
MergedAdapter merge(const AdapterWeights& w);

/// f(x·W_down_rep + b_down_rep)·W_up_rep + b_up_rep, plus x when `skip` is set.
Matrix merged_forward(const Matrix& x, const MergedAdapter& m, bool skip = false);

}  // namespace rsak::adapter
