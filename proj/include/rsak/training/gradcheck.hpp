#pragma once

#include <span>
#include <string>
#include <vector>

#include "rsak/data/sample.hpp"
#include "rsak/model/model.hpp"

namespace rsak::train {

struct GradcheckReport {
  std::size_t checked = 0;  // number of scalar entries compared
  std::size_t tensors = 0;  // number of trainable tensors visited
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Gradient magnitudes below this are compared on an absolute scale:
/// rel = |a - n| / max(|a|, |n|, kGradcheckFloor).
inline constexpr double kGradcheckFloor = 1e-4;

/**
 * Compares backward() against central differences of the mean cross-entropy
 * over `samples`, for every entry of every trainable tensor. Frozen tensors are
 * skipped. Passes iff max_rel_error < tol, so tol = 0 never passes.
 * Parameter values are restored bit for bit afterwards.
 */
GradcheckReport gradcheck(model::Model& model, std::span<const data::VQASample> samples,
                          double eps = 1e-5, double tol = 1e-6);

}  // namespace rsak::train
