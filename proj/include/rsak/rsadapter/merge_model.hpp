#pragma once

#include <stdexcept>

#include "rsak/model/model.hpp"

namespace rsak::adapter {

/// Raised when a model holds no foldable adapters.
class NothingToMerge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/**
 * Folds every rs adapter of `model` into its inference form. All other
 * tensors, scales and trainable flags are copied unchanged. Throws
 * NothingToMerge for models without adapters, with plain adapters, or that
 * are already merged.
 */
model::Model merge_model(const model::Model& model);

}  // namespace rsak::adapter
