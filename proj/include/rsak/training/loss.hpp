#pragma once

#include <span>
#include <vector>

#include "rsak/numerics/matrix.hpp"

namespace rsak::train {

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> dlogits;  // softmax(logits) - onehot(target)
};

/// Softmax cross-entropy for one sample. Throws std::out_of_range when
/// `target` is not a valid class index.
CrossEntropy cross_entropy(std::span<const double> logits, int target);

/// Mean cross-entropy over the rows of `logits`. When `dlogits` is given it
/// receives d(mean loss)/d(logits), i.e. per-row gradients divided by the batch size.
double cross_entropy_batch(const Matrix& logits, std::span<const int> targets,
                           Matrix* dlogits = nullptr);

/// Index of the largest logit in each row (first one on ties).
std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace rsak::train
