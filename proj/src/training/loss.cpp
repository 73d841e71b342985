#include "rsak/training/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rsak::train {

CrossEntropy cross_entropy(std::span<const double> logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw std::out_of_range("target class " + std::to_string(target) + " outside [0, " +
                            std::to_string(logits.size()) + ")");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = std::log(z) + mx;

  CrossEntropy out;
  out.loss = log_z - logits[static_cast<std::size_t>(target)];
  out.dlogits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.dlogits[i] = std::exp(logits[i] - log_z);
  out.dlogits[static_cast<std::size_t>(target)] -= 1.0;
  return out;
}

double cross_entropy_batch(const Matrix& logits, std::span<const int> targets, Matrix* dlogits) {
  if (targets.size() != logits.rows())
    throw DimensionError("cross_entropy_batch: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(logits.rows()) + " rows");
  if (dlogits) *dlogits = Matrix(logits.rows(), logits.cols());
  const double inv_b = logits.rows() ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    CrossEntropy ce = cross_entropy(logits.row(r), targets[r]);
    total += ce.loss;
    if (dlogits)
      for (std::size_t c = 0; c < logits.cols(); ++c) (*dlogits)(r, c) = ce.dlogits[c] * inv_b;
  }
  return total * inv_b;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace rsak::train
