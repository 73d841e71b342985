#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rsak/data/sample.hpp"

namespace rsak::model {
class Model;
}

namespace rsak::data {

enum class Scenario;

struct TypeTally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct Metrics {
  std::array<TypeTally, 3> per_type{};  // indexed by QuestionType
  double average_accuracy = 0.0;        // unweighted mean over types present
  double overall_accuracy = 0.0;        // correct / total
  std::size_t correct = 0;
  std::size_t total = 0;
  /// confusion[truth][prediction]
  std::vector<std::vector<std::size_t>> confusion;

  const TypeTally& tally(QuestionType t) const { return per_type[static_cast<std::size_t>(t)]; }
  bool has_type(QuestionType t) const { return tally(t).total > 0; }
};

/// Builds metrics from predictions aligned with `samples`. Throws
/// std::out_of_range for an answer or prediction outside [0, n_answers).
Metrics compute_metrics(std::span<const VQASample> samples, std::span<const int> predictions,
                        std::size_t n_answers);

/// Argmax predictions in fixed-size chunks. Chunks may be spread over up to
/// RSAK_THREADS worker threads; results do not depend on the thread count.
std::vector<int> predict(const model::Model& model, std::span<const VQASample> samples,
                         std::size_t chunk = 250);

Metrics evaluate(const model::Model& model, std::span<const VQASample> samples);
/// Applies `scenario` to a copy of `samples` (with `seed` for image swaps) before evaluating.
Metrics evaluate(const model::Model& model, const Dataset& samples, Scenario scenario,
                 std::uint64_t seed);

/// Tab-separated summary lines: one per question type present, then AA and OA.
std::string format_metrics(const Metrics& m);

}  // namespace rsak::data
