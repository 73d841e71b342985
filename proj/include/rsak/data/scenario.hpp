#pragma once

#include <cstdint>
#include <string_view>

#include "rsak/data/sample.hpp"

namespace rsak::data {

/// Evaluation and training conditions for probing reliance on the image.
enum class Scenario {
  standard,            // inputs untouched
  question_only,       // every image replaced by zeros
  random_image_test,   // each test image swapped for another drawn from the same set
  random_image_train,  // the same swap, applied to the training set
};

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

/**
 * Returns a transformed copy. Only images change; tokens, types and answers
 * are preserved. Both random-image scenarios draw, per sample i, a uniform
 * index j != i (when the set has more than one sample) and copy image j.
 */
Dataset apply_scenario(const Dataset& samples, Scenario scenario, std::uint64_t seed);

/// The image index each sample receives under a random-image scenario.
std::vector<std::size_t> random_image_assignment(std::size_t n, std::uint64_t seed);

}  // namespace rsak::data
