#pragma once

#include <string_view>
#include <vector>

#include "rsak/numerics/matrix.hpp"

namespace rsak::data {

enum class QuestionType { presence, count, comparison };

inline constexpr QuestionType kQuestionTypes[] = {QuestionType::presence, QuestionType::count,
                                                   QuestionType::comparison};

std::string_view to_string(QuestionType qtype);
/// Throws std::invalid_argument for anything but the three names.
QuestionType parse_question_type(std::string_view text);

/**
 * One image-question-answer triplet.
 *
 * `image` has one row per grid cell (row-major over the grid) and one column
 * per channel, with values in [0, 1].
 */
struct VQASample {
  Matrix image;
  std::vector<int> tokens;
  QuestionType qtype = QuestionType::presence;
  int answer = 0;

  friend bool operator==(const VQASample&, const VQASample&) = default;
};

using Dataset = std::vector<VQASample>;

}  // namespace rsak::data
