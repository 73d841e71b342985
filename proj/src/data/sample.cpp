#include "rsak/data/sample.hpp"

#include <stdexcept>
#include <string>

namespace rsak::data {

std::string_view to_string(QuestionType qtype) {
  switch (qtype) {
    case QuestionType::presence: return "presence";
    case QuestionType::count: return "count";
    case QuestionType::comparison: return "comparison";
  }
  return "unknown";
}

QuestionType parse_question_type(std::string_view text) {
  for (QuestionType q : kQuestionTypes)
    if (to_string(q) == text) return q;
  throw std::invalid_argument("unknown question type '" + std::string(text) + "'");
}

}  // namespace rsak::data
