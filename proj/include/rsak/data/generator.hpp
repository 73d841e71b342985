#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsak/data/sample.hpp"

namespace rsak::data {

/// Word and answer vocabularies. Word id 0 is the padding token.
struct Vocab {
  std::vector<std::string> words;
  std::vector<std::string> answers;

  std::optional<int> word_id(std::string_view word) const;
  std::optional<int> answer_id(std::string_view answer) const;
  /// Splits on spaces. Throws std::invalid_argument on an unknown word.
  std::vector<int> encode(std::string_view question) const;
  /// Space-joined words, padding omitted.
  std::string decode(std::span<const int> tokens) const;

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

struct Color {
  std::string_view name;
  std::array<double, 3> rgb;
};

/// Palette in vocabulary order. White overlaps every channel.
inline constexpr std::array<Color, 4> kPalette{{
    {"red", {1.0, 0.0, 0.0}},
    {"green", {0.0, 1.0, 0.0}},
    {"blue", {0.0, 0.0, 1.0}},
    {"white", {1.0, 1.0, 1.0}},
}};

/**
 * Grid-image VQA task.
 *
 * Each image is a side×side grid of RGB cells on black. Every color appears
 * between 0 and max_count times. Questions ask for presence, a count, or a
 * comparison between two colors.
 */
struct TaskConfig {
  std::size_t side = 8;
  std::size_t n_colors = 4;
  std::size_t max_count = 6;
  /// Comparison questions answered "more"/"fewer" differ by at least this many cells.
  std::size_t comparison_margin = 2;

  /// Throws std::invalid_argument when the request cannot be met: too few or
  /// too many colors, counts beyond the answer vocabulary, a grid too small to
  /// hold max_count cells of every color, or a margin no pair can reach.
  void validate() const;
};

/// Fixed vocabulary for the task; identical for every TaskConfig.
const Vocab& task_vocab();

/// Number of answer classes in task_vocab().
inline constexpr std::size_t kTaskAnswers = 12;
/// Longest question in tokens.
inline constexpr std::size_t kTaskMaxQuestionLength = 7;

/**
 * Deterministic dataset of n samples. Question types cycle so each type gets
 * n/3 samples (±1), and answers cycle within a type so every answer class of
 * that type is equally frequent (±1). The final order is shuffled.
 */
Dataset generate(std::size_t n, std::uint64_t seed, const TaskConfig& cfg = {});

/// Cell count of a palette color, by exact pixel match.
std::size_t count_color(const Matrix& image, std::size_t color);

}  // namespace rsak::data
