#include "rsak/data/generator.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rsak/numerics/rng.hpp"

namespace rsak::data {

std::optional<int> Vocab::word_id(std::string_view word) const {
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i] == word) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> Vocab::answer_id(std::string_view answer) const {
  for (std::size_t i = 0; i < answers.size(); ++i)
    if (answers[i] == answer) return static_cast<int>(i);
  return std::nullopt;
}

std::vector<int> Vocab::encode(std::string_view question) const {
  std::vector<int> out;
  std::istringstream is{std::string(question)};
  std::string word;
  while (is >> word) {
    auto id = word_id(word);
    if (!id) throw std::invalid_argument("word '" + word + "' is not in the vocabulary");
    out.push_back(*id);
  }
  return out;
}

std::string Vocab::decode(std::span<const int> tokens) const {
  std::string out;
  for (int t : tokens) {
    if (t == 0) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= words.size())
      throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary");
    if (!out.empty()) out += ' ';
    out += words[static_cast<std::size_t>(t)];
  }
  return out;
}

const Vocab& task_vocab() {
  static const Vocab vocab = [] {
    Vocab v;
    v.words = {"<pad>", "is", "there", "a", "how", "many", "are", "more", "than", "cell", "cells"};
    for (const Color& c : kPalette) v.words.emplace_back(c.name);
    v.answers = {"yes", "no"};
    for (int k = 0; k <= 6; ++k) v.answers.push_back(std::to_string(k));
    v.answers.insert(v.answers.end(), {"more", "fewer", "same"});
    return v;
  }();
  return vocab;
}

void TaskConfig::validate() const {
  if (n_colors < 2 || n_colors > kPalette.size())
    throw std::invalid_argument("task n_colors must lie in [2, " +
                                std::to_string(kPalette.size()) + "]");
  if (max_count < 1 || max_count > 6)
    throw std::invalid_argument("task max_count must lie in [1, 6] to fit the answer vocabulary");
  if (n_colors * max_count > side * side)
    throw std::invalid_argument("a " + std::to_string(side) + "x" + std::to_string(side) +
                                " grid cannot hold " + std::to_string(max_count) +
                                " cells of every color");
  if (comparison_margin < 1 || comparison_margin > max_count)
    throw std::invalid_argument("comparison_margin must lie in [1, max_count]");
}

namespace {

enum Answer : int { kYes = 0, kNo = 1, kZero = 2, kMore = 9, kFewer = 10, kSame = 11 };

struct Draft {
  std::vector<std::size_t> counts;
  QuestionType qtype;
  std::size_t c1 = 0, c2 = 0;
  int answer = 0;
};

std::size_t uniform_in(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

Draft draft(std::size_t i, Rng& rng, const TaskConfig& cfg) {
  Draft d;
  d.qtype = kQuestionTypes[i % 3];
  const std::size_t slot = i / 3;  // position within the type's own cycle
  d.counts.resize(cfg.n_colors);
  for (auto& c : d.counts) c = uniform_in(rng, 0, cfg.max_count);
  d.c1 = static_cast<std::size_t>(rng.below(cfg.n_colors));

  switch (d.qtype) {
    case QuestionType::presence: {
      const bool yes = slot % 2 == 0;
      d.counts[d.c1] = yes ? uniform_in(rng, 1, cfg.max_count) : 0;
      d.answer = yes ? kYes : kNo;
      break;
    }
    case QuestionType::count: {
      const std::size_t k = slot % (cfg.max_count + 1);
      d.counts[d.c1] = k;
      d.answer = kZero + static_cast<int>(k);
      break;
    }
    case QuestionType::comparison: {
      d.c2 = static_cast<std::size_t>(rng.below(cfg.n_colors - 1));
      if (d.c2 >= d.c1) ++d.c2;
      const int target = std::array{kMore, kFewer, kSame}[slot % 3];
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t a = 0; a <= cfg.max_count; ++a)
        for (std::size_t b = 0; b <= cfg.max_count; ++b) {
          const bool ok = target == kSame    ? a == b
                          : target == kMore ? a >= b + cfg.comparison_margin
                                            : b >= a + cfg.comparison_margin;
          if (ok) pairs.emplace_back(a, b);
        }
      const auto& [a, b] = pairs[static_cast<std::size_t>(rng.below(pairs.size()))];
      d.counts[d.c1] = a;
      d.counts[d.c2] = b;
      d.answer = target;
      break;
    }
  }
  return d;
}

std::string question_text(const Draft& d) {
  const std::string c1(kPalette[d.c1].name);
  switch (d.qtype) {
    case QuestionType::presence:
      return "is there a " + c1 + " cell";
    case QuestionType::count:
      return "how many " + c1 + " cells";
    case QuestionType::comparison:
      return "are there more " + c1 + " than " + std::string(kPalette[d.c2].name) + " cells";
  }
  return {};
}

Matrix paint(const std::vector<std::size_t>& counts, Rng& rng, std::size_t side) {
  const std::size_t cells = side * side;
  std::vector<std::size_t> pos(cells);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  for (std::size_t i = cells; i > 1; --i)
    std::swap(pos[i - 1], pos[static_cast<std::size_t>(rng.below(i))]);
  Matrix image(cells, 3);
  std::size_t next = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (std::size_t k = 0; k < counts[c]; ++k, ++next)
      for (std::size_t ch = 0; ch < 3; ++ch) image(pos[next], ch) = kPalette[c].rgb[ch];
  return image;
}

}  // namespace

Dataset generate(std::size_t n, std::uint64_t seed, const TaskConfig& cfg) {
  cfg.validate();
  if (n == 0) throw std::invalid_argument("generate: n must be positive");
  const Rng root = Rng(seed).child("generate");
  const Vocab& vocab = task_vocab();

  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.child(static_cast<std::uint64_t>(i));
    const Draft d = draft(i, rng, cfg);
    VQASample s;
    s.image = paint(d.counts, rng, cfg.side);
    s.tokens = vocab.encode(question_text(d));
    s.qtype = d.qtype;
    s.answer = d.answer;
    out.push_back(std::move(s));
  }
  Rng order = root.child("order");
  for (std::size_t i = out.size(); i > 1; --i)
    std::swap(out[i - 1], out[static_cast<std::size_t>(order.below(i))]);
  return out;
}

std::size_t count_color(const Matrix& image, std::size_t color) {
  const auto& rgb = kPalette.at(color).rgb;
  std::size_t n = 0;
  for (std::size_t r = 0; r < image.rows(); ++r)
    n += image(r, 0) == rgb[0] && image(r, 1) == rgb[1] && image(r, 2) == rgb[2];
  return n;
}

}  // namespace rsak::data
