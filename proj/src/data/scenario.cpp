#include "rsak/data/scenario.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <utility>

#include "rsak/numerics/rng.hpp"

namespace rsak::data {
namespace {

constexpr std::array<std::pair<Scenario, std::string_view>, 4> kNames{{
    {Scenario::standard, "standard"},
    {Scenario::question_only, "question_only"},
    {Scenario::random_image_test, "random_image_test"},
    {Scenario::random_image_train, "random_image_train"},
}};

}  // namespace

std::string_view to_string(Scenario s) {
  for (const auto& [v, name] : kNames)
    if (v == s) return name;
  return "unknown";
}

Scenario parse_scenario(std::string_view text) {
  for (const auto& [v, name] : kNames)
    if (name == text) return v;
  throw std::invalid_argument("unknown scenario '" + std::string(text) + "'");
}

std::vector<std::size_t> random_image_assignment(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng(seed).child("random_image");
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (n < 2) {
      out[i] = i;
      continue;
    }
    // Uniform over the n-1 other indices.
    std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
    out[i] = j >= i ? j + 1 : j;
  }
  return out;
}

Dataset apply_scenario(const Dataset& samples, Scenario scenario, std::uint64_t seed) {
  Dataset out = samples;
  switch (scenario) {
    case Scenario::standard:
      break;
    case Scenario::question_only:
      for (VQASample& s : out) s.image.fill(0.0);
      break;
    case Scenario::random_image_test:
    case Scenario::random_image_train: {
      const auto assign = random_image_assignment(samples.size(), seed);
      for (std::size_t i = 0; i < out.size(); ++i) out[i].image = samples[assign[i]].image;
      break;
    }
  }
  return out;
}

}  // namespace rsak::data
