#include "rsak/model/config.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace rsak::model {
namespace {

constexpr std::array<std::pair<AdapterMode, std::string_view>, 6> kModes{{
    {AdapterMode::none, "none"},
    {AdapterMode::sequential_msa, "sequential_msa"},
    {AdapterMode::sequential_mlp, "sequential_mlp"},
    {AdapterMode::parallel_msa, "parallel_msa"},
    {AdapterMode::parallel_mlp, "parallel_mlp"},
    {AdapterMode::parallel_both, "parallel_both"},
}};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view to_string(AdapterMode mode) {
  for (const auto& [m, name] : kModes)
    if (m == mode) return name;
  return "unknown";
}

std::string_view to_string(AdapterVariant variant) {
  return variant == AdapterVariant::plain ? "plain" : "rs";
}

AdapterMode parse_adapter_mode(std::string_view text) {
  for (const auto& [m, name] : kModes)
    if (name == text) return m;
  throw ConfigError("unknown adapter_mode '" + std::string(text) + "'");
}

AdapterVariant parse_adapter_variant(std::string_view text) {
  if (text == "plain") return AdapterVariant::plain;
  if (text == "rs") return AdapterVariant::rs;
  throw ConfigError("unknown adapter_variant '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  require(d > 0, "d must be positive");
  require(n_layers > 0, "n_layers must be positive");
  require(n_heads > 0 && d % n_heads == 0,
          "d (" + std::to_string(d) + ") must be divisible by n_heads (" +
              std::to_string(n_heads) + ")");
  require(vocab_size > 1, "vocab_size must leave room for the pad id");
  require(patch_grid > 0 && image_side % patch_grid == 0,
          "image_side (" + std::to_string(image_side) + ") must be divisible by patch_grid (" +
              std::to_string(patch_grid) + ")");
  require(patch_channels > 0, "patch_channels must be positive");
  require(n_answers > 0, "n_answers must be positive");
  require(head_hidden > 0, "head_hidden must be positive");
  require(std::isfinite(init_std) && init_std >= 0.0, "init_std must be finite and non-negative");
  require(adapter_layer_mask.empty() || adapter_layer_mask.size() == n_layers,
          "adapter_layer_mask length " + std::to_string(adapter_layer_mask.size()) +
              " does not match n_layers " + std::to_string(n_layers));
  require(adapter_mode == AdapterMode::none || d_prime >= 1,
          "d_prime must be at least 1 when adapters are enabled");
  require(!(merged && adapter_variant == AdapterVariant::plain),
          "only rs adapters have a merged form");
  require(!(merged && adapter_mode == AdapterMode::none), "merged model without adapters");
}

bool ModelConfig::layer_has_adapters(std::size_t layer) const {
  if (adapter_mode == AdapterMode::none) return false;
  return adapter_layer_mask.empty() || adapter_layer_mask.at(layer);
}

bool ModelConfig::has_msa_adapter(std::size_t layer) const {
  switch (adapter_mode) {
    case AdapterMode::sequential_msa:
    case AdapterMode::parallel_msa:
    case AdapterMode::parallel_both:
      return layer_has_adapters(layer);
    default:
      return false;
  }
}

bool ModelConfig::has_mlp_adapter(std::size_t layer) const {
  switch (adapter_mode) {
    case AdapterMode::sequential_mlp:
    case AdapterMode::parallel_mlp:
    case AdapterMode::parallel_both:
      return layer_has_adapters(layer);
    default:
      return false;
  }
}

bool ModelConfig::parallel() const {
  return adapter_mode == AdapterMode::parallel_msa || adapter_mode == AdapterMode::parallel_mlp ||
         adapter_mode == AdapterMode::parallel_both;
}

std::size_t ModelConfig::adapter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    n += has_msa_adapter(l) ? 1 : 0;
    n += has_mlp_adapter(l) ? 1 : 0;
  }
  return n;
}

}  // namespace rsak::model
