#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rsak::model {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Where adapters sit inside each block.
enum class AdapterMode {
  none,
  sequential_msa,
  sequential_mlp,
  parallel_msa,
  parallel_mlp,
  parallel_both,
};

/// plain: f(xW+b)W+b bottleneck. rs: linear transformation after each FC layer.
enum class AdapterVariant { plain, rs };

std::string_view to_string(AdapterMode mode);
std::string_view to_string(AdapterVariant variant);
AdapterMode parse_adapter_mode(std::string_view text);
AdapterVariant parse_adapter_variant(std::string_view text);

/// Vocabulary id 0 is reserved for padding text positions.
inline constexpr int kPadTokenId = 0;

/// Default std of the random backbone and adapter down-projection weights.
inline constexpr double kDefaultInitStd = 0.02;

struct ModelConfig {
  std::size_t d = 64;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_prime = 16;
  std::size_t vocab_size = 32;
  std::size_t max_text_len = 8;
  std::size_t image_side = 8;
  std::size_t patch_grid = 4;
  std::size_t patch_channels = 3;
  std::size_t n_answers = 12;
  std::size_t head_hidden = 64;
  /// Std of the normal init for backbone weights and adapter down-projections.
  /// Head weights use a fan-in scale instead.
  double init_std = kDefaultInitStd;
  AdapterMode adapter_mode = AdapterMode::parallel_both;
  AdapterVariant adapter_variant = AdapterVariant::rs;
  bool skip_connection_in_adapter = false;
  bool scaling_enabled = true;
  /// One flag per layer; empty means every layer.
  std::vector<bool> adapter_layer_mask;
  /// Adapters are stored in folded (inference) form.
  bool merged = false;

  void validate() const;

  std::size_t head_dim() const { return d / n_heads; }
  std::size_t n_visual() const { return patch_grid * patch_grid; }
  std::size_t patch_side() const { return image_side / patch_grid; }
  std::size_t patch_dim() const { return patch_side() * patch_side() * patch_channels; }
  std::size_t text_rows() const { return max_text_len + 1; }
  std::size_t image_rows() const { return n_visual() + 1; }
  std::size_t n_tokens() const { return text_rows() + image_rows(); }
  std::size_t mlp_hidden() const { return 4 * d; }

  bool layer_has_adapters(std::size_t layer) const;
  bool has_msa_adapter(std::size_t layer) const;
  bool has_mlp_adapter(std::size_t layer) const;
  bool parallel() const;
  std::size_t adapter_count() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace rsak::model
