#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rsak/model/config.hpp"
#include "rsak/training/param_store.hpp"

namespace rsak::model {

enum class ParamGroup { embedding, backbone, adapter, adapter_scale, head };
enum class AdapterSite { msa, mlp };

struct TensorSpec {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  ParamGroup group;

  std::size_t size() const { return rows * cols; }
};

/// Head weights use fan-in scaling so the three stacked layers keep unit gain.
double head_init_std(std::size_t fan_in);

/// Every tensor the config implies, in name order. This is the single source
/// of truth for parameter names, shapes and counts.
std::vector<TensorSpec> parameter_layout(const ModelConfig& cfg);

ParamGroup param_group(std::string_view name);
std::string_view to_string(ParamGroup group);

std::string block_prefix(std::size_t layer);
std::string adapter_prefix(std::size_t layer, AdapterSite site);

/// Adapter tensor suffixes in training and folded form.
inline constexpr std::string_view kAdapterTensors[] = {
    "w_down", "b_down", "phi_down_w", "phi_down_b", "w_up", "b_up", "phi_up_w", "phi_up_b"};
inline constexpr std::string_view kPhiTensors[] = {"phi_down_w", "phi_down_b", "phi_up_w",
                                                   "phi_up_b"};
inline constexpr std::string_view kMergedTensors[] = {"w_down_rep", "b_down_rep", "w_up_rep",
                                                      "b_up_rep"};

/**
 * Allocates and initializes every tensor of `cfg`.
 *
 * Backbone and embedding weights are normal(0, cfg.init_std); head weights
 * use head_init_std; biases and layernorm shifts are zero; layernorm gains are
 * one. Adapters start as a no-op: W_down normal(0, cfg.init_std), W_up zero,
 * phi weights identity, phi biases zero, scale one. Each tensor draws from its
 * own name-keyed sub-stream.
 * Nothing is marked trainable.
 */
train::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace rsak::model
