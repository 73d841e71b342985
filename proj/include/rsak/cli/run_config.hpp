#pragma once

#include <filesystem>
#include <string>

#include "rsak/data/scenario.hpp"
#include "rsak/model/config.hpp"
#include "rsak/rsadapter/freeze.hpp"
#include "rsak/training/trainer.hpp"

namespace rsak::cli {

/**
 * Everything a run needs, read from a JSON file with sections:
 *
 *   model:    d, n_layers, n_heads, d_prime, vocab_size, max_text_len,
 *             image_side, patch_grid, patch_channels, n_answers, head_hidden, init_std,
 *             skip_connection_in_adapter, adapter_layer_mask
 *   train:    epochs, batch_size, warmup_epochs, warmup_lr, base_lr,
 *             adam_beta1, adam_beta2, adam_eps, seed
 *   data:     train, test (paths, relative to the config file)
 *   mode:     linear_probe | full_finetune | rsadapter | rsadapter_msa_only |
 *             rsadapter_mlp_only | adapter_plain
 *   scenario: standard | question_only | random_image_test | random_image_train
 *
 * Every key is required and unknown keys are rejected. Adapter placement,
 * variant and scaling follow from `mode`.
 */
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  std::filesystem::path train_data;
  std::filesystem::path test_data;
  adapter::TrainMode mode = adapter::TrainMode::rsadapter;
  data::Scenario scenario = data::Scenario::standard;

  /// The model architecture after applying `mode`.
  model::ModelConfig resolved_model() const { return adapter::configure_for_mode(model, mode); }
};

/// Throws model::ConfigError naming the offending key.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Inverse of parse_run_config (paths written as given).
std::string dump_run_config(const RunConfig& cfg);

}  // namespace rsak::cli
