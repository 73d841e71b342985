#pragma once

#include <string_view>

#include "rsak/model/config.hpp"
#include "rsak/model/layout.hpp"
#include "rsak/training/param_store.hpp"

namespace rsak::adapter {

/// Fine-tuning recipes. Each fixes both the adapter architecture and which
/// parameter groups are updated.
enum class TrainMode {
  linear_probe,        // head only, no adapters
  full_finetune,       // everything, no adapters
  rsadapter,           // rs adapters beside MSA and MLP, with scaling
  rsadapter_msa_only,  // rs adapter beside MSA only
  rsadapter_mlp_only,  // rs adapter beside MLP only
  adapter_plain,       // plain parallel adapters beside MSA and MLP, with scaling
};

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);

/// Applies the architecture implied by `mode` to `base` (placement, variant,
/// scaling). Width, depth, d', skip flag and layer mask come from `base`.
model::ModelConfig configure_for_mode(model::ModelConfig base, TrainMode mode);

bool is_trainable(model::ParamGroup group, TrainMode mode);

/// Sets every parameter's trainable flag according to `mode`.
void build_freeze_mask(TrainMode mode, train::ParamStore& store);

/// Number of elements `mode` would train for `cfg`, computed from the layout
/// without allocating any tensors.
std::size_t tunable_count(const model::ModelConfig& cfg, TrainMode mode);

}  // namespace rsak::adapter
