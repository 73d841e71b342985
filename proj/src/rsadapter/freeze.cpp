#include "rsak/rsadapter/freeze.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <utility>

namespace rsak::adapter {
namespace {

constexpr std::array<std::pair<TrainMode, std::string_view>, 6> kModes{{
    {TrainMode::linear_probe, "linear_probe"},
    {TrainMode::full_finetune, "full_finetune"},
    {TrainMode::rsadapter, "rsadapter"},
    {TrainMode::rsadapter_msa_only, "rsadapter_msa_only"},
    {TrainMode::rsadapter_mlp_only, "rsadapter_mlp_only"},
    {TrainMode::adapter_plain, "adapter_plain"},
}};

}  // namespace

std::string_view to_string(TrainMode mode) {
  for (const auto& [m, name] : kModes)
    if (m == mode) return name;
  return "unknown";
}

TrainMode parse_train_mode(std::string_view text) {
  for (const auto& [m, name] : kModes)
    if (name == text) return m;
  throw std::invalid_argument("unknown train mode '" + std::string(text) + "'");
}

model::ModelConfig configure_for_mode(model::ModelConfig cfg, TrainMode mode) {
  using model::AdapterMode;
  using model::AdapterVariant;
  cfg.merged = false;
  switch (mode) {
    case TrainMode::linear_probe:
    case TrainMode::full_finetune:
      cfg.adapter_mode = AdapterMode::none;
      break;
    case TrainMode::rsadapter:
      cfg.adapter_mode = AdapterMode::parallel_both;
      cfg.adapter_variant = AdapterVariant::rs;
      cfg.scaling_enabled = true;
      break;
    case TrainMode::rsadapter_msa_only:
      cfg.adapter_mode = AdapterMode::parallel_msa;
      cfg.adapter_variant = AdapterVariant::rs;
      cfg.scaling_enabled = false;
      break;
    case TrainMode::rsadapter_mlp_only:
      cfg.adapter_mode = AdapterMode::parallel_mlp;
      cfg.adapter_variant = AdapterVariant::rs;
      cfg.scaling_enabled = false;
      break;
    case TrainMode::adapter_plain:
      cfg.adapter_mode = AdapterMode::parallel_both;
      cfg.adapter_variant = AdapterVariant::plain;
      cfg.scaling_enabled = true;
      break;
  }
  return cfg;
}

bool is_trainable(model::ParamGroup group, TrainMode mode) {
  using model::ParamGroup;
  switch (mode) {
    case TrainMode::linear_probe:
      return group == ParamGroup::head;
    case TrainMode::full_finetune:
      return true;
    default:
      return group == ParamGroup::head || group == ParamGroup::adapter ||
             group == ParamGroup::adapter_scale;
  }
}

void build_freeze_mask(TrainMode mode, train::ParamStore& store) {
  for (auto& [name, p] : store) p.trainable = is_trainable(model::param_group(name), mode);
}

std::size_t tunable_count(const model::ModelConfig& cfg, TrainMode mode) {
  std::size_t n = 0;
  for (const auto& spec : model::parameter_layout(cfg))
    if (is_trainable(spec.group, mode)) n += spec.size();
  return n;
}

}  // namespace rsak::adapter
