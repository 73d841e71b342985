#include "rsak/rsadapter/param_count.hpp"

namespace rsak::adapter {

ParamBreakdown param_count(const model::ModelConfig& cfg_in, Phase phase) {
  model::ModelConfig cfg = cfg_in;
  if (cfg.d_prime == 0) cfg.adapter_mode = model::AdapterMode::none;
  cfg.merged = false;
  cfg.validate();

  const std::size_t d = cfg.d;
  const std::size_t dp = cfg.d_prime;
  const std::size_t h = cfg.head_hidden;

  ParamBreakdown out;
  out.phase = phase;
  out.adapter_count = cfg.adapter_count();
  out.embedding = cfg.vocab_size * d + cfg.text_rows() * d + cfg.image_rows() * d +
                  cfg.patch_dim() * d + 2 * d + 2 * d;
  const std::size_t per_block = 2 * d + 4 * d * d + 2 * d + d * cfg.mlp_hidden() +
                                cfg.mlp_hidden() + cfg.mlp_hidden() * d + d;
  out.backbone = cfg.n_layers * per_block;
  out.head = d * h + h + h * h + h + h * cfg.n_answers + cfg.n_answers;
  out.scales = cfg.scaling_enabled ? out.adapter_count : 0;

  if (out.adapter_count > 0) {
    const std::size_t fc = 2 * d * dp + d + dp;
    const bool has_phi = cfg.adapter_variant == model::AdapterVariant::rs;
    out.per_adapter_phi = (phase == Phase::train && has_phi) ? dp * dp + d * d + dp + d : 0;
    out.per_adapter_exact = fc + out.per_adapter_phi;
    out.per_adapter_closed_form = phase == Phase::train ? 2 * (d * dp) + 2 * (d + dp) : 2 * d * dp;
    out.adapters_exact = out.adapter_count * out.per_adapter_exact;
  }
  return out;
}

}  // namespace rsak::adapter
