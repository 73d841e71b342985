#include "rsak/model/layout.hpp"

#include <cmath>

#include <algorithm>

#include "rsak/numerics/rng.hpp"

namespace rsak::model {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_bias(std::string_view name) {
  const std::string_view leaf = name.substr(name.rfind('.') + 1);
  return leaf == "beta" || leaf.starts_with("b_") || leaf.ends_with("_b") ||
         leaf == "b1" || leaf == "b2" || leaf == "b3";
}

void add_adapter_specs(std::vector<TensorSpec>& out, const ModelConfig& cfg, std::size_t layer,
                       AdapterSite site) {
  const std::string p = adapter_prefix(layer, site);
  const std::size_t d = cfg.d;
  const std::size_t dp = cfg.d_prime;
  if (cfg.merged) {
    out.push_back({p + "w_down_rep", d, dp, ParamGroup::adapter});
    out.push_back({p + "b_down_rep", 1, dp, ParamGroup::adapter});
    out.push_back({p + "w_up_rep", dp, d, ParamGroup::adapter});
    out.push_back({p + "b_up_rep", 1, d, ParamGroup::adapter});
  } else {
    out.push_back({p + "w_down", d, dp, ParamGroup::adapter});
    out.push_back({p + "b_down", 1, dp, ParamGroup::adapter});
    out.push_back({p + "w_up", dp, d, ParamGroup::adapter});
    out.push_back({p + "b_up", 1, d, ParamGroup::adapter});
    if (cfg.adapter_variant == AdapterVariant::rs) {
      out.push_back({p + "phi_down_w", dp, dp, ParamGroup::adapter});
      out.push_back({p + "phi_down_b", 1, dp, ParamGroup::adapter});
      out.push_back({p + "phi_up_w", d, d, ParamGroup::adapter});
      out.push_back({p + "phi_up_b", 1, d, ParamGroup::adapter});
    }
  }
  if (cfg.scaling_enabled) out.push_back({p + "scale", 1, 1, ParamGroup::adapter_scale});
}

}  // namespace

std::string block_prefix(std::size_t layer) { return "blocks." + std::to_string(layer) + "."; }

std::string adapter_prefix(std::size_t layer, AdapterSite site) {
  return block_prefix(layer) + (site == AdapterSite::msa ? "msa_adapter." : "mlp_adapter.");
}

std::vector<TensorSpec> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d;
  std::vector<TensorSpec> out;
  out.push_back({"emb.token", cfg.vocab_size, d, ParamGroup::embedding});
  out.push_back({"emb.text_pos", cfg.text_rows(), d, ParamGroup::embedding});
  out.push_back({"emb.image_pos", cfg.image_rows(), d, ParamGroup::embedding});
  out.push_back({"emb.patch_proj", cfg.patch_dim(), d, ParamGroup::embedding});
  out.push_back({"emb.text_class", 1, d, ParamGroup::embedding});
  out.push_back({"emb.image_class", 1, d, ParamGroup::embedding});
  out.push_back({"emb.type", 2, d, ParamGroup::embedding});
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = block_prefix(l);
    out.push_back({p + "ln1.gamma", 1, d, ParamGroup::backbone});
    out.push_back({p + "ln1.beta", 1, d, ParamGroup::backbone});
    out.push_back({p + "attn.wq", d, d, ParamGroup::backbone});
    out.push_back({p + "attn.wk", d, d, ParamGroup::backbone});
    out.push_back({p + "attn.wv", d, d, ParamGroup::backbone});
    out.push_back({p + "attn.wo", d, d, ParamGroup::backbone});
    out.push_back({p + "ln2.gamma", 1, d, ParamGroup::backbone});
    out.push_back({p + "ln2.beta", 1, d, ParamGroup::backbone});
    out.push_back({p + "mlp.w1", d, cfg.mlp_hidden(), ParamGroup::backbone});
    out.push_back({p + "mlp.b1", 1, cfg.mlp_hidden(), ParamGroup::backbone});
    out.push_back({p + "mlp.w2", cfg.mlp_hidden(), d, ParamGroup::backbone});
    out.push_back({p + "mlp.b2", 1, d, ParamGroup::backbone});
    if (cfg.has_msa_adapter(l)) add_adapter_specs(out, cfg, l, AdapterSite::msa);
    if (cfg.has_mlp_adapter(l)) add_adapter_specs(out, cfg, l, AdapterSite::mlp);
  }
  const std::size_t h = cfg.head_hidden;
  out.push_back({"head.w1", d, h, ParamGroup::head});
  out.push_back({"head.b1", 1, h, ParamGroup::head});
  out.push_back({"head.w2", h, h, ParamGroup::head});
  out.push_back({"head.b2", 1, h, ParamGroup::head});
  out.push_back({"head.w3", h, cfg.n_answers, ParamGroup::head});
  out.push_back({"head.b3", 1, cfg.n_answers, ParamGroup::head});
  std::sort(out.begin(), out.end(),
            [](const TensorSpec& a, const TensorSpec& b) { return a.name < b.name; });
  return out;
}

ParamGroup param_group(std::string_view name) {
  if (name.starts_with("emb.")) return ParamGroup::embedding;
  if (name.starts_with("head.")) return ParamGroup::head;
  if (name.find("_adapter.") != std::string_view::npos) {
    return ends_with(name, ".scale") ? ParamGroup::adapter_scale : ParamGroup::adapter;
  }
  return ParamGroup::backbone;
}

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::embedding: return "embedding";
    case ParamGroup::backbone: return "backbone";
    case ParamGroup::adapter: return "adapter";
    case ParamGroup::adapter_scale: return "adapter_scale";
    case ParamGroup::head: return "head";
  }
  return "unknown";
}

double head_init_std(std::size_t fan_in) {
  return fan_in ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
}

train::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  const Rng root(seed);
  train::ParamStore store;
  for (const TensorSpec& spec : parameter_layout(cfg)) {
    const std::string_view name = spec.name;
    Matrix value(spec.rows, spec.cols);
    if (ends_with(name, ".gamma") || ends_with(name, ".scale")) {
      value.fill(1.0);
    } else if (ends_with(name, "phi_down_w") || ends_with(name, "phi_up_w")) {
      value = Matrix::identity(spec.rows);
    } else if (ends_with(name, "w_up") || ends_with(name, "w_up_rep")) {
      // zero up-projection keeps the inserted branch silent at step 0
    } else if (!is_bias(name)) {
      Rng rng = root.child(name);
      const double std = spec.group == ParamGroup::head ? head_init_std(spec.rows) : cfg.init_std;
      value = rng_normal(rng, spec.rows, spec.cols, std);
    }
    store.add(spec.name, std::move(value), false);
  }
  return store;
}

}  // namespace rsak::model
