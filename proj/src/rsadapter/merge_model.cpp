#include "rsak/rsadapter/merge_model.hpp"

#include "rsak/model/layout.hpp"

namespace rsak::adapter {

model::Model merge_model(const model::Model& source) {
  const model::ModelConfig& cfg = source.config();
  if (cfg.merged) throw NothingToMerge("nothing to merge: model is already merged");
  if (cfg.adapter_count() == 0) throw NothingToMerge("nothing to merge: model has no adapters");
  if (cfg.adapter_variant != model::AdapterVariant::rs)
    throw NothingToMerge("nothing to merge: plain adapters carry no linear transformations");

  model::ModelConfig merged_cfg = cfg;
  merged_cfg.merged = true;

  train::ParamStore store;
  for (const auto& [name, p] : source.params()) {
    if (model::param_group(name) == model::ParamGroup::adapter) continue;
    store.add(name, p.value, p.trainable);
  }

  auto fold = [&](std::size_t layer, model::AdapterSite site,
                  const std::optional<AdapterWeights>& w) {
    if (!w) return;
    const MergedAdapter m = merge(*w);
    const std::string prefix = model::adapter_prefix(layer, site);
    const bool trainable = source.params().at(prefix + "w_down").trainable;
    store.add(prefix + "w_down_rep", m.w_down_rep, trainable);
    store.add(prefix + "b_down_rep", m.b_down_rep, trainable);
    store.add(prefix + "w_up_rep", m.w_up_rep, trainable);
    store.add(prefix + "b_up_rep", m.b_up_rep, trainable);
  };
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const model::BlockWeights b = source.block(l);
    fold(l, model::AdapterSite::msa, b.msa_adapter);
    fold(l, model::AdapterSite::mlp, b.mlp_adapter);
  }
  return model::Model(merged_cfg, std::move(store));
}

}  // namespace rsak::adapter
