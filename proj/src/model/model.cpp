#include "rsak/model/model.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace rsak::model {
namespace {

using adapter::AdapterCache;
using adapter::AdapterWeights;
using adapter::MergedAdapter;

Matrix* grad_sink(train::Param* p) { return p != nullptr && p->trainable ? &p->grad : nullptr; }

enum class Site { msa, mlp };

bool site_has_adapter(const BlockWeights& w, Site site) {
  return site == Site::msa ? (w.msa_adapter || w.msa_merged) : (w.mlp_adapter || w.mlp_merged);
}

double site_scale(const BlockWeights& w, Site site) {
  if (site == Site::msa) return w.msa_adapter ? w.msa_adapter->scale : w.msa_merged->scale;
  return w.mlp_adapter ? w.mlp_adapter->scale : w.mlp_merged->scale;
}

Matrix run_adapter(const Matrix& input, const BlockWeights& w, Site site, const ModelConfig& cfg,
                   AdapterCache* cache) {
  const auto& rs = site == Site::msa ? w.msa_adapter : w.mlp_adapter;
  const auto& merged = site == Site::msa ? w.msa_merged : w.mlp_merged;
  if (rs) {
    return adapter::adapter_forward(input, *rs, cfg.adapter_variant,
                                    cfg.skip_connection_in_adapter, cache);
  }
  return adapter::merged_forward(input, *merged, cfg.skip_connection_in_adapter);
}

// Applies one residual sub-block (MSA or MLP with its optional adapter).
// `normed` is LN(x) and `sublayer` is g(LN(x)); returns the updated stream.
Matrix residual_update(const Matrix& x, const Matrix& normed, const Matrix& sublayer,
                       const BlockWeights& w, Site site, const ModelConfig& cfg,
                       AdapterCache* adapter_cache, Matrix* branch_out) {
  Matrix out = x;
  if (!site_has_adapter(w, site)) {
    out += sublayer;
    return out;
  }
  const double s = site_scale(w, site);
  if (cfg.parallel()) {
    Matrix branch = run_adapter(normed, w, site, cfg, adapter_cache);
    out += sublayer;
    out += scaled(branch, s);
    if (branch_out != nullptr) *branch_out = std::move(branch);
  } else {
    Matrix branch = run_adapter(sublayer, w, site, cfg, adapter_cache);
    out += scaled(branch, s);
    if (branch_out != nullptr) *branch_out = std::move(branch);
  }
  return out;
}

Matrix block_forward_stacked(const Matrix& x, const BlockWeights& w, const ModelConfig& cfg,
                             std::size_t seq_len, BlockCache* cache) {
  LayerNormCache* ln1 = cache ? &cache->ln1 : nullptr;
  LayerNormCache* ln2 = cache ? &cache->ln2 : nullptr;
  const Matrix z1 = layernorm(x, w.ln1_gamma, w.ln1_beta, ln1);
  Matrix a = msa_forward_stacked(z1, w.attention, cfg.n_heads, seq_len,
                                 cache ? &cache->attention : nullptr);
  Matrix x1 = residual_update(x, z1, a, w, Site::msa, cfg, cache ? &cache->msa_adapter : nullptr,
                              cache ? &cache->msa_branch : nullptr);
  const Matrix z2 = layernorm(x1, w.ln2_gamma, w.ln2_beta, ln2);
  Matrix m = mlp_forward(z2, w.mlp, cache ? &cache->mlp : nullptr);
  Matrix x2 = residual_update(x1, z2, m, w, Site::mlp, cfg, cache ? &cache->mlp_adapter : nullptr,
                              cache ? &cache->mlp_branch : nullptr);
  if (cache != nullptr) {
    cache->msa_out = std::move(a);
    cache->mlp_out = std::move(m);
  }
  return x2;
}

void require_layout(const ModelConfig& cfg, const train::ParamStore& store) {
  const auto layout = parameter_layout(cfg);
  std::set<std::string, std::less<>> expected;
  for (const auto& spec : layout) {
    expected.insert(spec.name);
    const train::Param* p = store.find(spec.name);
    if (p == nullptr) throw ConfigError("parameter '" + spec.name + "' missing for this config");
    if (p->value.rows() != spec.rows || p->value.cols() != spec.cols) {
      throw ConfigError("parameter '" + spec.name + "' has shape " + shape_string(p->value) +
                        ", config expects (" + std::to_string(spec.rows) + "x" +
                        std::to_string(spec.cols) + ")");
    }
  }
  for (const auto& [name, p] : store) {
    if (!expected.contains(name)) {
      throw ConfigError("parameter '" + name + "' is not part of this config");
    }
  }
}

}  // namespace

Matrix block_forward(const Matrix& x, const BlockWeights& w, const ModelConfig& cfg) {
  return block_forward_stacked(x, w, cfg, x.rows(), nullptr);
}

Model::Model(ModelConfig cfg, train::ParamStore params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  require_layout(cfg_, params_);
  bind();
}

Model::Model(const Model& other) : cfg_(other.cfg_), params_(other.params_) { bind(); }

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    cfg_ = other.cfg_;
    params_ = other.params_;
    bind();
  }
  return *this;
}

Model::Model(Model&& other) noexcept
    : cfg_(std::move(other.cfg_)), params_(std::move(other.params_)) {
  bind();
}

Model& Model::operator=(Model&& other) noexcept {
  cfg_ = std::move(other.cfg_);
  params_ = std::move(other.params_);
  bind();
  return *this;
}

Model Model::initialize(const ModelConfig& cfg, std::uint64_t seed) {
  return Model(cfg, init_params(cfg, seed));
}

void Model::bind() {
  auto get = [this](const std::string& name) { return &params_.at(name); };
  emb_ = {get("emb.token"),      get("emb.text_pos"),    get("emb.image_pos"),
          get("emb.patch_proj"), get("emb.text_class"),  get("emb.image_class"),
          get("emb.type")};
  blocks_.clear();
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    const std::string p = block_prefix(l);
    BlockParams b{};
    b.ln1_gamma = get(p + "ln1.gamma");
    b.ln1_beta = get(p + "ln1.beta");
    b.wq = get(p + "attn.wq");
    b.wk = get(p + "attn.wk");
    b.wv = get(p + "attn.wv");
    b.wo = get(p + "attn.wo");
    b.ln2_gamma = get(p + "ln2.gamma");
    b.ln2_beta = get(p + "ln2.beta");
    b.w1 = get(p + "mlp.w1");
    b.b1 = get(p + "mlp.b1");
    b.w2 = get(p + "mlp.w2");
    b.b2 = get(p + "mlp.b2");
    if (cfg_.has_msa_adapter(l)) b.msa = bind_adapter(l, AdapterSite::msa);
    if (cfg_.has_mlp_adapter(l)) b.mlp = bind_adapter(l, AdapterSite::mlp);
    blocks_.push_back(b);
  }
  head_ = {get("head.w1"), get("head.b1"), get("head.w2"),
           get("head.b2"), get("head.w3"), get("head.b3")};
}

Model::AdapterSlot Model::bind_adapter(std::size_t layer, AdapterSite site) {
  const std::string p = adapter_prefix(layer, site);
  AdapterSlot slot;
  slot.present = true;
  if (cfg_.merged) {
    for (auto leaf : kMergedTensors) slot.merged.push_back(&params_.at(p + std::string(leaf)));
  } else {
    for (auto leaf : kAdapterTensors) slot.tensors.push_back(params_.find(p + std::string(leaf)));
  }
  slot.scale = params_.find(p + "scale");
  return slot;
}

std::optional<AdapterWeights> Model::adapter_weights(const AdapterSlot& slot) const {
  if (!slot.present || cfg_.merged) return std::nullopt;
  AdapterWeights w;
  Matrix* fields[] = {&w.w_down, &w.b_down, &w.phi_down_w, &w.phi_down_b,
                      &w.w_up,   &w.b_up,   &w.phi_up_w,   &w.phi_up_b};
  for (std::size_t i = 0; i < slot.tensors.size(); ++i) {
    if (slot.tensors[i] != nullptr) *fields[i] = slot.tensors[i]->value;
  }
  w.scale = slot.scale != nullptr ? slot.scale->value(0, 0) : 1.0;
  return w;
}

std::optional<MergedAdapter> Model::merged_weights(const AdapterSlot& slot) const {
  if (!slot.present || !cfg_.merged) return std::nullopt;
  MergedAdapter m{slot.merged[0]->value, slot.merged[1]->value, slot.merged[2]->value,
                  slot.merged[3]->value, 1.0};
  m.scale = slot.scale != nullptr ? slot.scale->value(0, 0) : 1.0;
  return m;
}

EmbeddingWeights Model::embedding() const {
  return {emb_.token->value,      emb_.text_pos->value,    emb_.image_pos->value,
          emb_.patch_proj->value, emb_.text_class->value,  emb_.image_class->value,
          emb_.type->value};
}

BlockWeights Model::block(std::size_t layer) const {
  const BlockParams& b = blocks_.at(layer);
  return BlockWeights{
      b.ln1_gamma->value,
      b.ln1_beta->value,
      {b.wq->value, b.wk->value, b.wv->value, b.wo->value},
      b.ln2_gamma->value,
      b.ln2_beta->value,
      {b.w1->value, b.b1->value, b.w2->value, b.b2->value},
      adapter_weights(b.msa),
      adapter_weights(b.mlp),
      merged_weights(b.msa),
      merged_weights(b.mlp),
  };
}

Matrix Model::embed(std::span<const data::VQASample> batch) const {
  const std::size_t t = cfg_.n_tokens();
  const EmbeddingWeights w = embedding();
  Matrix x(batch.size() * t, cfg_.d);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Matrix text = embed_text(batch[b].tokens, cfg_, w);
    const Matrix image = embed_image(batch[b].image, cfg_, w);
    set_block(x, b * t, 0, fuse(text, image, w));
  }
  return x;
}

Matrix Model::run_blocks(Matrix x, std::size_t batch, Tape* tape,
                         std::vector<std::vector<Matrix>>* final_attention) const {
  const std::size_t t = cfg_.n_tokens();
  if (tape != nullptr) tape->blocks.assign(cfg_.n_layers, BlockCache{});
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    const bool last = l + 1 == cfg_.n_layers;
    BlockCache scratch;
    BlockCache* cache = tape != nullptr ? &tape->blocks[l]
                        : (last && final_attention != nullptr) ? &scratch
                                                               : nullptr;
    x = block_forward_stacked(x, block(l), cfg_, t, cache);
    if (last && final_attention != nullptr) {
      final_attention->assign(batch, {});
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
          (*final_attention)[b].push_back(cache->attention.probs[b * cfg_.n_heads + h]);
        }
      }
    }
  }
  return x;
}

Matrix Model::class_rows(const Matrix& x, std::size_t batch) const {
  const std::size_t t = cfg_.n_tokens();
  Matrix out(batch, cfg_.d);
  for (std::size_t b = 0; b < batch; ++b) set_block(out, b, 0, row_block(x, b * t, 1));
  return out;
}

Matrix Model::head_forward(const Matrix& class_tokens, HeadCache* cache) const {
  Matrix pre1 = matmul(class_tokens, head_.w1->value);
  add_row_broadcast(pre1, head_.b1->value);
  Matrix act1 = gelu(pre1);
  Matrix pre2 = matmul(act1, head_.w2->value);
  add_row_broadcast(pre2, head_.b2->value);
  Matrix act2 = gelu(pre2);
  Matrix logits = matmul(act2, head_.w3->value);
  add_row_broadcast(logits, head_.b3->value);
  if (cache != nullptr) {
    cache->input = class_tokens;
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->pre2 = std::move(pre2);
    cache->act2 = std::move(act2);
  }
  return logits;
}

Matrix Model::head_backward(const HeadCache& cache, const Matrix& dlogits) {
  if (auto* g = grad_sink(head_.w3)) matmul_tn_add(*g, cache.act2, dlogits);
  if (auto* g = grad_sink(head_.b3)) column_sums_add(*g, dlogits);
  Matrix dpre2 = hadamard(matmul_nt(dlogits, head_.w3->value), gelu_grad(cache.pre2));
  if (auto* g = grad_sink(head_.w2)) matmul_tn_add(*g, cache.act1, dpre2);
  if (auto* g = grad_sink(head_.b2)) column_sums_add(*g, dpre2);
  Matrix dpre1 = hadamard(matmul_nt(dpre2, head_.w2->value), gelu_grad(cache.pre1));
  if (auto* g = grad_sink(head_.w1)) matmul_tn_add(*g, cache.input, dpre1);
  if (auto* g = grad_sink(head_.b1)) column_sums_add(*g, dpre1);
  return matmul_nt(dpre1, head_.w1->value);
}

Matrix Model::encode(std::span<const data::VQASample> batch) const {
  return class_rows(run_blocks(embed(batch), batch.size(), nullptr, nullptr), batch.size());
}

ForwardResult Model::forward(std::span<const data::VQASample> batch, bool keep_attention) const {
  ForwardResult result;
  const Matrix x = run_blocks(embed(batch), batch.size(), nullptr,
                              keep_attention ? &result.attention : nullptr);
  result.class_tokens = class_rows(x, batch.size());
  result.logits = head_forward(result.class_tokens);
  return result;
}

ForwardResult Model::forward(std::span<const data::VQASample> batch, Tape& tape) const {
  tape = Tape{};
  tape.batch = batch.size();
  for (const auto& s : batch) {
    tape.tokens.push_back(padded_tokens(s.tokens, cfg_));
    tape.patches.push_back(patchify(s.image, cfg_));
  }
  ForwardResult result;
  const Matrix x = run_blocks(embed(batch), batch.size(), &tape, nullptr);
  result.class_tokens = class_rows(x, batch.size());
  result.logits = head_forward(result.class_tokens, &tape.head);
  return result;
}

std::size_t Model::lowest_trainable_layer() const {
  auto trainable = [](const train::Param* p) { return p != nullptr && p->trainable; };
  if (trainable(emb_.token) || trainable(emb_.text_pos) || trainable(emb_.image_pos) ||
      trainable(emb_.patch_proj) || trainable(emb_.text_class) || trainable(emb_.image_class) ||
      trainable(emb_.type)) {
    return 0;
  }
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const BlockParams& b = blocks_[l];
    for (const train::Param* p : {b.ln1_gamma, b.ln1_beta, b.wq, b.wk, b.wv, b.wo, b.ln2_gamma,
                                  b.ln2_beta, b.w1, b.b1, b.w2, b.b2}) {
      if (trainable(p)) return l;
    }
    for (const AdapterSlot* slot : {&b.msa, &b.mlp}) {
      if (trainable(slot->scale)) return l;
      for (const train::Param* p : slot->tensors)
        if (trainable(p)) return l;
      for (const train::Param* p : slot->merged)
        if (trainable(p)) return l;
    }
  }
  return blocks_.size();
}

void Model::adapter_grads_to_store(const AdapterSlot& slot, const adapter::AdapterGrads& g,
                                   double dscale) {
  const Matrix* fields[] = {&g.w_down, &g.b_down, &g.phi_down_w, &g.phi_down_b,
                            &g.w_up,   &g.b_up,   &g.phi_up_w,   &g.phi_up_b};
  for (std::size_t i = 0; i < slot.tensors.size(); ++i) {
    if (auto* sink = grad_sink(slot.tensors[i])) *sink += *fields[i];
  }
  if (auto* sink = grad_sink(slot.scale)) (*sink)(0, 0) += dscale;
}

void Model::backward(const Tape& tape, const Matrix& dlogits) {
  if (dlogits.rows() != tape.batch || dlogits.cols() != cfg_.n_answers) {
    throw DimensionError("dlogits " + shape_string(dlogits) + " does not match batch of " +
                         std::to_string(tape.batch));
  }
  const Matrix dclass = head_backward(tape.head, dlogits);
  const std::size_t lowest = lowest_trainable_layer();
  if (lowest == cfg_.n_layers) return;
  if (cfg_.merged) throw std::logic_error("merged adapters are inference-only; backward refused");

  const std::size_t t = cfg_.n_tokens();
  Matrix dx(tape.batch * t, cfg_.d);
  for (std::size_t b = 0; b < tape.batch; ++b) set_block(dx, b * t, 0, row_block(dclass, b, 1));

  for (std::size_t l = cfg_.n_layers; l-- > lowest;) {
    const BlockParams& bp = blocks_[l];
    const BlockCache& c = tape.blocks[l];
    const BlockWeights w = block(l);

    // MLP half: x2 = x1 + [MLP/adapter terms of z2 = LN2(x1)]
    Matrix dx1 = dx;
    Matrix dz2;
    const MlpGradSinks mlp_sinks{grad_sink(bp.w1), grad_sink(bp.b1), grad_sink(bp.w2),
                                 grad_sink(bp.b2)};
    if (w.mlp_adapter) {
      const double s = w.mlp_adapter->scale;
      const double ds = dot(dx, c.mlp_branch);
      const Matrix dbranch = scaled(dx, s);
      if (cfg_.parallel()) {
        dz2 = mlp_backward(dx, w.mlp, c.mlp, mlp_sinks);
        const auto g = adapter::adapter_backward(dbranch, *w.mlp_adapter, cfg_.adapter_variant,
                                                 cfg_.skip_connection_in_adapter,
                                                 c.mlp_adapter, dz2);
        adapter_grads_to_store(bp.mlp, g, ds);
      } else {
        Matrix dm(dx.rows(), dx.cols());
        const auto g = adapter::adapter_backward(dbranch, *w.mlp_adapter, cfg_.adapter_variant,
                                                 cfg_.skip_connection_in_adapter,
                                                 c.mlp_adapter, dm);
        adapter_grads_to_store(bp.mlp, g, ds);
        dz2 = mlp_backward(dm, w.mlp, c.mlp, mlp_sinks);
      }
    } else {
      dz2 = mlp_backward(dx, w.mlp, c.mlp, mlp_sinks);
    }
    const LayerNormGrads ln2 = layernorm_backward(dz2, w.ln2_gamma, c.ln2);
    if (auto* g = grad_sink(bp.ln2_gamma)) *g += ln2.dgamma;
    if (auto* g = grad_sink(bp.ln2_beta)) *g += ln2.dbeta;
    dx1 += ln2.dx;

    // Attention half: x1 = x + [MSA/adapter terms of z1 = LN1(x)]
    Matrix dx0 = dx1;
    Matrix dz1;
    const AttentionGradSinks attn_sinks{grad_sink(bp.wq), grad_sink(bp.wk), grad_sink(bp.wv),
                                        grad_sink(bp.wo)};
    if (w.msa_adapter) {
      const double s = w.msa_adapter->scale;
      const double ds = dot(dx1, c.msa_branch);
      const Matrix dbranch = scaled(dx1, s);
      if (cfg_.parallel()) {
        dz1 = msa_backward(dx1, w.attention, cfg_.n_heads, c.attention, attn_sinks);
        const auto g = adapter::adapter_backward(dbranch, *w.msa_adapter, cfg_.adapter_variant,
                                                 cfg_.skip_connection_in_adapter,
                                                 c.msa_adapter, dz1);
        adapter_grads_to_store(bp.msa, g, ds);
      } else {
        Matrix da(dx1.rows(), dx1.cols());
        const auto g = adapter::adapter_backward(dbranch, *w.msa_adapter, cfg_.adapter_variant,
                                                 cfg_.skip_connection_in_adapter,
                                                 c.msa_adapter, da);
        adapter_grads_to_store(bp.msa, g, ds);
        dz1 = msa_backward(da, w.attention, cfg_.n_heads, c.attention, attn_sinks);
      }
    } else {
      dz1 = msa_backward(dx1, w.attention, cfg_.n_heads, c.attention, attn_sinks);
    }
    const LayerNormGrads ln1 = layernorm_backward(dz1, w.ln1_gamma, c.ln1);
    if (auto* g = grad_sink(bp.ln1_gamma)) *g += ln1.dgamma;
    if (auto* g = grad_sink(bp.ln1_beta)) *g += ln1.dbeta;
    dx0 += ln1.dx;
    dx = std::move(dx0);
  }
  if (lowest == 0) embedding_backward(tape, dx);
}

void Model::embedding_backward(const Tape& tape, const Matrix& dx0) {
  const std::size_t t = cfg_.n_tokens();
  const std::size_t nt = cfg_.text_rows();
  const std::size_t d = cfg_.d;
  Matrix* token = grad_sink(emb_.token);
  Matrix* text_pos = grad_sink(emb_.text_pos);
  Matrix* image_pos = grad_sink(emb_.image_pos);
  Matrix* proj = grad_sink(emb_.patch_proj);
  Matrix* text_class = grad_sink(emb_.text_class);
  Matrix* image_class = grad_sink(emb_.image_class);
  Matrix* type = grad_sink(emb_.type);
  auto add_row = [d](Matrix* dst, std::size_t dst_row, std::span<const double> src) {
    if (dst == nullptr) return;
    auto r = dst->row(dst_row);
    for (std::size_t c = 0; c < d; ++c) r[c] += src[c];
  };
  for (std::size_t b = 0; b < tape.batch; ++b) {
    const std::size_t r0 = b * t;
    for (std::size_t i = 0; i < t; ++i) {
      const auto g = dx0.row(r0 + i);
      const bool is_text = i < nt;
      add_row(type, is_text ? 0 : 1, g);
      if (is_text) {
        add_row(text_pos, i, g);
        if (i == 0) {
          add_row(text_class, 0, g);
        } else {
          add_row(token, static_cast<std::size_t>(tape.tokens[b][i - 1]), g);
        }
      } else {
        add_row(image_pos, i - nt, g);
        if (i == nt) add_row(image_class, 0, g);
      }
    }
    if (proj != nullptr) {
      matmul_tn_add(*proj, tape.patches[b], row_block(dx0, r0 + nt + 1, cfg_.n_visual()));
    }
  }
}

AttentionMap attention_map(std::span<const Matrix> heads, const ModelConfig& cfg) {
  if (heads.empty()) throw std::invalid_argument("attention_map: no heads");
  const std::size_t n = cfg.n_tokens();
  AttentionMap map;
  map.full_row.assign(n, 0.0);
  for (const Matrix& h : heads) {
    if (h.rows() != n || h.cols() != n) {
      throw DimensionError("attention matrix " + shape_string(h) + " does not match " +
                           std::to_string(n) + " tokens");
    }
    for (std::size_t j = 0; j < n; ++j) map.full_row[j] += h(0, j);
  }
  const double count = static_cast<double>(heads.size());
  for (double& v : map.full_row) v /= count;
  const std::size_t nt = cfg.text_rows();
  map.text.assign(map.full_row.begin(), map.full_row.begin() + static_cast<std::ptrdiff_t>(nt));
  map.image_class = map.full_row[nt];
  map.image = Matrix(cfg.patch_grid, cfg.patch_grid);
  for (std::size_t k = 0; k < cfg.n_visual(); ++k) map.image.data()[k] = map.full_row[nt + 1 + k];
  return map;
}

}  // namespace rsak::model
