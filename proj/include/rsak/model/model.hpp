#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rsak/data/sample.hpp"
#include "rsak/model/attention.hpp"
#include "rsak/model/config.hpp"
#include "rsak/model/embedding.hpp"
#include "rsak/model/layout.hpp"
#include "rsak/numerics/ops.hpp"
#include "rsak/rsadapter/adapter.hpp"
#include "rsak/training/param_store.hpp"

namespace rsak::model {

struct BlockWeights {
  const Matrix& ln1_gamma;
  const Matrix& ln1_beta;
  AttentionWeights attention;
  const Matrix& ln2_gamma;
  const Matrix& ln2_beta;
  MlpWeights mlp;
  // Exactly one of the pair is set per site when the site carries an adapter.
  std::optional<adapter::AdapterWeights> msa_adapter;
  std::optional<adapter::AdapterWeights> mlp_adapter;
  std::optional<adapter::MergedAdapter> msa_merged;
  std::optional<adapter::MergedAdapter> mlp_merged;
};

/**
 * One transformer block on a single sequence.
 *
 * Vanilla (adapter_mode none):
 *   x ← x + MSA(LN1(x));  x ← x + MLP(LN2(x))
 * Parallel adapters:
 *   x ← x + MSA(LN1(x)) + s_a·Adapter(LN1(x));  x ← x + MLP(LN2(x)) + s_p·Adapter(LN2(x))
 * Sequential adapters:
 *   x ← x + s·Adapter(g(LN(x))) at the adapted site
 */
Matrix block_forward(const Matrix& x, const BlockWeights& w, const ModelConfig& cfg);

struct HeadCache {
  Matrix input;
  Matrix pre1, act1, pre2, act2;
};

struct BlockCache {
  LayerNormCache ln1;
  LayerNormCache ln2;
  AttentionCache attention;
  MlpCache mlp;
  Matrix msa_out;   // g(LN1(x))
  Matrix mlp_out;   // g(LN2(x1))
  adapter::AdapterCache msa_adapter;
  adapter::AdapterCache mlp_adapter;
  Matrix msa_branch;  // adapter output before scaling
  Matrix mlp_branch;
};

/// Activations retained by a training forward pass.
struct Tape {
  std::size_t batch = 0;
  std::vector<std::vector<int>> tokens;
  std::vector<Matrix> patches;
  std::vector<BlockCache> blocks;
  HeadCache head;
};

struct ForwardResult {
  Matrix logits;        // batch × n_answers, softmax not applied
  Matrix class_tokens;  // batch × d, row 0 of each final sequence
  /// Final-layer attention, [sample][head], filled when requested.
  std::vector<std::vector<Matrix>> attention;
};

/**
 * Single-stream multimodal transformer with a 3-layer answer head.
 *
 * Owns its parameters. Batches are evaluated as a stack of equal-length
 * sequences (every sample has max_text_len + n_v + 2 rows).
 */
class Model {
 public:
  Model(ModelConfig cfg, train::ParamStore params);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&& other) noexcept;
  Model& operator=(Model&& other) noexcept;
  ~Model() = default;

  static Model initialize(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const train::ParamStore& params() const { return params_; }
  /// Mutable access. Adding or removing tensors requires constructing a new Model.
  train::ParamStore& params() { return params_; }

  EmbeddingWeights embedding() const;
  BlockWeights block(std::size_t layer) const;

  /// Stacked input embedding X0 for the batch: (batch·n_tokens) × d.
  Matrix embed(std::span<const data::VQASample> batch) const;
  ForwardResult forward(std::span<const data::VQASample> batch,
                        bool keep_attention = false) const;
  /// Forward pass that records everything backward() needs.
  ForwardResult forward(std::span<const data::VQASample> batch, Tape& tape) const;
  /// Accumulates dL/dθ into the grad buffer of every trainable parameter.
  void backward(const Tape& tape, const Matrix& dlogits);

  /// Backbone only: class tokens of the final block (batch × d).
  Matrix encode(std::span<const data::VQASample> batch) const;
  /// Answer head on precomputed class tokens.
  Matrix head_forward(const Matrix& class_tokens, HeadCache* cache = nullptr) const;
  /// Returns dL/d(class tokens).
  Matrix head_backward(const HeadCache& cache, const Matrix& dlogits);

 private:
  struct AdapterSlot {
    std::vector<train::Param*> tensors;  // in kAdapterTensors order (phi absent for plain)
    std::vector<train::Param*> merged;   // in kMergedTensors order
    train::Param* scale = nullptr;
    bool present = false;
  };
  struct BlockParams {
    train::Param *ln1_gamma, *ln1_beta, *wq, *wk, *wv, *wo;
    train::Param *ln2_gamma, *ln2_beta, *w1, *b1, *w2, *b2;
    AdapterSlot msa, mlp;
  };
  struct EmbeddingParams {
    train::Param *token, *text_pos, *image_pos, *patch_proj, *text_class, *image_class, *type;
  };
  struct HeadParams {
    train::Param *w1, *b1, *w2, *b2, *w3, *b3;
  };

  void bind();
  AdapterSlot bind_adapter(std::size_t layer, AdapterSite site);
  std::optional<adapter::AdapterWeights> adapter_weights(const AdapterSlot& slot) const;
  std::optional<adapter::MergedAdapter> merged_weights(const AdapterSlot& slot) const;
  Matrix run_blocks(Matrix x, std::size_t batch, Tape* tape,
                    std::vector<std::vector<Matrix>>* final_attention) const;
  Matrix class_rows(const Matrix& x, std::size_t batch) const;
  void embedding_backward(const Tape& tape, const Matrix& dx0);
  void adapter_grads_to_store(const AdapterSlot& slot, const adapter::AdapterGrads& g,
                              double dscale);
  std::size_t lowest_trainable_layer() const;

  ModelConfig cfg_;
  train::ParamStore params_;
  EmbeddingParams emb_{};
  std::vector<BlockParams> blocks_;
  HeadParams head_{};
};

/// Class-token attention of the final layer, averaged over heads.
struct AttentionMap {
  std::vector<double> full_row;  // length n_tokens, sums to 1
  std::vector<double> text;      // text segment incl. the text class token
  double image_class = 0.0;      // weight on the image class token
  Matrix image;                  // patch_grid × patch_grid
};

/// `heads` is one sample's final-layer attention (one matrix per head).
AttentionMap attention_map(std::span<const Matrix> heads, const ModelConfig& cfg);

}  // namespace rsak::model
