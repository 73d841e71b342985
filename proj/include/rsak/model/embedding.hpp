#pragma once

#include <span>

#include "rsak/model/config.hpp"
#include "rsak/numerics/matrix.hpp"

namespace rsak::model {

struct EmbeddingWeights {
  const Matrix& token_table;  // vocab × d
  const Matrix& text_pos;     // (n_t+1) × d
  const Matrix& image_pos;    // (n_v+1) × d
  const Matrix& patch_proj;   // patch_dim × d, no bias
  const Matrix& text_class;   // 1 × d
  const Matrix& image_class;  // 1 × d
  const Matrix& type_table;   // 2 × d; row 0 text, row 1 image
};

/// Pads/validates a question to exactly max_text_len ids. Throws
/// std::out_of_range for ids ≥ vocab_size or questions that are too long.
std::vector<int> padded_tokens(std::span<const int> tokens, const ModelConfig& cfg);

/// [text_class; token rows padded with kPadTokenId] + text_pos.
Matrix embed_text(std::span<const int> tokens, const ModelConfig& cfg, const EmbeddingWeights& w);

/// Cuts the (side² × channels) image into n_v rows of patch_dim values. Patches
/// are ordered row-major over the patch grid; inside a patch values run over
/// (cell row, cell col, channel).
Matrix patchify(const Matrix& image, const ModelConfig& cfg);

/// [image_class; patches·patch_proj] + image_pos.
Matrix embed_image(const Matrix& image, const ModelConfig& cfg, const EmbeddingWeights& w);

/// [text + type row 0; image + type row 1].
Matrix fuse(const Matrix& text_emb, const Matrix& image_emb, const EmbeddingWeights& w);

}  // namespace rsak::model
