#include "rsak/model/embedding.hpp"

#include <stdexcept>
#include <string>

#include "rsak/numerics/ops.hpp"

namespace rsak::model {

std::vector<int> padded_tokens(std::span<const int> tokens, const ModelConfig& cfg) {
  if (tokens.size() > cfg.max_text_len) {
    throw std::out_of_range("question has " + std::to_string(tokens.size()) +
                            " tokens; max_text_len is " + std::to_string(cfg.max_text_len));
  }
  std::vector<int> out(cfg.max_text_len, kPadTokenId);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= cfg.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(tokens[i]) + " outside vocabulary of " +
                              std::to_string(cfg.vocab_size));
    }
    out[i] = tokens[i];
  }
  return out;
}

Matrix embed_text(std::span<const int> tokens, const ModelConfig& cfg, const EmbeddingWeights& w) {
  const std::vector<int> ids = padded_tokens(tokens, cfg);
  Matrix out = w.text_pos;
  auto first = out.row(0);
  auto cls = w.text_class.row(0);
  for (std::size_t c = 0; c < cfg.d; ++c) first[c] += cls[c];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto dst = out.row(i + 1);
    auto src = w.token_table.row(static_cast<std::size_t>(ids[i]));
    for (std::size_t c = 0; c < cfg.d; ++c) dst[c] += src[c];
  }
  return out;
}

Matrix patchify(const Matrix& image, const ModelConfig& cfg) {
  const std::size_t side = cfg.image_side;
  if (image.rows() != side * side || image.cols() != cfg.patch_channels) {
    throw DimensionError("image " + shape_string(image) + " does not match a " +
                         std::to_string(side) + "x" + std::to_string(side) + " grid with " +
                         std::to_string(cfg.patch_channels) + " channels");
  }
  const std::size_t ps = cfg.patch_side();
  const std::size_t ch = cfg.patch_channels;
  Matrix out(cfg.n_visual(), cfg.patch_dim());
  for (std::size_t pr = 0; pr < cfg.patch_grid; ++pr) {
    for (std::size_t pc = 0; pc < cfg.patch_grid; ++pc) {
      auto dst = out.row(pr * cfg.patch_grid + pc);
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < ps; ++dy) {
        for (std::size_t dx = 0; dx < ps; ++dx) {
          auto cell = image.row((pr * ps + dy) * side + pc * ps + dx);
          for (std::size_t c = 0; c < ch; ++c) dst[k++] = cell[c];
        }
      }
    }
  }
  return out;
}

Matrix embed_image(const Matrix& image, const ModelConfig& cfg, const EmbeddingWeights& w) {
  const Matrix projected = matmul(patchify(image, cfg), w.patch_proj);
  Matrix out = w.image_pos;
  auto first = out.row(0);
  auto cls = w.image_class.row(0);
  for (std::size_t c = 0; c < cfg.d; ++c) first[c] += cls[c];
  for (std::size_t r = 0; r < projected.rows(); ++r) {
    auto dst = out.row(r + 1);
    auto src = projected.row(r);
    for (std::size_t c = 0; c < cfg.d; ++c) dst[c] += src[c];
  }
  return out;
}

Matrix fuse(const Matrix& text_emb, const Matrix& image_emb, const EmbeddingWeights& w) {
  Matrix text = text_emb;
  Matrix image = image_emb;
  add_row_broadcast(text, row_block(w.type_table, 0, 1));
  add_row_broadcast(image, row_block(w.type_table, 1, 1));
  return concat_rows(text, image);
}

}  // namespace rsak::model
