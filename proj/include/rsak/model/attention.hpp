#pragma once

#include <vector>

#include "rsak/numerics/matrix.hpp"

namespace rsak::model {

/// Head i uses columns [i·d_k, (i+1)·d_k) of wq, wk and wv.
struct AttentionWeights {
  const Matrix& wq;
  const Matrix& wk;
  const Matrix& wv;
  const Matrix& wo;
};

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  Matrix concat;
  std::vector<Matrix> probs;  // index sequence * n_heads + head
  std::size_t seq_len = 0;
};

/// Destinations for weight gradients; null entries are skipped.
struct AttentionGradSinks {
  Matrix* wq = nullptr;
  Matrix* wk = nullptr;
  Matrix* wv = nullptr;
  Matrix* wo = nullptr;
};

struct MsaResult {
  Matrix out;
  std::vector<Matrix> attention;  // one seq×seq matrix per head
};

/// Multi-head self-attention over a single sequence: Concat(heads)·W_O with
/// head_i = Softmax(Q_i K_iᵀ / sqrt(d_k)) V_i.
MsaResult msa_forward(const Matrix& x, const AttentionWeights& w, std::size_t n_heads);

/// Same as msa_forward for a stack of sequences of `seq_len` rows each;
/// attention never crosses sequence boundaries.
Matrix msa_forward_stacked(const Matrix& x, const AttentionWeights& w, std::size_t n_heads,
                           std::size_t seq_len, AttentionCache* cache);
Matrix msa_backward(const Matrix& dy, const AttentionWeights& w, std::size_t n_heads,
                    const AttentionCache& cache, const AttentionGradSinks& sinks);

struct MlpWeights {
  const Matrix& w1;  // d × 4d
  const Matrix& b1;
  const Matrix& w2;  // 4d × d
  const Matrix& b2;
};

struct MlpCache {
  Matrix input;
  Matrix pre;  // x·W1 + b1
  Matrix act;  // gelu(pre)
};

struct MlpGradSinks {
  Matrix* w1 = nullptr;
  Matrix* b1 = nullptr;
  Matrix* w2 = nullptr;
  Matrix* b2 = nullptr;
};

/// gelu(x·W1 + b1)·W2 + b2
Matrix mlp_forward(const Matrix& x, const MlpWeights& w, MlpCache* cache = nullptr);
Matrix mlp_backward(const Matrix& dy, const MlpWeights& w, const MlpCache& cache,
                    const MlpGradSinks& sinks);

}  // namespace rsak::model
