#include "rsak/model/attention.hpp"

#include <Eigen/Core>
#include <cmath>

#include "rsak/numerics/ops.hpp"

namespace rsak::model {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;
using View = Eigen::Map<RowMat, 0, Strided>;
using ConstView = Eigen::Map<const RowMat, 0, Strided>;

// One head's rows of one sequence inside a stacked (rows x width) matrix.
ConstView head_view(const Matrix& m, std::size_t r0, std::size_t rows, std::size_t c0,
                    std::size_t cols) {
  return ConstView(m.data().data() + r0 * m.cols() + c0, static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols), Strided(static_cast<Eigen::Index>(m.cols())));
}

View head_view(Matrix& m, std::size_t r0, std::size_t rows, std::size_t c0, std::size_t cols) {
  return View(m.data().data() + r0 * m.cols() + c0, static_cast<Eigen::Index>(rows),
              static_cast<Eigen::Index>(cols), Strided(static_cast<Eigen::Index>(m.cols())));
}

View full_view(Matrix& m) { return head_view(m, 0, m.rows(), 0, m.cols()); }

void check_attention_input(const Matrix& x, const AttentionWeights& w, std::size_t n_heads,
                           std::size_t seq_len) {
  if (x.cols() != w.wq.rows()) {
    throw DimensionError("attention input " + shape_string(x) + " does not match W_Q " +
                         shape_string(w.wq));
  }
  if (n_heads == 0 || w.wq.cols() % n_heads != 0) {
    throw DimensionError("attention width " + std::to_string(w.wq.cols()) +
                         " not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (seq_len == 0 || x.rows() % seq_len != 0) {
    throw DimensionError("attention input rows " + std::to_string(x.rows()) +
                         " not a multiple of sequence length " + std::to_string(seq_len));
  }
}

}  // namespace

MsaResult msa_forward(const Matrix& x, const AttentionWeights& w, std::size_t n_heads) {
  AttentionCache cache;
  MsaResult result;
  result.out = msa_forward_stacked(x, w, n_heads, x.rows(), &cache);
  result.attention = std::move(cache.probs);
  return result;
}

Matrix msa_forward_stacked(const Matrix& x, const AttentionWeights& w, std::size_t n_heads,
                           std::size_t seq_len, AttentionCache* cache) {
  check_attention_input(x, w, n_heads, seq_len);
  const std::size_t width = w.wq.cols();
  const std::size_t dk = width / n_heads;
  const std::size_t n_seq = x.rows() / seq_len;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix q = matmul(x, w.wq);
  Matrix k = matmul(x, w.wk);
  Matrix v = matmul(x, w.wv);
  Matrix concat(x.rows(), width);
  std::vector<Matrix> probs;
  if (cache != nullptr) probs.reserve(n_seq * n_heads);

  Matrix p(seq_len, seq_len);
  for (std::size_t s = 0; s < n_seq; ++s) {
    const std::size_t r0 = s * seq_len;
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t c0 = h * dk;
      View pv = full_view(p);
      pv.noalias() = head_view(q, r0, seq_len, c0, dk) *
                     head_view(k, r0, seq_len, c0, dk).transpose();
      pv *= inv_sqrt_dk;
      for (Eigen::Index i = 0; i < pv.rows(); ++i) {
        const double mx = pv.row(i).maxCoeff();
        pv.row(i) = (pv.row(i).array() - mx).exp();
        pv.row(i) /= pv.row(i).sum();
      }
      head_view(concat, r0, seq_len, c0, dk).noalias() = pv * head_view(v, r0, seq_len, c0, dk);
      if (cache != nullptr) probs.push_back(p);
    }
  }
  Matrix out = matmul(concat, w.wo);
  if (cache != nullptr) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->probs = std::move(probs);
    cache->seq_len = seq_len;
  }
  return out;
}

Matrix msa_backward(const Matrix& dy, const AttentionWeights& w, std::size_t n_heads,
                    const AttentionCache& cache, const AttentionGradSinks& sinks) {
  const std::size_t width = w.wq.cols();
  const std::size_t dk = width / n_heads;
  const std::size_t seq_len = cache.seq_len;
  const std::size_t n_seq = dy.rows() / seq_len;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  if (sinks.wo != nullptr) matmul_tn_add(*sinks.wo, cache.concat, dy);
  const Matrix dconcat = matmul_nt(dy, w.wo);
  Matrix dq(dy.rows(), width);
  Matrix dk_all(dy.rows(), width);
  Matrix dv(dy.rows(), width);

  RowMat dp(seq_len, seq_len);
  RowMat dscore(seq_len, seq_len);
  for (std::size_t s = 0; s < n_seq; ++s) {
    const std::size_t r0 = s * seq_len;
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t c0 = h * dk;
      const Matrix& pm = cache.probs[s * n_heads + h];
      const ConstView p = head_view(pm, 0, seq_len, 0, seq_len);
      const ConstView doh = head_view(dconcat, r0, seq_len, c0, dk);

      dp.noalias() = doh * head_view(cache.v, r0, seq_len, c0, dk).transpose();
      head_view(dv, r0, seq_len, c0, dk).noalias() = p.transpose() * doh;
      // Softmax Jacobian: dS_ij = P_ij (dP_ij - sum_k P_ik dP_ik), then the 1/sqrt(dk) scale.
      const Eigen::VectorXd row_dot = p.cwiseProduct(dp).rowwise().sum();
      dscore = p.cwiseProduct((dp.colwise() - row_dot)) * inv_sqrt_dk;
      head_view(dq, r0, seq_len, c0, dk).noalias() =
          dscore * head_view(cache.k, r0, seq_len, c0, dk);
      head_view(dk_all, r0, seq_len, c0, dk).noalias() =
          dscore.transpose() * head_view(cache.q, r0, seq_len, c0, dk);
    }
  }

  if (sinks.wq != nullptr) matmul_tn_add(*sinks.wq, cache.input, dq);
  if (sinks.wk != nullptr) matmul_tn_add(*sinks.wk, cache.input, dk_all);
  if (sinks.wv != nullptr) matmul_tn_add(*sinks.wv, cache.input, dv);
  Matrix dx = matmul_nt(dq, w.wq);
  dx += matmul_nt(dk_all, w.wk);
  dx += matmul_nt(dv, w.wv);
  return dx;
}

Matrix mlp_forward(const Matrix& x, const MlpWeights& w, MlpCache* cache) {
  Matrix pre = matmul(x, w.w1);
  add_row_broadcast(pre, w.b1);
  Matrix act = gelu(pre);
  Matrix out = matmul(act, w.w2);
  add_row_broadcast(out, w.b2);
  if (cache != nullptr) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

Matrix mlp_backward(const Matrix& dy, const MlpWeights& w, const MlpCache& cache,
                    const MlpGradSinks& sinks) {
  if (sinks.w2 != nullptr) matmul_tn_add(*sinks.w2, cache.act, dy);
  if (sinks.b2 != nullptr) column_sums_add(*sinks.b2, dy);
  Matrix dpre = hadamard(matmul_nt(dy, w.w2), gelu_grad(cache.pre));
  if (sinks.w1 != nullptr) matmul_tn_add(*sinks.w1, cache.input, dpre);
  if (sinks.b1 != nullptr) column_sums_add(*sinks.b1, dpre);
  return matmul_nt(dpre, w.w1);
}

}  // namespace rsak::model
