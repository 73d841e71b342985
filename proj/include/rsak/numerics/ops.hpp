#pragma once

#include <vector>

#include "rsak/numerics/matrix.hpp"

namespace rsak {

inline constexpr double kLayerNormEps = 1e-5;

// Products. The _tn / _nt forms transpose the first / second operand.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// out += aᵀ·b, the weight-gradient accumulation used by every linear layer.
void matmul_tn_add(Matrix& out, const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);
/// Sum of elementwise products.
double dot(const Matrix& a, const Matrix& b);

/// x[r, :] += row for every r; `row` must be 1×x.cols.
void add_row_broadcast(Matrix& x, const Matrix& row);
/// 1×cols vector of per-column sums (bias gradients).
Matrix column_sums(const Matrix& x);
void column_sums_add(Matrix& out, const Matrix& x);

// Tanh-approximation GELU and its exact derivative.
double gelu(double x);
double gelu_grad(double x);
Matrix gelu(const Matrix& x);
Matrix gelu_grad(const Matrix& x);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& x);

struct LayerNormCache {
  Matrix normalized;          // (x - mean) * rstd, before the affine step
  std::vector<double> rstd;   // 1 / sqrt(var + eps), one per row
};

struct LayerNormGrads {
  Matrix dx;
  Matrix dgamma;
  Matrix dbeta;
};

/// Per-row layer normalization; gamma and beta are 1×x.cols.
Matrix layernorm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                 LayerNormCache* cache = nullptr);
LayerNormGrads layernorm_backward(const Matrix& dy, const Matrix& gamma,
                                  const LayerNormCache& cache);

Matrix row_block(const Matrix& x, std::size_t row0, std::size_t nrows);
Matrix block(const Matrix& x, std::size_t row0, std::size_t nrows, std::size_t col0,
             std::size_t ncols);
void set_block(Matrix& dst, std::size_t row0, std::size_t col0, const Matrix& src);
Matrix concat_rows(const Matrix& top, const Matrix& bottom);

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);
/// Exact bit-pattern equality (distinguishes -0.0 from 0.0).
bool bitwise_equal(const Matrix& a, const Matrix& b);

}  // namespace rsak
