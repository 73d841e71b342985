#include "rsak/rsadapter/adapter.hpp"

#include "rsak/numerics/ops.hpp"
#include "rsak/numerics/rng.hpp"

namespace rsak::adapter {
namespace {

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  add_row_broadcast(out, b);
  return out;
}

void require_input_width(const Matrix& x, std::size_t d) {
  if (x.cols() != d) {
    throw DimensionError("adapter input " + shape_string(x) + " does not have width d=" +
                         std::to_string(d));
  }
}

}  // namespace

AdapterWeights AdapterWeights::initial(std::size_t d, std::size_t d_prime, std::uint64_t seed,
                                       double w_down_std) {
  Rng rng(seed);
  AdapterWeights w;
  w.w_down = rng_normal(rng, d, d_prime, w_down_std);
  w.b_down = Matrix(1, d_prime);
  w.phi_down_w = Matrix::identity(d_prime);
  w.phi_down_b = Matrix(1, d_prime);
  w.w_up = Matrix(d_prime, d);
  w.b_up = Matrix(1, d);
  w.phi_up_w = Matrix::identity(d);
  w.phi_up_b = Matrix(1, d);
  return w;
}

AdapterWeights AdapterWeights::random(std::size_t d, std::size_t d_prime, std::uint64_t seed,
                                      double stddev) {
  Rng rng(seed);
  AdapterWeights w;
  w.w_down = rng_normal(rng, d, d_prime, stddev);
  w.b_down = rng_normal(rng, 1, d_prime, stddev);
  w.phi_down_w = rng_normal(rng, d_prime, d_prime, stddev);
  w.phi_down_b = rng_normal(rng, 1, d_prime, stddev);
  w.w_up = rng_normal(rng, d_prime, d, stddev);
  w.b_up = rng_normal(rng, 1, d, stddev);
  w.phi_up_w = rng_normal(rng, d, d, stddev);
  w.phi_up_b = rng_normal(rng, 1, d, stddev);
  w.scale = stddev * rng.normal();
  return w;
}

Matrix adapter_forward(const Matrix& x, const AdapterWeights& w, AdapterVariant variant,
                       bool skip, AdapterCache* cache) {
  require_input_width(x, w.d());
  const bool rs = variant == AdapterVariant::rs;
  Matrix down = affine(x, w.w_down, w.b_down);
  Matrix pre_act = rs ? affine(down, w.phi_down_w, w.phi_down_b) : down;
  Matrix activated = gelu(pre_act);
  Matrix up = affine(activated, w.w_up, w.b_up);
  Matrix out = rs ? affine(up, w.phi_up_w, w.phi_up_b) : up;
  if (skip) out += x;
  if (cache != nullptr) {
    cache->input = x;
    cache->down = std::move(down);
    cache->pre_act = std::move(pre_act);
    cache->activated = std::move(activated);
    cache->up = std::move(up);
  }
  return out;
}

AdapterGrads adapter_backward(const Matrix& dy, const AdapterWeights& w, AdapterVariant variant,
                              bool skip, const AdapterCache& cache, Matrix& dx) {
  const bool rs = variant == AdapterVariant::rs;
  AdapterGrads g;
  g.scale = 0.0;
  if (skip) dx += dy;

  Matrix d_up = dy;
  if (rs) {
    g.phi_up_w = matmul_tn(cache.up, dy);
    g.phi_up_b = column_sums(dy);
    d_up = matmul_nt(dy, w.phi_up_w);
  }
  g.w_up = matmul_tn(cache.activated, d_up);
  g.b_up = column_sums(d_up);
  Matrix d_pre = hadamard(matmul_nt(d_up, w.w_up), gelu_grad(cache.pre_act));

  Matrix d_down = d_pre;
  if (rs) {
    g.phi_down_w = matmul_tn(cache.down, d_pre);
    g.phi_down_b = column_sums(d_pre);
    d_down = matmul_nt(d_pre, w.phi_down_w);
  }
  g.w_down = matmul_tn(cache.input, d_down);
  g.b_down = column_sums(d_down);
  dx += matmul_nt(d_down, w.w_down);
  return g;
}

MergedAdapter merge(const AdapterWeights& w) {
  MergedAdapter m;
  m.w_down_rep = matmul(w.w_down, w.phi_down_w);
  m.b_down_rep = affine(w.b_down, w.phi_down_w, w.phi_down_b);
  m.w_up_rep = matmul(w.w_up, w.phi_up_w);
  m.b_up_rep = affine(w.b_up, w.phi_up_w, w.phi_up_b);
  m.scale = w.scale;
  return m;
}

Matrix merged_forward(const Matrix& x, const MergedAdapter& m, bool skip) {
  require_input_width(x, m.w_down_rep.rows());
  Matrix out = affine(gelu(affine(x, m.w_down_rep, m.b_down_rep)), m.w_up_rep, m.b_up_rep);
  if (skip) out += x;
  return out;
}

}  // namespace rsak::adapter
