#include "rsak/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace rsak {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) {
  return ConstMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

MutMap view(Matrix& m) {
  return MutMap(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error(op, a, b);
}

constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  if (a.rows() == 0) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  if (a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

void matmul_tn_add(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn_add", a, b);
  if (out.rows() != a.cols() || out.cols() != b.cols()) {
    throw DimensionError("matmul_tn_add: accumulator " + shape_string(out) +
                         " does not match product of " + shape_string(a) + "^T and " +
                         shape_string(b));
  }
  if (a.rows() == 0) return;
  view(out).noalias() += view(a).transpose() * view(b);
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape("add", a, b);
  Matrix out = a;
  out += b;
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape("sub", a, b);
  Matrix out = a;
  out -= b;
  return out;
}

Matrix scaled(const Matrix& a, double factor) {
  Matrix out = a;
  out *= factor;
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard", a, b);
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

double dot(const Matrix& a, const Matrix& b) {
  require_same_shape("dot", a, b);
  double acc = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) acc += ad[i] * bd[i];
  return acc;
}

void add_row_broadcast(Matrix& x, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) shape_error("add_row_broadcast", x, row);
  auto rv = row.data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) xr[c] += rv[c];
  }
}

Matrix column_sums(const Matrix& x) {
  Matrix out(1, x.cols());
  column_sums_add(out, x);
  return out;
}

void column_sums_add(Matrix& out, const Matrix& x) {
  if (out.rows() != 1 || out.cols() != x.cols()) shape_error("column_sums_add", out, x);
  auto o = out.data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) o[c] += xr[c];
  }
}

double gelu(double x) {
  const double inner = kSqrt2OverPi * (x + kGeluC * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

double gelu_grad(double x) {
  const double inner = kSqrt2OverPi * (x + kGeluC * x * x * x);
  const double t = std::tanh(inner);
  const double dinner = kSqrt2OverPi * (1.0 + 3.0 * kGeluC * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

namespace {

using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;
using ArrayMap = Eigen::Map<Eigen::ArrayXd>;

ConstArrayMap as_array(const Matrix& m) {
  return ConstArrayMap(m.data().data(), static_cast<Eigen::Index>(m.size()));
}

// tanh(u) = 1 - 2 / (1 + e^{2u}). Eigen vectorizes exp for doubles but not tanh.
Eigen::ArrayXd gelu_tanh(const ConstArrayMap& x) {
  const Eigen::ArrayXd u = kSqrt2OverPi * (x + kGeluC * x.cube());
  return 1.0 - 2.0 / (1.0 + (2.0 * u).exp());
}

}  // namespace

Matrix gelu(const Matrix& x) {
  const ConstArrayMap in = as_array(x);
  if (!in.allFinite()) throw std::domain_error("gelu: non-finite input");
  Matrix out(x.rows(), x.cols());
  ArrayMap(out.data().data(), in.size()) = 0.5 * in * (1.0 + gelu_tanh(in));
  return out;
}

Matrix gelu_grad(const Matrix& x) {
  const ConstArrayMap in = as_array(x);
  if (!in.allFinite()) throw std::domain_error("gelu_grad: non-finite input");
  const Eigen::ArrayXd t = gelu_tanh(in);
  Matrix out(x.rows(), x.cols());
  ArrayMap(out.data().data(), in.size()) =
      0.5 * (1.0 + t) +
      0.5 * in * (1.0 - t.square()) * (kSqrt2OverPi * (1.0 + 3.0 * kGeluC * in.square()));
  return out;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    auto orow = out.row(r);
    if (xr.empty()) continue;
    const double mx = *std::max_element(xr.begin(), xr.end());
    double total = 0.0;
    for (std::size_t c = 0; c < xr.size(); ++c) {
      orow[c] = std::exp(xr[c] - mx);
      total += orow[c];
    }
    const double inv = 1.0 / total;
    for (double& v : orow) v *= inv;
  }
  return out;
}

Matrix layernorm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                 LayerNormCache* cache) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols()) shape_error("layernorm gamma", x, gamma);
  if (beta.rows() != 1 || beta.cols() != x.cols()) shape_error("layernorm beta", x, beta);
  const std::size_t n = x.cols();
  Matrix normalized(x.rows(), n);
  std::vector<double> rstd(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    auto nr = normalized.row(r);
    for (std::size_t c = 0; c < n; ++c) nr[c] = (xr[c] - mean) * rstd[r];
  }
  Matrix out(x.rows(), n);
  auto g = gamma.data();
  auto b = beta.data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto nr = normalized.row(r);
    auto orow = out.row(r);
    for (std::size_t c = 0; c < n; ++c) orow[c] = nr[c] * g[c] + b[c];
  }
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->rstd = std::move(rstd);
  }
  return out;
}

LayerNormGrads layernorm_backward(const Matrix& dy, const Matrix& gamma,
                                  const LayerNormCache& cache) {
  const Matrix& xhat = cache.normalized;
  require_same_shape("layernorm_backward", dy, xhat);
  const std::size_t n = dy.cols();
  LayerNormGrads grads{Matrix(dy.rows(), n), Matrix(1, n), Matrix(1, n)};
  auto g = gamma.data();
  auto dg = grads.dgamma.data();
  auto db = grads.dbeta.data();
  std::vector<double> dxhat(n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto dyr = dy.row(r);
    auto xr = xhat.row(r);
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      dg[c] += dyr[c] * xr[c];
      db[c] += dyr[c];
      dxhat[c] = dyr[c] * g[c];
      mean_d += dxhat[c];
      mean_dx += dxhat[c] * xr[c];
    }
    mean_d /= static_cast<double>(n);
    mean_dx /= static_cast<double>(n);
    auto dxr = grads.dx.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      dxr[c] = cache.rstd[r] * (dxhat[c] - mean_d - xr[c] * mean_dx);
    }
  }
  return grads;
}

Matrix row_block(const Matrix& x, std::size_t row0, std::size_t nrows) {
  return block(x, row0, nrows, 0, x.cols());
}

Matrix block(const Matrix& x, std::size_t row0, std::size_t nrows, std::size_t col0,
             std::size_t ncols) {
  if (row0 + nrows > x.rows() || col0 + ncols > x.cols()) {
    throw DimensionError("block [" + std::to_string(row0) + "+" + std::to_string(nrows) + ", " +
                         std::to_string(col0) + "+" + std::to_string(ncols) +
                         "] out of range for " + shape_string(x));
  }
  Matrix out(nrows, ncols);
  for (std::size_t r = 0; r < nrows; ++r) {
    std::memcpy(out.row(r).data(), x.row(row0 + r).data() + col0, ncols * sizeof(double));
  }
  return out;
}

void set_block(Matrix& dst, std::size_t row0, std::size_t col0, const Matrix& src) {
  if (row0 + src.rows() > dst.rows() || col0 + src.cols() > dst.cols()) {
    throw DimensionError("set_block: " + shape_string(src) + " at (" + std::to_string(row0) +
                         "," + std::to_string(col0) + ") exceeds " + shape_string(dst));
  }
  for (std::size_t r = 0; r < src.rows(); ++r) {
    std::memcpy(dst.row(row0 + r).data() + col0, src.row(r).data(),
                src.cols() * sizeof(double));
  }
}

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) shape_error("concat_rows", top, bottom);
  Matrix out(top.rows() + bottom.rows(), top.cols());
  set_block(out, 0, 0, top);
  set_block(out, top.rows(), 0, bottom);
  return out;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  return a.size() == 0 ||
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace rsak
