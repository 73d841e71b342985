#include "rsak/training/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rsak::train {

void adam_step(ParamStore& store, double lr, std::size_t t, const AdamConfig& cfg) {
  if (t == 0) throw std::invalid_argument("adam_step: step index is 1-based");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    auto value = p.value.data();
    auto grad = p.grad.data();
    auto m = p.adam_m.data();
    auto v = p.adam_v.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
  store.zero_grads();
}

}  // namespace rsak::train
