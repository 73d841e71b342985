#include "rsak/training/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rsak/training/loss.hpp"

namespace rsak::train {
namespace {

double batch_loss(const model::Model& model, std::span<const data::VQASample> samples,
                  std::span<const int> targets) {
  return cross_entropy_batch(model.forward(samples).logits, targets);
}

}  // namespace

GradcheckReport gradcheck(model::Model& model, std::span<const data::VQASample> samples,
                          double eps, double tol) {
  std::vector<int> targets(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) targets[i] = samples[i].answer;

  ParamStore& store = model.params();
  store.zero_grads();
  model::Tape tape;
  Matrix dlogits;
  cross_entropy_batch(model.forward(samples, tape).logits, targets, &dlogits);
  model.backward(tape, dlogits);

  GradcheckReport report;
  report.tol = tol;
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    ++report.tensors;
    auto values = p.value.data();
    auto grads = p.grad.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = batch_loss(model, samples, targets);
      values[i] = orig - eps;
      const double down = batch_loss(model, samples, targets);
      values[i] = orig;

      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grads[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel =
          abs_err / std::max({std::abs(analytic), std::abs(numeric), kGradcheckFloor});
      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_rel_error || report.worst_tensor.empty()) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        report.worst_tensor = name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  store.zero_grads();
  report.passed = report.checked > 0 && report.max_rel_error < tol;
  return report;
}

}  // namespace rsak::train
