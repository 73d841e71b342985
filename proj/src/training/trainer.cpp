#include "rsak/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rsak/data/metrics.hpp"
#include "rsak/numerics/rng.hpp"
#include "rsak/training/loss.hpp"

namespace rsak::train {

using model::ConfigError;

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (warmup_epochs > epochs) throw ConfigError("train.warmup_epochs exceeds train.epochs");
  if (!(warmup_lr > 0.0) || !(base_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return epoch < cfg.warmup_epochs ? cfg.warmup_lr : cfg.base_lr;
}

namespace {

void check_architecture(const model::ModelConfig& cfg, adapter::TrainMode mode) {
  if (cfg.merged) throw ConfigError("cannot train a merged model");
  const model::ModelConfig expected = adapter::configure_for_mode(cfg, mode);
  if (expected.adapter_mode != cfg.adapter_mode ||
      (cfg.adapter_mode != model::AdapterMode::none &&
       (expected.adapter_variant != cfg.adapter_variant ||
        expected.scaling_enabled != cfg.scaling_enabled)))
    throw ConfigError("model architecture does not match train mode '" +
                      std::string(adapter::to_string(mode)) + "'");
}

bool head_only(const ParamStore& store) {
  for (const auto& [name, p] : store)
    if (p.trainable && model::param_group(name) != model::ParamGroup::head) return false;
  return true;
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto from = src.row(idx[i]);
    std::copy(from.begin(), from.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

TrainResult train(model::Model& model, std::span<const data::VQASample> samples,
                  const TrainConfig& cfg, adapter::TrainMode mode, const TrainOptions& opts) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("training set is empty");
  check_architecture(model.config(), mode);

  ParamStore& store = model.params();
  adapter::build_freeze_mask(mode, store);
  store.zero_grads();

  TrainResult result;
  result.tunable = store.trainable_count();

  const bool cached = head_only(store);
  Matrix features;
  if (cached) {
    features = Matrix(samples.size(), model.config().d);
    constexpr std::size_t kChunk = 250;
    for (std::size_t b = 0; b < samples.size(); b += kChunk) {
      const std::size_t len = std::min(kChunk, samples.size() - b);
      set_block(features, b, 0, model.encode(samples.subspan(b, len)));
    }
  }

  Rng shuffle_rng = Rng(cfg.seed).child("shuffle");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<data::VQASample> batch;
  double best_eval = -1.0;

  if (opts.log) *opts.log << format_log_header() << '\n';

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - b);
      const std::span<const std::size_t> idx(order.data() + b, len);
      std::vector<int> targets(len);
      for (std::size_t i = 0; i < len; ++i) targets[i] = samples[idx[i]].answer;

      Matrix logits;
      Matrix dlogits;
      if (cached) {
        model::HeadCache hc;
        logits = model.head_forward(gather_rows(features, idx), &hc);
        loss_sum += cross_entropy_batch(logits, targets, &dlogits) * static_cast<double>(len);
        model.head_backward(hc, dlogits);
      } else {
        batch.clear();
        for (std::size_t i : idx) batch.push_back(samples[i]);
        model::Tape tape;
        logits = model.forward(batch, tape).logits;
        loss_sum += cross_entropy_batch(logits, targets, &dlogits) * static_cast<double>(len);
        model.backward(tape, dlogits);
      }
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < len; ++i) correct += pred[i] == targets[i];

      ++result.steps;
      adam_step(store, lr, result.steps, cfg.adam);
    }

    EpochLog e;
    e.epoch = epoch;
    e.step = result.steps;
    e.lr = lr;
    e.loss = loss_sum / static_cast<double>(samples.size());
    e.train_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    if (!opts.eval.empty()) {
      e.eval_accuracy = data::evaluate(model, opts.eval).overall_accuracy;
      if (*e.eval_accuracy > best_eval) {
        best_eval = *e.eval_accuracy;
        result.best_epoch = epoch;
      }
    }
    if (!std::isfinite(e.loss)) throw std::runtime_error("training loss became non-finite");
    if (opts.log) *opts.log << format_log_line(e) << '\n' << std::flush;
    result.epochs.push_back(e);
    result.final_loss = e.loss;
  }
  return result;
}

std::string format_log_header() { return "epoch\tstep\tlr\tloss\ttrain_acc\teval_acc"; }

std::string format_log_line(const EpochLog& e) {
  std::ostringstream os;
  os.precision(9);
  os << e.epoch << '\t' << e.step << '\t' << e.lr << '\t' << e.loss << '\t' << e.train_accuracy
     << '\t';
  if (e.eval_accuracy)
    os << *e.eval_accuracy;
  else
    os << '-';
  return os.str();
}

}  // namespace rsak::train
