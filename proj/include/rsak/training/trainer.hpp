#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rsak/data/sample.hpp"
#include "rsak/model/model.hpp"
#include "rsak/rsadapter/freeze.hpp"
#include "rsak/training/adam.hpp"

namespace rsak::train {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::size_t warmup_epochs = 0;
  double warmup_lr = 1e-3;
  double base_lr = 1e-3;
  AdamConfig adam{};
  std::uint64_t seed = 0;

  /// Throws ConfigError when a rate is non-positive, batch_size or epochs is
  /// zero, or warmup_epochs exceeds epochs.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Two-phase step schedule: warmup_lr before warmup_epochs, base_lr afterwards.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps taken so far
  double lr = 0.0;
  double loss = 0.0;            // mean training loss over the epoch
  double train_accuracy = 0.0;  // running accuracy over the epoch's batches
  std::optional<double> eval_accuracy;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t steps = 0;
  std::size_t tunable = 0;
  double final_loss = 0.0;
  /// Epoch with the highest eval accuracy, when an eval set was given.
  std::optional<std::size_t> best_epoch;
};

struct TrainOptions {
  /// Evaluated after each epoch when non-empty.
  std::span<const data::VQASample> eval;
  /// Receives one tab-separated line per epoch (and a header) when set.
  std::ostream* log = nullptr;
};

/**
 * Trains `model` in place.
 *
 * The model must already have the architecture `mode` implies (see
 * adapter::configure_for_mode). Trainable flags are set from `mode`, batches
 * come from a per-epoch shuffle of a stream seeded by `cfg.seed`, and the
 * gradient of each batch is the mean over its samples. When only head
 * tensors train, backbone features are computed once and reused.
 */
TrainResult train(model::Model& model, std::span<const data::VQASample> samples,
                  const TrainConfig& cfg, adapter::TrainMode mode, const TrainOptions& opts = {});

std::string format_log_header();
std::string format_log_line(const EpochLog& e);

}  // namespace rsak::train
