#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsak/cli/run_config.hpp"
#include "rsak/data/metrics.hpp"

namespace rsak::cli {

enum class AblationAxis { placement, skip, bottleneck, position, layers };

std::string_view to_string(AblationAxis axis);
/// Throws model::ConfigError for an unknown axis name.
AblationAxis parse_ablation_axis(std::string_view text);

struct AblationVariant {
  std::string label;
  adapter::TrainMode mode = adapter::TrainMode::rsadapter;
  model::ModelConfig model;  // already resolved for `mode`
};

/**
 * Variant grid for one axis, derived from `base`:
 *
 *   placement   linear probe, MSA only, MLP only, both with scaling, full fine-tune
 *   skip        MSA, MLP, MSA+MLP adapters, each without and with the skip connection
 *   bottleneck  d' in {2, 4, 8, 16}
 *   position    top half, bottom half, even, odd (1-based layer numbers), all
 *   layers      depth in {N/4, N/2, 3N/4, N}, rounded down and at least 1
 *
 * Non-placement axes use the scaled rs adapter at both sites.
 */
std::vector<AblationVariant> ablation_grid(const RunConfig& base, AblationAxis axis);

/// Tunable element count predicted by param_count for a variant.
std::size_t expected_tunable(const model::ModelConfig& cfg, adapter::TrainMode mode);

struct AblationRow {
  AblationVariant variant;
  std::size_t tunable = 0;           // counted from the freeze mask
  std::size_t expected_tunable = 0;  // predicted by param_count
  std::optional<data::Metrics> metrics;  // absent for a dry run
};

/**
 * Trains and evaluates every variant of `axis` in order. Each variant starts
 * from Model::initialize(variant.model, base.train.seed), so rows do not depend
 * on one another. With `dry_run` only parameter counts are produced.
 */
std::vector<AblationRow> run_ablation(const RunConfig& base, AblationAxis axis,
                                      std::span<const data::VQASample> train_set,
                                      std::span<const data::VQASample> test_set, bool dry_run,
                                      std::ostream* progress = nullptr);

/// Tab-separated table with a header row.
std::string format_ablation_table(std::span<const AblationRow> rows);

}  // namespace rsak::cli
