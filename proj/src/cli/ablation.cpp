#include "rsak/cli/ablation.hpp"

#include <algorithm>
#include <array>
#include <ostream>
#include <sstream>

#include "rsak/rsadapter/param_count.hpp"
#include "rsak/training/trainer.hpp"

namespace rsak::cli {

using adapter::TrainMode;

namespace {

constexpr std::array<std::pair<AblationAxis, std::string_view>, 5> kAxes{{
    {AblationAxis::placement, "placement"},
    {AblationAxis::skip, "skip"},
    {AblationAxis::bottleneck, "bottleneck"},
    {AblationAxis::position, "position"},
    {AblationAxis::layers, "layers"},
}};

AblationVariant make_variant(std::string label, TrainMode mode, model::ModelConfig cfg) {
  cfg = adapter::configure_for_mode(cfg, mode);
  cfg.validate();
  return {std::move(label), mode, std::move(cfg)};
}

std::vector<bool> layer_mask(std::size_t n, auto&& active) {
  std::vector<bool> mask(n);
  for (std::size_t l = 0; l < n; ++l) mask[l] = active(l);
  return mask;
}

std::string mask_string(const model::ModelConfig& cfg) {
  std::string s;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) s += cfg.layer_has_adapters(l) ? '1' : '0';
  return s;
}

std::string fixed(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

std::string_view to_string(AblationAxis axis) {
  for (const auto& [a, name] : kAxes)
    if (a == axis) return name;
  return "unknown";
}

AblationAxis parse_ablation_axis(std::string_view text) {
  for (const auto& [a, name] : kAxes)
    if (name == text) return a;
  throw model::ConfigError("unknown ablation axis '" + std::string(text) + "'");
}

std::vector<AblationVariant> ablation_grid(const RunConfig& base, AblationAxis axis) {
  model::ModelConfig cfg = base.model;
  std::vector<AblationVariant> out;
  switch (axis) {
    case AblationAxis::placement:
      out.push_back(make_variant("linear_probe", TrainMode::linear_probe, cfg));
      out.push_back(make_variant("msa", TrainMode::rsadapter_msa_only, cfg));
      out.push_back(make_variant("mlp", TrainMode::rsadapter_mlp_only, cfg));
      out.push_back(make_variant("msa+mlp+scaling", TrainMode::rsadapter, cfg));
      out.push_back(make_variant("full_finetune", TrainMode::full_finetune, cfg));
      break;
    case AblationAxis::skip: {
      const std::array<std::pair<std::string, TrainMode>, 3> sites{{
          {"msa", TrainMode::rsadapter_msa_only},
          {"mlp", TrainMode::rsadapter_mlp_only},
          {"msa+mlp", TrainMode::rsadapter},
      }};
      for (const auto& [name, mode] : sites) {
        for (bool skip : {false, true}) {
          cfg.skip_connection_in_adapter = skip;
          out.push_back(make_variant(name + (skip ? " w/ sc" : " w/o sc"), mode, cfg));
        }
      }
      break;
    }
    case AblationAxis::bottleneck:
      for (std::size_t dp : {2u, 4u, 8u, 16u}) {
        cfg.d_prime = dp;
        out.push_back(make_variant("d'=" + std::to_string(dp), TrainMode::rsadapter, cfg));
      }
      break;
    case AblationAxis::position: {
      const std::size_t n = cfg.n_layers;
      const std::size_t half = std::max<std::size_t>(1, n / 2);
      cfg.adapter_layer_mask = layer_mask(n, [&](std::size_t l) { return l >= n - half; });
      out.push_back(make_variant("top", TrainMode::rsadapter, cfg));
      cfg.adapter_layer_mask = layer_mask(n, [&](std::size_t l) { return l < half; });
      out.push_back(make_variant("bottom", TrainMode::rsadapter, cfg));
      // Layer numbers are 1-based, so even layers sit at odd indices.
      cfg.adapter_layer_mask = layer_mask(n, [](std::size_t l) { return l % 2 == 1; });
      out.push_back(make_variant("even", TrainMode::rsadapter, cfg));
      cfg.adapter_layer_mask = layer_mask(n, [](std::size_t l) { return l % 2 == 0; });
      out.push_back(make_variant("odd", TrainMode::rsadapter, cfg));
      cfg.adapter_layer_mask.clear();
      out.push_back(make_variant("all", TrainMode::rsadapter, cfg));
      break;
    }
    case AblationAxis::layers: {
      const std::size_t n = cfg.n_layers;
      cfg.adapter_layer_mask.clear();
      for (std::size_t q : {1u, 2u, 3u, 4u}) {
        cfg.n_layers = std::max<std::size_t>(1, n * q / 4);
        out.push_back(
            make_variant("N=" + std::to_string(cfg.n_layers), TrainMode::rsadapter, cfg));
      }
      break;
    }
  }
  return out;
}

std::size_t expected_tunable(const model::ModelConfig& cfg, TrainMode mode) {
  const auto counts = adapter::param_count(cfg, adapter::Phase::train);
  switch (mode) {
    case TrainMode::linear_probe:
      return counts.head;
    case TrainMode::full_finetune:
      return counts.total_exact();
    default:
      return counts.tunable_exact();
  }
}

std::vector<AblationRow> run_ablation(const RunConfig& base, AblationAxis axis,
                                      std::span<const data::VQASample> train_set,
                                      std::span<const data::VQASample> test_set, bool dry_run,
                                      std::ostream* progress) {
  std::vector<AblationRow> rows;
  for (auto& variant : ablation_grid(base, axis)) {
    AblationRow row;
    row.tunable = adapter::tunable_count(variant.model, variant.mode);
    row.expected_tunable = expected_tunable(variant.model, variant.mode);
    if (!dry_run) {
      if (progress) *progress << "# " << to_string(axis) << ": " << variant.label << '\n';
      auto m = model::Model::initialize(variant.model, base.train.seed);
      train::TrainOptions opts;
      opts.log = progress;
      const auto result = train::train(m, train_set, base.train, variant.mode, opts);
      row.tunable = result.tunable;
      row.metrics = data::evaluate(m, test_set);
    }
    row.variant = std::move(variant);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "variant\tmode\td_prime\tn_layers\tlayers\ttunable\tparam_count\tpresence\tcount\t"
        "comparison\tAA\tOA\n";
  for (const auto& r : rows) {
    const auto& c = r.variant.model;
    const bool adapters = c.adapter_mode != model::AdapterMode::none;
    os << r.variant.label << '\t' << adapter::to_string(r.variant.mode) << '\t'
       << (adapters ? std::to_string(c.d_prime) : "-") << '\t' << c.n_layers << '\t'
       << (adapters ? mask_string(c) : "-") << '\t' << r.tunable << '\t' << r.expected_tunable;
    if (r.metrics) {
      const auto& m = *r.metrics;
      for (auto t : data::kQuestionTypes)
        os << '\t' << (m.has_type(t) ? fixed(m.tally(t).accuracy()) : "-");
      os << '\t' << fixed(m.average_accuracy) << '\t' << fixed(m.overall_accuracy);
    } else {
      os << "\t-\t-\t-\t-\t-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace rsak::cli
