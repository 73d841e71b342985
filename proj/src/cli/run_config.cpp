#include "rsak/cli/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace rsak::cli {

using model::ConfigError;
using nlohmann::json;

namespace {

const json& section(const json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end()) throw ConfigError("missing config key '" + std::string(key) + "'");
  if (!it->is_object()) throw ConfigError("config key '" + std::string(key) + "' must be an object");
  return *it;
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!names.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  for (const char* key : allowed)
    if (!obj.contains(key)) throw ConfigError("missing config key '" + where + key + "'");
}

std::size_t get_count(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError("config key '" + where + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double get_real(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("config key '" + where + key + "' must be a number");
  return v.get<double>();
}

bool get_flag(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError("config key '" + where + key + "' must be true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError("config key '" + where + key + "' must be a string");
  return v.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(root, "", {"model", "train", "data", "mode", "scenario"});

  RunConfig cfg;
  const json& m = section(root, "model");
  check_keys(m, "model.",
             {"d", "n_layers", "n_heads", "d_prime", "vocab_size", "max_text_len", "image_side",
              "patch_grid", "patch_channels", "n_answers", "head_hidden", "init_std",
              "skip_connection_in_adapter", "adapter_layer_mask"});
  const std::string mw = "model.";
  cfg.model.d = get_count(m, mw, "d");
  cfg.model.n_layers = get_count(m, mw, "n_layers");
  cfg.model.n_heads = get_count(m, mw, "n_heads");
  cfg.model.d_prime = get_count(m, mw, "d_prime");
  cfg.model.vocab_size = get_count(m, mw, "vocab_size");
  cfg.model.max_text_len = get_count(m, mw, "max_text_len");
  cfg.model.image_side = get_count(m, mw, "image_side");
  cfg.model.patch_grid = get_count(m, mw, "patch_grid");
  cfg.model.patch_channels = get_count(m, mw, "patch_channels");
  cfg.model.n_answers = get_count(m, mw, "n_answers");
  cfg.model.head_hidden = get_count(m, mw, "head_hidden");
  cfg.model.init_std = get_real(m, mw, "init_std");
  cfg.model.skip_connection_in_adapter = get_flag(m, mw, "skip_connection_in_adapter");
  const json& mask = m.at("adapter_layer_mask");
  if (!mask.is_array()) throw ConfigError("config key 'model.adapter_layer_mask' must be an array");
  for (const json& b : mask) {
    if (!b.is_boolean())
      throw ConfigError("config key 'model.adapter_layer_mask' must hold true/false entries");
    cfg.model.adapter_layer_mask.push_back(b.get<bool>());
  }

  const json& t = section(root, "train");
  check_keys(t, "train.",
             {"epochs", "batch_size", "warmup_epochs", "warmup_lr", "base_lr", "adam_beta1",
              "adam_beta2", "adam_eps", "seed"});
  const std::string tw = "train.";
  cfg.train.epochs = get_count(t, tw, "epochs");
  cfg.train.batch_size = get_count(t, tw, "batch_size");
  cfg.train.warmup_epochs = get_count(t, tw, "warmup_epochs");
  cfg.train.warmup_lr = get_real(t, tw, "warmup_lr");
  cfg.train.base_lr = get_real(t, tw, "base_lr");
  cfg.train.adam.beta1 = get_real(t, tw, "adam_beta1");
  cfg.train.adam.beta2 = get_real(t, tw, "adam_beta2");
  cfg.train.adam.eps = get_real(t, tw, "adam_eps");
  cfg.train.seed = get_count(t, tw, "seed");

  const json& d = section(root, "data");
  check_keys(d, "data.", {"train", "test"});
  cfg.train_data = resolve(base_dir, get_string(d, "data.", "train"));
  cfg.test_data = resolve(base_dir, get_string(d, "data.", "test"));

  try {
    cfg.mode = adapter::parse_train_mode(get_string(root, "", "mode"));
    cfg.scenario = data::parse_scenario(get_string(root, "", "scenario"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  cfg.train.validate();
  cfg.resolved_model().validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string dump_run_config(const RunConfig& c) {
  json mask = json::array();
  for (bool b : c.model.adapter_layer_mask) mask.push_back(b);
  json root;
  root["model"] = {{"d", c.model.d},
                   {"n_layers", c.model.n_layers},
                   {"n_heads", c.model.n_heads},
                   {"d_prime", c.model.d_prime},
                   {"vocab_size", c.model.vocab_size},
                   {"max_text_len", c.model.max_text_len},
                   {"image_side", c.model.image_side},
                   {"patch_grid", c.model.patch_grid},
                   {"patch_channels", c.model.patch_channels},
                   {"n_answers", c.model.n_answers},
                   {"head_hidden", c.model.head_hidden},
                   {"init_std", c.model.init_std},
                   {"skip_connection_in_adapter", c.model.skip_connection_in_adapter},
                   {"adapter_layer_mask", mask}};
  root["train"] = {{"epochs", c.train.epochs},
                   {"batch_size", c.train.batch_size},
                   {"warmup_epochs", c.train.warmup_epochs},
                   {"warmup_lr", c.train.warmup_lr},
                   {"base_lr", c.train.base_lr},
                   {"adam_beta1", c.train.adam.beta1},
                   {"adam_beta2", c.train.adam.beta2},
                   {"adam_eps", c.train.adam.eps},
                   {"seed", c.train.seed}};
  root["data"] = {{"train", c.train_data.string()}, {"test", c.test_data.string()}};
  root["mode"] = std::string(adapter::to_string(c.mode));
  root["scenario"] = std::string(data::to_string(c.scenario));
  return root.dump(2) + "\n";
}

}  // namespace rsak::cli
