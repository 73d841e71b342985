#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rsak/numerics/matrix.hpp"

namespace rsak::train {

struct Param {
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  bool trainable = false;
};

/**
 * Flat registry of named tensors.
 *
 * Iteration is lexicographic by name (std::map), which fixes the order of
 * optimizer updates and checkpoint records. Gradient and moment buffers are
 * allocated alongside the value and always share its shape.
 */
class ParamStore {
 public:
  using Map = std::map<std::string, Param, std::less<>>;

  /// Registers a tensor. Throws std::invalid_argument on a duplicate name.
  Param& add(std::string name, Matrix value, bool trainable = false);
  void erase(std::string_view name);

  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }
  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;
  Param* find(std::string_view name);
  const Param* find(std::string_view name) const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t total_count() const;
  std::size_t trainable_count() const;
  void zero_grads();
  void set_all_trainable(bool trainable);

  /// Order-sensitive FNV-1a over the raw bytes of one tensor's values.
  static std::uint64_t checksum(const Matrix& m);

 private:
  Map params_;
};

}  // namespace rsak::train
