#include "rsak/training/param_store.hpp"

#include <cstring>
#include <stdexcept>

namespace rsak::train {

Param& ParamStore::add(std::string name, Matrix value, bool trainable) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  Param p;
  p.grad = Matrix(value.rows(), value.cols());
  p.adam_m = Matrix(value.rows(), value.cols());
  p.adam_v = Matrix(value.rows(), value.cols());
  p.value = std::move(value);
  p.trainable = trainable;
  return params_.emplace(std::move(name), std::move(p)).first->second;
}

void ParamStore::erase(std::string_view name) {
  auto it = params_.find(name);
  if (it != params_.end()) params_.erase(it);
}

Param& ParamStore::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

const Param& ParamStore::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Param* ParamStore::find(std::string_view name) {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : &it->second;
}

const Param* ParamStore::find(std::string_view name) const {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : &it->second;
}

std::size_t ParamStore::total_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.fill(0.0);
}

void ParamStore::set_all_trainable(bool trainable) {
  for (auto& [name, p] : params_) p.trainable = trainable;
}

std::uint64_t ParamStore::checksum(const Matrix& m) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (double v : m.data()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace rsak::train
