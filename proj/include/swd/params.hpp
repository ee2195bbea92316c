#pragma once

#include <map>
#include <string>
#include <vector>

#include "swd/rng.hpp"
#include "swd/tensor.hpp"

namespace swd {

// Named parameter tensors. std::map keeps iteration order deterministic,
// which the checkpoint format and the optimizer rely on.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> t) {
    if (by_name_.count(name))
      throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    by_name_.emplace(name, t);
    return t;
  }

  Tensor<T> add_he_normal(const std::string& name, Shape shape, Rng& rng, int fan_in,
                          bool trainable = true) {
    Array<T> a(shape);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : a.data) v = static_cast<T>(rng.normal() * std_dev);
    return add(name, Tensor<T>::leaf(std::move(a), trainable, name));
  }

  Tensor<T> add_zeros(const std::string& name, Shape shape, bool trainable = true) {
    return add(name, Tensor<T>::leaf(Array<T>(std::move(shape)), trainable, name));
  }

  bool has(const std::string& name) const { return by_name_.count(name) != 0; }

  Tensor<T> get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
      throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : by_name_) out.push_back(k);
    return out;
  }

  std::vector<Tensor<T>> trainable() const {
    std::vector<Tensor<T>> out;
    for (const auto& [k, v] : by_name_)
      if (v.requires_grad()) out.push_back(v);
    return out;
  }

  void zero_grad() {
    for (auto& [k, v] : by_name_) {
      auto& g = v.mutable_grad();
      std::fill(g.begin(), g.end(), T(0));
    }
  }

  size_t size() const { return by_name_.size(); }
  auto begin() const { return by_name_.begin(); }
  auto end() const { return by_name_.end(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [k, v] : by_name_)
      out.add(k, Tensor<U>::leaf(v.to_array().template cast<U>(), v.requires_grad(), k));
    return out;
  }

 private:
  std::map<std::string, Tensor<T>> by_name_;
};

}  // namespace swd
