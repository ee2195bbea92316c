#pragma once

#include <vector>

#include "swd/rng.hpp"
#include "swd/tensor.hpp"

namespace swd::test {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool trainable = false,
                        std::string name = {}) {
  Array<T> a(shape);
  for (auto& v : a.data) v = static_cast<T>(rng.normal() * scale);
  return Tensor<T>::leaf(std::move(a), trainable, std::move(name));
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

}  // namespace swd::test
