#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "crossflow/error.hpp"

namespace crossflow::nn {

/// Dense row-major float tensor.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), values(count(shape), 0.0f) {}
  Tensor(std::vector<int> s, std::vector<float> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != count(shape)) throw Error("tensor value count does not match shape");
  }

  static std::size_t count(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return values.size(); }
  int dim(int i) const { return shape.at(i); }
};

}  // namespace crossflow::nn
