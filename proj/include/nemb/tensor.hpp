#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nemb {

// Dense row-major tensor of doubles. Shapes are small (desk-scale models),
// so no striding or views; flattening order is row-major everywhere.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
    data.assign(element_count(shape), 0.0);
  }
  Tensor(std::vector<size_t> s, std::vector<double> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != element_count(shape)) {
      throw std::invalid_argument("tensor shape/data size mismatch");
    }
  }

  static size_t element_count(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  size_t size() const { return data.size(); }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }
  double& at2(size_t i, size_t j) { return data[i * cols() + j]; }
  double at2(size_t i, size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace nemb
