#include "guidecap/array.hpp"

#include <cmath>
#include <cstddef>

namespace guidecap::numeric {

namespace {

std::size_t checked_numel(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("array rank must be 1 or 2, got " + shape_str(shape));
  }
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("array dims must be positive, got " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Array::Array(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size()) {
    throw DimensionError("array data size does not match shape " + shape_str(shape_));
  }
}

Array Array::zeros(const std::vector<int>& shape) {
  return Array(shape, std::vector<double>(checked_numel(shape), 0.0));
}

Array Array::full(const std::vector<int>& shape, double v) {
  return Array(shape, std::vector<double>(checked_numel(shape), v));
}

Array Array::from_vector(std::vector<double> data) {
  const int n = static_cast<int>(data.size());
  return Array({n}, std::move(data));
}

Array Array::from_matrix(int rows, int cols, std::vector<double> data) {
  return Array({rows, cols}, std::move(data));
}

void Array::fill(double v) {
  for (double& x : data_) x = v;
}

bool all_finite(const Array& a) {
  const double* p = a.data();
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

void require_finite(const Array& a, const char* op) {
  if (!all_finite(a)) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace guidecap::numeric
