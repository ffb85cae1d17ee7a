#pragma once

#include <string>
#include <vector>

#include "guidecap/errors.hpp"

namespace guidecap::numeric {

// Dense row-major array of rank 1 or 2. Element type is double everywhere in
// memory; checkpoints serialize as little-endian float32 (see checkpoint.hpp).
class Array {
 public:
  Array() = default;
  Array(std::vector<int> shape, std::vector<double> data);

  static Array zeros(const std::vector<int>& shape);
  static Array full(const std::vector<int>& shape, double v);
  static Array from_vector(std::vector<double> data);
  static Array from_matrix(int rows, int cols, std::vector<double> data);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

  bool same_shape(const Array& o) const { return shape_ == o.shape_; }

  void fill(double v);

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

bool all_finite(const Array& a);

// Throws NumericError naming the producing op when a holds NaN or Inf.
void require_finite(const Array& a, const char* op);

std::string shape_str(const std::vector<int>& shape);

}  // namespace guidecap::numeric
