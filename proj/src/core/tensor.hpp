#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace dynacl {

// Dense row-major double tensor. Value semantics throughout; hot paths work
// on raw pointers from data().
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel(shape_), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    contract(data_.size() == numel(shape_), "tensor: values do not match shape");
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  static size_t numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
      contract(d >= 0, "tensor: negative dimension");
      n *= size_t(d);
    }
    return n;
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int ndim() const { return int(shape_.size()); }
  int dim(int i) const { return shape_.at(size_t(i)); }
  const std::vector<int>& shape() const { return shape_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  void fill(double v) { data_.assign(data_.size(), v); }
  void zero() { fill(0.0); }

  // Reinterprets the contiguous storage under a new shape.
  void reshape(std::vector<int> shape) {
    contract(numel(shape) == data_.size(), "tensor: reshape size mismatch");
    shape_ = std::move(shape);
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  contract(a.same_shape(b), std::string(where) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

}  // namespace dynacl
