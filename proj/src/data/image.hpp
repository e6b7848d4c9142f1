#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace dynacl {

// A batch of images in NCHW layout with pixel values in [0,1]. Labels are
// optional; empty means unlabeled.
struct ImageBatch {
  Tensor data;              // (N, C, H, W)
  std::vector<int> labels;  // size N or empty

  ImageBatch() = default;
  ImageBatch(int n, int c, int h, int w) : data(std::vector<int>{n, c, h, w}) {}

  int count() const { return data.ndim() == 4 ? data.dim(0) : 0; }
  int channels() const { return data.dim(1); }
  int height() const { return data.dim(2); }
  int width() const { return data.dim(3); }
  size_t image_size() const {
    return size_t(channels()) * size_t(height()) * size_t(width());
  }

  double* image(int i) { return data.data() + size_t(i) * image_size(); }
  const double* image(int i) const {
    return data.data() + size_t(i) * image_size();
  }

  bool labeled() const { return !labels.empty(); }

  void validate() const {
    contract(data.ndim() == 4, "image batch: data must be NCHW");
    contract(labels.empty() || int(labels.size()) == count(),
             "image batch: label count mismatch");
  }
};

}  // namespace dynacl
