#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylemix {

// Dense row-major float tensor, up to 4 dimensions (NCHW for images).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0f);
  }
  Tensor(std::vector<int> shape, std::vector<float> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    int64_t n = 1;
    for (int d : shape_) n *= d;
    if (static_cast<int64_t>(data_.size()) != n)
      throw std::invalid_argument("Tensor: data/shape mismatch");
  }

  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // (n, c) indexing for 2-d tensors.
  float& at2(int n, int c) { return data_[static_cast<size_t>(n) * shape_[1] + c]; }
  float at2(int n, int c) const { return data_[static_cast<size_t>(n) * shape_[1] + c]; }

  // (n, c, h, w) indexing for 4-d tensors.
  float& at4(int n, int c, int h, int w) {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  float at4(int n, int c, int h, int w) const {
    return data_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    assert(same_shape(o));
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    assert(same_shape(o));
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(float s) {
    for (float& v : data_) v *= s;
    return *this;
  }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + ")";
  }

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

inline Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
inline Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
inline Tensor operator*(Tensor a, float s) { return a *= s; }

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

}  // namespace stylemix
