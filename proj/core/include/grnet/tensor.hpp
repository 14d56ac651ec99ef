#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "grnet/errors.hpp"

namespace grnet {

// Dense row-major tensor of real scalars. Shapes are explicit: there is no
// implicit broadcasting anywhere in the engine; mismatched shapes are
// reported as dimension errors naming both sides.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::int64_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw DimensionError("tensor extent must be positive, got " + shape_string_of(shape_));
      n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), S(0));
  }

  Tensor(std::vector<int> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    std::int64_t n = 1;
    for (int d : shape_) n *= d;
    if (n != static_cast<std::int64_t>(data_.size()))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string_of(shape_));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, S v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor from_vector(std::vector<S> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  }

  static Tensor from_matrix(int rows, int cols, std::vector<S> v) {
    return Tensor({rows, cols}, std::move(v));
  }

  static Tensor identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.data_[static_cast<std::size_t>(i) * n + i] = S(1);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& raw() { return data_; }
  const std::vector<S>& raw() const { return data_; }

  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  S operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Rank-2 accessors.
  S& at(int r, int c) { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  S at(int r, int c) const { return data_[static_cast<std::size_t>(r) * shape_[1] + c]; }
  int rows() const { return shape_[0]; }
  int cols() const { return shape_[1]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (S v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  void fill(S v) {
    for (auto& x : data_) x = v;
  }

  std::string shape_string() const { return shape_string_of(shape_); }

  static std::string shape_string_of(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  std::vector<int> shape_;
  std::vector<S> data_;
};

}  // namespace grnet
