#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "aqua/errors.hpp"
#include "aqua/rng.hpp"

namespace aqua {

/// NCHW extents of a dense tensor.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::int64_t numel() const {
    return static_cast<std::int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

/// Dense real tensor, row-major, channel-contiguous per image.
/// float carries training/inference state; double is used where finite
/// differences need the extra precision.
template <typename T = float>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{0, 0, 0, 0} {}
  explicit Tensor(Shape s) : shape_(s), data_(check_size(s), T(0)) {}
  Tensor(Shape s, T fill) : shape_(s), data_(check_size(s), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape_(s), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_.numel()) {
      throw ContractError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.str());
    }
  }

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, T v) { return Tensor(s, v); }

  static Tensor uniform(Shape s, std::uint64_t seed, std::string_view stream,
                        T lo = T(-1), T hi = T(1)) {
    Tensor t(s);
    CounterRng rng(seed, stream);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      t.data_[static_cast<std::size_t>(i)] =
          static_cast<T>(rng.uniform(static_cast<std::uint64_t>(i),
                                     static_cast<double>(lo), static_cast<double>(hi)));
    }
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  T& at(int in, int ic, int iy, int ix) {
    return data_[idx(in, ic, iy, ix)];
  }
  const T& at(int in, int ic, int iy, int ix) const {
    return data_[idx(in, ic, iy, ix)];
  }

  /// Pointer to the start of one (image, channel) plane.
  T* plane(int in, int ic) { return data_.data() + idx(in, ic, 0, 0); }
  const T* plane(int in, int ic) const { return data_.data() + idx(in, ic, 0, 0); }

  void fill(T v) { data_.assign(data_.size(), v); }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::size_t idx(int in, int ic, int iy, int ix) const {
    return static_cast<std::size_t>(((static_cast<std::int64_t>(in) * shape_.c + ic) * shape_.h + iy) * shape_.w + ix);
  }
  static std::size_t check_size(Shape s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
      throw ContractError("negative tensor extent in shape " + s.str());
    }
    return static_cast<std::size_t>(s.numel());
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace aqua
