#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace postgan {

// Dense row-major tensor, rank 1..3. The common layout in this codebase is
// (channels, time) with time fastest.
template <class S>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> sh) : shape(std::move(sh)) {
    data.assign(static_cast<size_t>(numel_of(shape)), S(0));
  }
  Tensor(std::vector<int64_t> sh, std::vector<S> d)
      : shape(std::move(sh)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static int64_t numel_of(const std::vector<int64_t>& sh) {
    int64_t n = 1;
    for (int64_t d : sh) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dim");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  // (channels, time) accessors
  int64_t channels() const { return shape.at(0); }
  int64_t length() const { return shape.at(shape.size() - 1); }
  S& at(int64_t c, int64_t t) { return data[static_cast<size_t>(c * length() + t)]; }
  S at(int64_t c, int64_t t) const { return data[static_cast<size_t>(c * length() + t)]; }

  S* row(int64_t c) { return data.data() + c * length(); }
  const S* row(int64_t c) const { return data.data() + c * length(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace postgan
