#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "common/errors.hpp"

namespace ctae {

inline int64_t numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// true when `suffix` equals the trailing dims of `shape`
inline bool is_suffix_shape(const std::vector<int64_t>& suffix,
                            const std::vector<int64_t>& shape) {
  if (suffix.size() > shape.size()) return false;
  for (size_t i = 0; i < suffix.size(); ++i)
    if (suffix[suffix.size() - 1 - i] != shape[shape.size() - 1 - i]) return false;
  return true;
}

// Row-major dense array. The autodiff tape and all model code use flat
// storage; shape is carried for checking and for (de)serialization.
template <class Real>
struct DenseArray {
  std::vector<int64_t> shape;
  std::vector<Real> data;

  DenseArray() = default;
  DenseArray(std::vector<int64_t> s, std::vector<Real> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != static_cast<int64_t>(data.size()))
      fail(ErrorKind::shape, "array data size does not match shape " + shape_str(shape));
  }

  static DenseArray zeros(std::vector<int64_t> s) {
    DenseArray a;
    a.data.assign(static_cast<size_t>(numel(s)), Real(0));
    a.shape = std::move(s);
    return a;
  }

  static DenseArray full(std::vector<int64_t> s, Real v) {
    DenseArray a;
    a.data.assign(static_cast<size_t>(numel(s)), v);
    a.shape = std::move(s);
    return a;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  Real* ptr() { return data.data(); }
  const Real* ptr() const { return data.data(); }

  // 2D helpers
  int64_t rows() const { return shape.size() >= 2 ? shape[shape.size() - 2] : 1; }
  int64_t cols() const { return shape.empty() ? 1 : shape.back(); }
};

}  // namespace ctae
