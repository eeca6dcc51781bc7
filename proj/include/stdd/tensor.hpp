#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stdd/error.hpp"

namespace stdd {

#ifdef STDD_REAL_FLOAT32
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major array. A rank-0 tensor (empty shape) holds one scalar.
class Tensor {
 public:
  Tensor() : shape_{0} {}

  explicit Tensor(Shape shape, real fill = 0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(real v) { return Tensor(Shape{}, std::vector<real>{v}); }

  static Tensor matrix(std::initializer_list<std::initializer_list<real>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<real> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  static Tensor vector(std::initializer_list<real> values) {
    return Tensor({values.size()}, std::vector<real>(values));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1;
    return t;
  }

  template <class Rng>
  static Tensor uniform(Shape shape, real lo, real hi, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data_) v = static_cast<real>(dist(rng));
    return t;
  }

  template <class Rng>
  static Tensor normal(Shape shape, real stddev, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data_) v = static_cast<real>(dist(rng));
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  // Extent of the trailing axis and the number of trailing-axis slices.
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  std::vector<real>& data() noexcept { return data_; }
  const std::vector<real>& data() const noexcept { return data_; }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }

  real& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  real at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  real item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size())
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  // Row i of a rank-2 tensor, or the i-th slice along axis 0 in general.
  Tensor slice0(std::size_t i) const {
    if (rank() == 0 || i >= shape_[0]) throw DimensionError("slice0 index out of range");
    Shape sub(shape_.begin() + 1, shape_.end());
    const std::size_t n = shape_size(sub);
    return Tensor(sub, std::vector<real>(data_.begin() + static_cast<std::ptrdiff_t>(i * n),
                                         data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
  }

  bool all_finite() const {
    for (real v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<real> data_;
};

// Stacks equally shaped tensors along a new leading axis.
inline Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("stack of zero tensors");
  Shape shape = parts.front().shape();
  std::vector<real> data;
  data.reserve(parts.size() * parts.front().size());
  for (const auto& p : parts) {
    if (p.shape() != shape) throw DimensionError("stack: shape mismatch");
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  shape.insert(shape.begin(), parts.size());
  return Tensor(std::move(shape), std::move(data));
}

inline real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  real m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max<real>(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace stdd
