#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "skgait/error.hpp"

namespace skgait {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);
inline std::size_t element_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major tensor of rank <= 4. Value semantics.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0)) : shape_(std::move(shape)), values_(element_count(shape_), fill) {
    check_rank();
  }
  Tensor(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_rank();
    if (values_.size() != element_count(shape_))
      throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                       " values");
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  Real* data() { return values_.data(); }
  const Real* data() const { return values_.data(); }
  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }
  std::vector<Real>& storage() { return values_; }

  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }

  Real& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  Real at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  Real& at(std::size_t i, std::size_t j, std::size_t k) { return values_[(i * shape_[1] + j) * shape_[2] + k]; }
  Real at(std::size_t i, std::size_t j, std::size_t k) const { return values_[(i * shape_[1] + j) * shape_[2] + k]; }
  Real& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return values_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  Real at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return values_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }
  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
  }

  template <typename To>
  Tensor<To> cast() const {
    std::vector<To> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(), [](Real v) { return static_cast<To>(v); });
    return Tensor<To>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_rank() const {
    if (shape_.empty() || shape_.size() > 4) throw ShapeError("tensor rank must be 1..4, got " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<Real> values_;
};

// Trainable tensor plus its gradient accumulator.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<Real> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(Real(0)); }
};

}  // namespace skgait
