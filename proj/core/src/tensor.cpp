#include "rdmd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace rdmd {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : std::invalid_argument(op + ": shape mismatch " + shape_to_string(lhs) + " vs " +
                            shape_to_string(rhs)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_to_string(shape_));
  }
  values_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (auto extent : shape_) {
    if (extent == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_to_string(shape_));
  }
  if (shape_numel(shape_) != values_.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_to_string(shape_) + " holds " +
                                std::to_string(shape_numel(shape_)) + " values, got " +
                                std::to_string(values_.size()));
  }
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  if (!t.all_finite()) throw std::invalid_argument("Tensor: non-finite value in leaf tensor");
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Tensor::matrix: ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return from_values({r, c}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() <= 1) return 1;
  throw std::logic_error("Tensor::rows on rank " + std::to_string(shape_.size()));
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  if (shape_.empty()) return 1;
  throw std::logic_error("Tensor::cols on rank " + std::to_string(shape_.size()));
}

double Tensor::item() const {
  if (values_.size() != 1) throw std::logic_error("Tensor::item on " + shape_to_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != values_.size()) throw ShapeError("reshape", shape_, shape);
  return Tensor(std::move(shape), values_);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff", a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace rdmd
