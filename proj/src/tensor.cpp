#include "cowdiff/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace cowdiff {

std::string Shape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Canvas::Canvas(Shape shape, double fill) : shape_(shape) {
  if (!shape.valid()) {
    throw std::invalid_argument("Canvas: shape must be positive, got " + shape.str());
  }
  data_.assign(shape.size(), fill);
}

Canvas::Canvas(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (!shape.valid()) {
    throw std::invalid_argument("Canvas: shape must be positive, got " + shape.str());
  }
  if (data_.size() != shape.size()) {
    throw std::invalid_argument("Canvas: " + std::to_string(data_.size()) +
                                " values do not fill shape " + shape.str());
  }
}

bool Canvas::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Canvas Canvas::crop(int row, int col, int h, int w) const {
  if (row < 0 || col < 0 || h <= 0 || w <= 0 || row + h > shape_.height ||
      col + w > shape_.width) {
    throw std::out_of_range("Canvas::crop: region out of bounds");
  }
  Canvas out(Shape{h, w, shape_.channels});
  const auto row_len = static_cast<std::size_t>(w) * static_cast<std::size_t>(shape_.channels);
  for (int r = 0; r < h; ++r) {
    const double* src = data_.data() + index(row + r, col);
    std::copy(src, src + row_len, out.data_.data() + out.index(r, 0));
  }
  return out;
}

void Canvas::paste(const Canvas& patch, int row, int col) {
  const Shape& ps = patch.shape();
  if (ps.channels != shape_.channels) {
    throw std::invalid_argument("Canvas::paste: channel mismatch");
  }
  if (row < 0 || col < 0 || row + ps.height > shape_.height || col + ps.width > shape_.width) {
    throw std::out_of_range("Canvas::paste: region out of bounds");
  }
  const auto row_len = static_cast<std::size_t>(ps.width) * static_cast<std::size_t>(ps.channels);
  for (int r = 0; r < ps.height; ++r) {
    const double* src = patch.data_.data() + patch.index(r, 0);
    std::copy(src, src + row_len, data_.data() + index(row + r, col));
  }
}

void require_same_shape(const Canvas& a, const Canvas& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double relative_l2(const Canvas& a, const Canvas& reference) {
  require_same_shape(a, reference, "relative_l2");
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - reference[i];
    num += d * d;
  }
  const double den = l2_norm(reference.values());
  if (den == 0.0) throw std::invalid_argument("relative_l2: zero reference");
  return std::sqrt(num) / den;
}

}  // namespace cowdiff
