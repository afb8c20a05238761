#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cowdiff {

/// Height x width x channels of a canvas. Elements are stored row-major with
/// channels innermost (raster order).
struct Shape {
  int height = 0;
  int width = 0;
  int channels = 1;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  [[nodiscard]] bool valid() const { return height > 0 && width > 0 && channels > 0; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense real-valued image tensor. Values are nominally in [-1, 1] at step 0
/// but nothing here enforces a range.
class Canvas {
 public:
  Canvas() = default;
  explicit Canvas(Shape shape, double fill = 0.0);
  Canvas(Shape shape, std::vector<double> values);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }
  [[nodiscard]] double at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }

  [[nodiscard]] std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(shape_.width) +
            static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(shape_.channels) +
           static_cast<std::size_t>(ch);
  }

  [[nodiscard]] bool all_finite() const;

  /// Copies rows [row, row+h) x cols [col, col+w) into a new canvas.
  [[nodiscard]] Canvas crop(int row, int col, int h, int w) const;
  /// Writes `patch` with its top-left corner at (row, col).
  void paste(const Canvas& patch, int row, int col);

  friend bool operator==(const Canvas&, const Canvas&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void require_same_shape(const Canvas& a, const Canvas& b, const char* what);

/// sqrt(sum of squares).
double l2_norm(std::span<const double> v);
/// ||a - b|| / ||b||.
double relative_l2(const Canvas& a, const Canvas& reference);

}  // namespace cowdiff
