#pragma once

#include <cstdint>
#include <vector>

#include "ssc/common.hpp"

namespace ssc {

/// Row-major 2-D raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        cells_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw Error("negative grid dimension");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  T& at(int r, int c) { return cells_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const {
    return cells_[static_cast<std::size_t>(r) * cols_ + c];
  }
  T& operator[](std::size_t i) { return cells_[i]; }
  const T& operator[](std::size_t i) const { return cells_[i]; }

  bool contains(int r, int c) const {
    return r >= 0 && c >= 0 && r < rows_ && c < cols_;
  }
  bool same_shape(const Grid<T>& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return rows_ == o.rows() && cols_ == o.cols();
  }

  std::vector<T>& cells() { return cells_; }
  const std::vector<T>& cells() const { return cells_; }

  bool operator==(const Grid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> cells_;
};

using Mask = Grid<std::uint8_t>;

/// Planar RGB image with channel values in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 planes of width*height

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(3u * w * h, 0.0f) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const RgbImage&) const = default;
};

}  // namespace ssc
