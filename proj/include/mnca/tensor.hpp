#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mnca {

/// Row-major dense matrix. Grids are stored as channels x (height*width), so
/// each channel plane is contiguous and pixel (y, x) is column y*width + x.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

/// Raised when a configuration is inconsistent (shapes, ranges, files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an API is called with arguments violating its contract.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN/Inf appears in a state or gradient.
class NumericalDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A C x H x W block of cell states.
template <typename Scalar>
struct Grid {
  int height = 0;
  int width = 0;
  Mat<Scalar> data;

  Grid() = default;
  Grid(int channels, int h, int w) : height(h), width(w), data(Mat<Scalar>::Zero(channels, Index(h) * w)) {}

  int channels() const { return static_cast<int>(data.rows()); }
  Index pixels() const { return Index(height) * width; }
  Index pixel(int y, int x) const { return Index(y) * width + x; }

  Scalar& at(int c, int y, int x) { return data(c, pixel(y, x)); }
  Scalar at(int c, int y, int x) const { return data(c, pixel(y, x)); }

  bool same_shape(const Grid& other) const {
    return height == other.height && width == other.width && channels() == other.channels();
  }

  template <typename Other>
  Grid<Other> cast() const {
    Grid<Other> g;
    g.height = height;
    g.width = width;
    g.data = data.template cast<Other>();
    return g;
  }
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace mnca
