#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctstage/aligned_vector.hpp"
#include "ctstage/error.hpp"

namespace ctstage {

using Shape3 = std::array<std::size_t, 3>;

/// Dense row-major 3-axis array of doubles. The last axis is contiguous.
class Array3 {
 public:
  Array3() = default;
  explicit Array3(Shape3 shape, double fill = 0.0)
      : shape_(shape), data_(shape[0] * shape[1] * shape[2], fill) {}
  Array3(Shape3 shape, std::vector<double> values);

  const Shape3& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const double& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  AlignedVector& storage() noexcept { return data_; }
  const AlignedVector& storage() const noexcept { return data_; }

  /// Contiguous view of the 2-D plane at index i of axis 0.
  std::span<double> plane(std::size_t i) {
    const std::size_t n = shape_[1] * shape_[2];
    return std::span<double>(data_).subspan(i * n, n);
  }
  std::span<const double> plane(std::size_t i) const {
    const std::size_t n = shape_[1] * shape_[2];
    return std::span<const double>(data_).subspan(i * n, n);
  }

  bool all_finite() const noexcept;
  double min() const;
  double max() const;

  Array3& operator+=(const Array3& other);
  Array3& operator-=(const Array3& other);
  Array3& operator*=(double s);

  friend bool operator==(const Array3&, const Array3&) = default;

 private:
  Shape3 shape_{0, 0, 0};
  AlignedVector data_;
};

Array3 operator+(Array3 a, const Array3& b);
Array3 operator-(Array3 a, const Array3& b);
Array3 operator*(Array3 a, double s);

std::string shape_string(const Shape3& s);

/// Attenuation images indexed (angle, detector row, detector column).
struct ProjectionStack {
  Array3 data;
  std::vector<double> angles;

  std::size_t n_angles() const { return data.dim(0); }
  std::size_t rows() const { return data.dim(1); }
  std::size_t cols() const { return data.dim(2); }
  void validate() const;
};

/// Projection data regrouped by detector row: (row, angle, column).
struct SinogramStack {
  Array3 data;
  std::vector<double> angles;

  std::size_t rows() const { return data.dim(0); }
  std::size_t n_angles() const { return data.dim(1); }
  std::size_t cols() const { return data.dim(2); }
  void validate() const;
};

/// Reconstructed slices (slice, y, x).
struct Volume {
  Array3 data;
  bool mask_applied = false;

  std::size_t slices() const { return data.dim(0); }
  void validate() const;
};

void validate_angles(std::span<const double> angles, std::size_t expected);

}  // namespace ctstage
