#include "ctstage/array.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ctstage {

Array3::Array3(Shape3 shape, std::vector<double> values) : shape_(shape), data_(values.begin(), values.end()) {
  require(data_.size() == shape[0] * shape[1] * shape[2],
          "array value count does not match shape " + shape_string(shape));
}

bool Array3::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Array3::min() const {
  require(!data_.empty(), "min of empty array");
  return *std::min_element(data_.begin(), data_.end());
}

double Array3::max() const {
  require(!data_.empty(), "max of empty array");
  return *std::max_element(data_.begin(), data_.end());
}

Array3& Array3::operator+=(const Array3& other) {
  require(shape_ == other.shape_, "shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Array3& Array3::operator-=(const Array3& other) {
  require(shape_ == other.shape_, "shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Array3& Array3::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Array3 operator+(Array3 a, const Array3& b) { return a += b; }
Array3 operator-(Array3 a, const Array3& b) { return a -= b; }
Array3 operator*(Array3 a, double s) { return a *= s; }

std::string shape_string(const Shape3& s) {
  std::ostringstream os;
  os << '(' << s[0] << ", " << s[1] << ", " << s[2] << ')';
  return os.str();
}

void validate_angles(std::span<const double> angles, std::size_t expected) {
  require(angles.size() == expected, "angle count " + std::to_string(angles.size()) +
                                         " does not match stack length " + std::to_string(expected));
  for (std::size_t i = 0; i < angles.size(); ++i) {
    require(std::isfinite(angles[i]) && angles[i] >= 0.0 && angles[i] < std::numbers::pi,
            "angle " + std::to_string(i) + " outside [0, pi)");
    if (i > 0) require(angles[i] > angles[i - 1], "angles must be strictly increasing");
  }
}

void ProjectionStack::validate() const {
  require(!data.empty(), "projection stack is empty");
  require(data.all_finite(), "projection stack contains non-finite values");
  validate_angles(angles, data.dim(0));
}

void SinogramStack::validate() const {
  require(!data.empty(), "sinogram stack is empty");
  require(data.all_finite(), "sinogram stack contains non-finite values");
  validate_angles(angles, data.dim(1));
}

void Volume::validate() const {
  require(!data.empty(), "volume is empty");
  require(data.all_finite(), "volume contains non-finite values");
}

}  // namespace ctstage
