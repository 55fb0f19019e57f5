#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wtest/error.hpp"

namespace wtest {

/// An empirical measure: n observations in R^d, stored one per row.
class Sample {
 public:
  Sample() = default;

  explicit Sample(Eigen::MatrixXd data, bool unit_box = false)
      : data_(std::move(data)), unit_box_(unit_box) {
    validate();
  }

  static Sample from_column(const std::vector<double>& values) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
    return Sample(std::move(m));
  }

  std::size_t n() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(data_.cols()); }
  const Eigen::MatrixXd& data() const { return data_; }
  auto row(std::size_t i) const { return data_.row(static_cast<Eigen::Index>(i)); }
  double operator()(std::size_t i, std::size_t j) const {
    return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  bool unit_box() const { return unit_box_; }

 private:
  void validate() const {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw InputError("sample must have at least one row and one column");
    }
    if (!data_.allFinite()) throw InputError("sample contains non-finite entries");
    if (unit_box_ && (data_.minCoeff() < 0.0 || data_.maxCoeff() > 1.0)) {
      throw InputError("sample flagged as unit-box has entries outside [0, 1]");
    }
  }

  Eigen::MatrixXd data_;
  bool unit_box_ = false;
};

inline void require_same_dim(const Sample& x, const Sample& y) {
  if (x.d() != y.d()) {
    throw ShapeError("dimension mismatch: " + std::to_string(x.d()) + " vs " +
                     std::to_string(y.d()));
  }
}

/// Stacks x on top of y.
inline Eigen::MatrixXd stack_rows(const Sample& x, const Sample& y) {
  require_same_dim(x, y);
  Eigen::MatrixXd out(x.data().rows() + y.data().rows(), x.data().cols());
  out << x.data(), y.data();
  return out;
}

}  // namespace wtest
