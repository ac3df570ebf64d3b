#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <utility>

namespace destiny {

/// Dense real matrix, the universal carrier for iterates, gradients and
/// data blocks.
using RealMatrix = Eigen::MatrixXd;

/// Penalty parameter of the orthogonality penalty. Validated positive;
/// the penalty evaluation routines additionally accept the degenerate
/// value 0 as a plain double for testing purposes.
class PenaltyParam {
 public:
  explicit PenaltyParam(double value) : value_(value) {
    if (!(value > 0.0)) {
      throw std::invalid_argument("PenaltyParam: beta must be positive");
    }
  }

  double value() const { return value_; }

 private:
  double value_;
};

/// An n x p matrix (n >= p) with orthonormal columns.
/// Construction enforces ||X^T X - I_p||_F <= 1e-12.
class StiefelPoint {
 public:
  static constexpr double kConstructionTol = 1e-12;

  explicit StiefelPoint(RealMatrix X);

  const RealMatrix& matrix() const { return X_; }
  Eigen::Index rows() const { return X_.rows(); }
  Eigen::Index cols() const { return X_.cols(); }

 private:
  RealMatrix X_;
};

}  // namespace destiny
