#include "destiny/penalty.hpp"

#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <string>

namespace destiny {

StiefelPoint::StiefelPoint(RealMatrix X) : X_(std::move(X)) {
  if (X_.rows() < X_.cols()) {
    throw std::invalid_argument("StiefelPoint: need n >= p, got " +
                                std::to_string(X_.rows()) + "x" +
                                std::to_string(X_.cols()));
  }
  if (!X_.allFinite()) {
    throw std::invalid_argument("StiefelPoint: entries must be finite");
  }
  const double res = orth_residual(X_).norm();
  if (!(res <= kConstructionTol)) {
    throw std::invalid_argument(
        "StiefelPoint: columns not orthonormal, ||X^T X - I||_F = " +
        std::to_string(res));
  }
}

RealMatrix sym(const RealMatrix& B) {
  if (B.rows() != B.cols()) {
    throw std::invalid_argument("sym: matrix must be square");
  }
  // a + b == b + a in IEEE arithmetic, so this is exactly symmetric.
  return (B + B.transpose()) / 2.0;
}

RealMatrix orth_residual(const RealMatrix& X) {
  if (X.rows() < X.cols()) {
    throw std::invalid_argument("orth_residual: need n >= p");
  }
  RealMatrix R = sym(X.transpose() * X);
  R.diagonal().array() -= 1.0;
  return R;
}

RealMatrix cube(const RealMatrix& X) { return X * (X.transpose() * X); }

double b_value(const RealMatrix& X) {
  return 0.25 * orth_residual(X).squaredNorm();
}

RealMatrix b_gradient(const RealMatrix& X) { return X * orth_residual(X); }

double g_value(const RealMatrix& X, const ObjectiveFn& f) {
  return 1.5 * f(X) - 0.5 * f(cube(X));
}

double h_value(const RealMatrix& X, const ObjectiveFn& f, double beta) {
  return g_value(X, f) + beta * b_value(X);
}

namespace {

void check_same_shape(const RealMatrix& X, const RealMatrix& G,
                      const char* who) {
  if (G.rows() != X.rows() || G.cols() != X.cols()) {
    throw std::invalid_argument(std::string(who) +
                                ": gradient shape does not match X");
  }
}

}  // namespace

RealMatrix grad_g(const RealMatrix& X, const RealMatrix& grad_f_at_x,
                  const RealMatrix& grad_f_at_cube) {
  check_same_shape(X, grad_f_at_x, "grad_g");
  check_same_shape(X, grad_f_at_cube, "grad_g");
  const RealMatrix gram = X.transpose() * X;
  return 1.5 * grad_f_at_x - 0.5 * grad_f_at_cube * gram -
         X * sym(X.transpose() * grad_f_at_cube);
}

RealMatrix grad_h(const RealMatrix& X, const RealMatrix& grad_f_at_x,
                  const RealMatrix& grad_f_at_cube, double beta) {
  return grad_g(X, grad_f_at_x, grad_f_at_cube) + beta * b_gradient(X);
}

RealMatrix direction_g(const RealMatrix& X, const RealMatrix& grad_f_at_cube) {
  check_same_shape(X, grad_f_at_cube, "direction_g");
  const RealMatrix gram = X.transpose() * X;
  return 1.5 * grad_f_at_cube - 0.5 * grad_f_at_cube * gram -
         X * sym(X.transpose() * grad_f_at_cube);
}

RealMatrix direction_h(const RealMatrix& X, const RealMatrix& grad_f_at_cube,
                       double beta) {
  return direction_g(X, grad_f_at_cube) + beta * b_gradient(X);
}

RealMatrix tangent_component(const RealMatrix& X, const RealMatrix& grad) {
  check_same_shape(X, grad, "tangent_component");
  return grad - X * sym(X.transpose() * grad);
}

RealMatrix riemannian_gradient(const RealMatrix& X,
                               const RealMatrix& grad_f_at_x) {
  const double res = orth_residual(X).norm();
  if (!(res <= 1e-6)) {
    throw std::domain_error(
        "riemannian_gradient: X is not on the manifold, ||X^T X - I||_F = " +
        std::to_string(res));
  }
  return tangent_component(X, grad_f_at_x);
}

StiefelPoint orthonormalize(const RealMatrix& M) {
  const Eigen::Index n = M.rows();
  const Eigen::Index p = M.cols();
  if (n < p) {
    throw std::invalid_argument("orthonormalize: need n >= p");
  }
  Eigen::HouseholderQR<RealMatrix> qr(M);
  RealMatrix Q = qr.householderQ() * RealMatrix::Identity(n, p);
  const RealMatrix R =
      qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const double rank_tol = std::numeric_limits<double>::epsilon() *
                          static_cast<double>(std::max(n, p)) *
                          std::max(1.0, M.norm());
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(R(j, j)) <= rank_tol) {
      throw std::invalid_argument(
          "orthonormalize: input is numerically rank-deficient at column " +
          std::to_string(j));
    }
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return StiefelPoint(std::move(Q));
}

bool in_region(const RealMatrix& X) {
  return orth_residual(X).norm() <= 1.0 / 6.0 + 1e-12;
}

}  // namespace destiny
