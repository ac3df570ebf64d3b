#pragma once

#include <functional>

#include "destiny/types.hpp"

namespace destiny {

/// Scalar objective evaluator, e.g. the network-average of the local
/// objectives.
using ObjectiveFn = std::function<double(const RealMatrix&)>;

/// Symmetric part (B + B^T) / 2 of a square matrix. The result is exactly
/// symmetric: mirrored entries are averaged pairwise.
RealMatrix sym(const RealMatrix& B);

/// Orthogonality residual X^T X - I_p, returned exactly symmetric.
/// Requires n >= p.
RealMatrix orth_residual(const RealMatrix& X);

/// X X^T X, evaluated as X (X^T X) so the cost stays O(n p^2).
RealMatrix cube(const RealMatrix& X);

/// Penalty value b(X) = (1/4) ||X^T X - I_p||_F^2.
double b_value(const RealMatrix& X);

/// Penalty gradient X (X^T X - I_p).
RealMatrix b_gradient(const RealMatrix& X);

/// g(X) = (3/2) f(X) - (1/2) f(X X^T X). Collapses to f(X) on the manifold.
double g_value(const RealMatrix& X, const ObjectiveFn& f);

/// h(X) = g(X) + beta * b(X), the penalized objective driving the solver.
double h_value(const RealMatrix& X, const ObjectiveFn& f, double beta);

/// Exact gradient of g:
///   (3/2) grad_f(X) - (1/2) grad_f(XX^TX) X^TX - X sym(X^T grad_f(XX^TX)).
/// Both gradient evaluations are supplied by the caller.
RealMatrix grad_g(const RealMatrix& X, const RealMatrix& grad_f_at_x,
                  const RealMatrix& grad_f_at_cube);

/// Exact gradient of h: grad_g + beta * b_gradient.
RealMatrix grad_h(const RealMatrix& X, const RealMatrix& grad_f_at_x,
                  const RealMatrix& grad_f_at_cube, double beta);

/// Search direction
///   G(X) = (3/2) C - (1/2) C X^TX - X sym(X^T C),   C = grad_f(X X^T X).
/// Only the gradient at the cube point is needed, so a single gradient
/// evaluation per iteration suffices. Equals the Riemannian gradient when
/// X has orthonormal columns.
RealMatrix direction_g(const RealMatrix& X, const RealMatrix& grad_f_at_cube);

/// H(X) = G(X) + beta * X (X^T X - I_p).
RealMatrix direction_h(const RealMatrix& X, const RealMatrix& grad_f_at_cube,
                       double beta);

/// Tangent-space component grad - X sym(X^T grad). No feasibility check;
/// callers that need the checked variant use riemannian_gradient.
RealMatrix tangent_component(const RealMatrix& X, const RealMatrix& grad);

/// Riemannian gradient grad_f(X) - X sym(X^T grad_f(X)) on the Stiefel
/// manifold. Throws std::domain_error when ||X^T X - I_p||_F > 1e-6.
RealMatrix riemannian_gradient(const RealMatrix& X,
                               const RealMatrix& grad_f_at_x);

/// Thin QR orthonormalization with the sign convention that the triangular
/// factor has a nonnegative diagonal, so the output is a deterministic
/// function of M. Throws std::invalid_argument when M is numerically
/// rank-deficient.
StiefelPoint orthonormalize(const RealMatrix& M);

/// Membership in the bounded region { X : ||X^T X - I_p||_F <= 1/6 } on
/// which the squared norm of H dominates the orthogonality violation for
/// large enough beta. The boundary is included; a 1e-12 slack absorbs
/// rounding in the residual evaluation so points constructed on the
/// boundary (e.g. through sqrt) stay inside.
bool in_region(const RealMatrix& X);

}  // namespace destiny
