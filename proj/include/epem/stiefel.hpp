#pragma once

#include <functional>
#include <vector>

#include "epem/types.hpp"

namespace epem {

/* Tangent projection at X: Z - X (X'Z + Z'X) / 2. */
Matrix projectToTangent(const Matrix& X, const Matrix& Z);

/*
 * First order retraction: the Q factor of a QR factorization of X + V with
 * the diagonal of R forced positive so the result is unique.
 */
Matrix qrRetract(const Matrix& X, const Matrix& V);

/*
 * One term of the orientation objective
 *
 *   f(X) = sum_g tr{ (Q_g X A_g^{-1} X')^{beta_g} }
 *
 * where Q_g is symmetric positive semidefinite and aInv holds the diagonal
 * of A_g^{-1}.  The matrix power is taken through the positive branch of the
 * similar symmetric matrix Q^{1/2} X A^{-1} X' Q^{1/2}.
 */
struct TracePowerTerm {
  Matrix Q;
  Vector aInv;
  double beta = 1.0;
};

double tracePowerObjective(const Matrix& X,
                           const std::vector<TracePowerTerm>& terms);

/*
 * Unconstrained gradient R = sum_g 2 beta_g (Q_g X A_g^{-1} X')^{beta_g - 1}
 * Q_g X A_g^{-1}, then the Riemannian gradient R - X R' X / 2 - X X' R / 2.
 * Rounding eigenvalues below zero are clamped to zero before the power.
 */
Matrix riemannianGradForTracePower(const Matrix& X,
                                   const std::vector<TracePowerTerm>& terms);

struct LineSearchConfig {
  double initialStep = 1.0;
  double backtrackFactor = 0.5;
  double sufficientDecrease = 1e-4;
  int maxBacktracks = 30;
};

struct LineSearchResult {
  Matrix X;
  bool accepted = false;
  double objective = 0.0;
};

/*
 * Armijo backtracking along -grad from X, minimizing f.  Accepts the first
 * step with f(Y) <= f(X) - c t |grad|_F^2; returns (X, false) if no step
 * within maxBacktracks qualifies.  A zero gradient returns immediately.
 */
LineSearchResult armijoStep(const std::function<double(const Matrix&)>& f,
                            const Matrix& X, const Matrix& grad,
                            const LineSearchConfig& config = {});

}  // namespace epem
