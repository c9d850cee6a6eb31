#include "epem/stiefel.hpp"

#include <cmath>

namespace epem {

Matrix projectToTangent(const Matrix& X, const Matrix& Z) {
  return Z - X * (X.transpose() * Z + Z.transpose() * X) / 2.0;
}

Matrix qrRetract(const Matrix& X, const Matrix& V) {
  const Matrix Y = X + V;
  Eigen::HouseholderQR<Matrix> qr(Y);
  Matrix Q = qr.householderQ() * Matrix::Identity(Y.rows(), Y.cols());
  const Matrix R = qr.matrixQR()
                       .topRows(Y.cols())
                       .triangularView<Eigen::Upper>();
  for (int j = 0; j < Q.cols(); ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

namespace {

Matrix symmetricHalf(const Matrix& Q) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Q);
  const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

/* Eigenvalues of Q X A^{-1} X' through the symmetric similar matrix. */
Vector clampedProductEigenvalues(const Matrix& rootQ, const Matrix& X,
                                 const Vector& aInv,
                                 Eigen::SelfAdjointEigenSolver<Matrix>& eig) {
  const Matrix Z = rootQ * X * aInv.cwiseSqrt().asDiagonal();
  eig.compute(Z * Z.transpose());
  return eig.eigenvalues().cwiseMax(0.0);
}

}  // namespace

double tracePowerObjective(const Matrix& X,
                           const std::vector<TracePowerTerm>& terms) {
  double total = 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  for (const TracePowerTerm& term : terms) {
    const Matrix rootQ = symmetricHalf(term.Q);
    const Vector ev = clampedProductEigenvalues(rootQ, X, term.aInv, eig);
    for (int j = 0; j < ev.size(); ++j)
      total += ev[j] > 0.0 ? std::pow(ev[j], term.beta) : 0.0;
  }
  return total;
}

Matrix riemannianGradForTracePower(const Matrix& X,
                                   const std::vector<TracePowerTerm>& terms) {
  Matrix R = Matrix::Zero(X.rows(), X.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  for (const TracePowerTerm& term : terms) {
    const Matrix rootQ = symmetricHalf(term.Q);
    const Vector ev = clampedProductEigenvalues(rootQ, X, term.aInv, eig);
    // (Q X A^{-1} X')^{beta-1} Q = Q^{1/2} B^{beta-1} Q^{1/2} with
    // B = Q^{1/2} X A^{-1} X' Q^{1/2}, so no inverse of Q is needed.
    Vector powered(ev.size());
    for (int j = 0; j < ev.size(); ++j)
      powered[j] = ev[j] > 0.0 ? std::pow(ev[j], term.beta - 1.0) : 0.0;
    const Matrix mid = eig.eigenvectors() * powered.asDiagonal() *
                       eig.eigenvectors().transpose();
    R += 2.0 * term.beta * rootQ * mid * rootQ * X * term.aInv.asDiagonal();
  }
  return R - X * R.transpose() * X / 2.0 - X * X.transpose() * R / 2.0;
}

LineSearchResult armijoStep(const std::function<double(const Matrix&)>& f,
                            const Matrix& X, const Matrix& grad,
                            const LineSearchConfig& config) {
  const double f0 = f(X);
  const double gradNorm2 = grad.squaredNorm();
  if (gradNorm2 == 0.0) return {X, true, f0};
  double t = config.initialStep;
  for (int k = 0; k < config.maxBacktracks; ++k) {
    const Matrix Y = qrRetract(X, -t * grad);
    const double fY = f(Y);
    if (fY <= f0 - config.sufficientDecrease * t * gradNorm2)
      return {Y, true, fY};
    t *= config.backtrackFactor;
  }
  return {X, false, f0};
}

}  // namespace epem
