#include "epem/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "epem/density.hpp"
#include "epem/scale_updates.hpp"

namespace epem {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string trajectoryMethodName(TrajectoryMethod method) {
  return method == TrajectoryMethod::FixedPoint ? "fixed_point" : "gem";
}

Matrix fixedPointSigmaStep(const Matrix& X, const Vector& mu,
                           const Matrix& sigma, double beta) {
  const int N = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (!sigma.allFinite()) return Matrix::Constant(p, p, kNaN);
  const Matrix inv = sigma.inverse();
  const Matrix C = X.rowwise() - mu.transpose();
  Matrix out = Matrix::Zero(p, p);
  for (int i = 0; i < N; ++i) {
    const Vector d = C.row(i).transpose();
    const double delta = d.dot(inv * d);
    const double w = beta == 1.0 ? 1.0 : std::pow(delta, beta - 1.0);
    out += w * (d * d.transpose());
  }
  return (beta / N) * out;
}

double singleComponentLogLik(const Matrix& X, const Vector& mu,
                             const Matrix& sigma, double beta) {
  const int N = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (!sigma.allFinite()) return kNaN;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success) return kNaN;
  if (eig.eigenvalues().minCoeff() <= 0.0) return kNaN;
  const double logDet = eig.eigenvalues().array().log().sum();
  const Matrix inv = eig.eigenvectors() *
                     eig.eigenvalues().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  const double logK = logNormalizingConstant(p, beta);
  double total = N * (logK - 0.5 * logDet);
  const Matrix C = X.rowwise() - mu.transpose();
  for (int i = 0; i < N; ++i) {
    const Vector d = C.row(i).transpose();
    const double delta = d.dot(inv * d);
    total -= 0.5 * (delta > 0.0 ? std::pow(delta, beta) : 0.0);
  }
  return total;
}

bool divergedTrajectory(const std::vector<double>& logLik) {
  int run = 0;
  double lastDrop = 0.0;
  for (std::size_t k = 0; k < logLik.size(); ++k) {
    if (!std::isfinite(logLik[k])) return true;
    if (k == 0) continue;
    const double drop = logLik[k - 1] - logLik[k];
    if (drop > 0.0 && (run == 0 || drop >= lastDrop)) {
      ++run;
      lastDrop = drop;
      if (run >= 5) return true;
    } else if (drop > 0.0) {
      run = 1;
      lastDrop = drop;
    } else {
      run = 0;
    }
  }
  return false;
}

namespace {

ScaleDecomposition scaleFromDense(const Matrix& sigma) {
  const int p = static_cast<int>(sigma.rows());
  ScaleDecomposition scale(ScaleStructure::VVV, 1, p);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  scale.setEigenvalues(0, eig.eigenvalues().cwiseMax(1e-300));
  scale.setGamma(0, eig.eigenvectors());
  canonicalizeScale(scale);
  return scale;
}

}  // namespace

TrajectoryPair compareTrajectories(const Matrix& X, const Vector& mu,
                                   double beta, int iterations,
                                   const Matrix& sigmaInit) {
  const int p = static_cast<int>(X.cols());

  TrajectoryPair pair;
  pair.fixedPoint.method = TrajectoryMethod::FixedPoint;
  pair.gem.method = TrajectoryMethod::Gem;
  pair.fixedPoint.beta = pair.gem.beta = beta;
  pair.fixedPoint.p = pair.gem.p = p;

  Matrix sigma = sigmaInit;
  pair.fixedPoint.logLik.push_back(singleComponentLogLik(X, mu, sigma, beta));
  for (int it = 0; it < iterations; ++it) {
    if (!std::isfinite(pair.fixedPoint.logLik.back())) break;
    sigma = fixedPointSigmaStep(X, mu, sigma, beta);
    pair.fixedPoint.logLik.push_back(
        singleComponentLogLik(X, mu, sigma, beta));
  }
  pair.fixedPoint.diverged = divergedTrajectory(pair.fixedPoint.logLik);

  const Responsibilities tau = Responsibilities::Ones(X.rows(), 1);
  const ScatterCache cache = makeScatterCache(X, tau, {mu});
  const Vector betaVec = Vector::Constant(1, beta);
  ScaleDecomposition scale = scaleFromDense(sigmaInit);
  pair.gem.logLik.push_back(
      singleComponentLogLik(X, mu, reconstructSigma(scale, 0), beta));
  for (int it = 0; it < iterations; ++it) {
    if (!std::isfinite(pair.gem.logLik.back())) break;
    scale = updateVVV(cache, scale, betaVec);
    pair.gem.logLik.push_back(
        singleComponentLogLik(X, mu, reconstructSigma(scale, 0), beta));
  }
  pair.gem.diverged = divergedTrajectory(pair.gem.logLik);
  return pair;
}

TrajectoryPair compareTrajectories(const Matrix& X, const Vector& mu,
                                   double beta, int iterations) {
  const int p = static_cast<int>(X.cols());
  return compareTrajectories(X, mu, beta, iterations,
                             Matrix::Identity(p, p));
}

Matrix estimateStationaryScale(const Matrix& X, const Vector& mu, double beta,
                               int iterations) {
  const int N = static_cast<int>(X.rows());
  const Matrix C = X.rowwise() - mu.transpose();
  const Matrix sample = (C.transpose() * C) / static_cast<double>(N);

  const Responsibilities tau = Responsibilities::Ones(N, 1);
  const ScatterCache cache = makeScatterCache(X, tau, {mu});
  const Vector betaVec = Vector::Constant(1, beta);
  ScaleDecomposition scale = scaleFromDense(sample);
  for (int it = 0; it < iterations; ++it)
    scale = updateVVV(cache, scale, betaVec);

  // polish with raw map steps while they keep shrinking the residual; the
  // monotone update converges slowly in the orientation, the raw map
  // contracts quickly near the root whenever it is locally stable
  Matrix best = reconstructSigma(scale, 0);
  Matrix current = best;
  double bestResidual =
      (fixedPointSigmaStep(X, mu, best, beta) - best).norm();
  for (int it = 0; it < 200; ++it) {
    const Matrix image = fixedPointSigmaStep(X, mu, current, beta);
    if (!image.allFinite()) break;
    const double residual = (image - current).norm();
    if (residual < bestResidual) {
      best = current;
      bestResidual = residual;
    } else if (it > 0) {
      break;
    }
    current = image;
    if (bestResidual < 1e-13 * best.norm()) break;
  }
  const Matrix imageOfBest = fixedPointSigmaStep(X, mu, best, beta);
  if (imageOfBest.allFinite() &&
      (imageOfBest - best).norm() <= bestResidual)
    best = imageOfBest;
  return best;
}

double jacobianTraceAtFixedPoint(const Matrix& X, const Vector& mu,
                                 const Matrix& sigmaHat, double beta) {
  const int p = static_cast<int>(sigmaHat.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigmaHat);
  if (eig.info() != Eigen::Success)
    throw std::invalid_argument("scale matrix could not be factorized");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e10)
    throw std::invalid_argument("scale matrix is ill-conditioned");

  const double h = 1e-4 * std::max(1.0, sigmaHat.cwiseAbs().maxCoeff());
  double trace = 0.0;
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) {
      Matrix plus = sigmaHat;
      Matrix minus = sigmaHat;
      plus(a, b) += h;
      minus(a, b) -= h;
      const double fPlus = fixedPointSigmaStep(X, mu, plus, beta)(a, b);
      const double fMinus = fixedPointSigmaStep(X, mu, minus, beta)(a, b);
      trace += (fPlus - fMinus) / (2.0 * h);
    }
  return trace;
}

}  // namespace epem
