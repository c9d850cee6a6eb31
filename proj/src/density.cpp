#include "epem/density.hpp"

#include <cmath>
#include <limits>

namespace epem {

MpeComponent makeComponent(const Vector& mu, const Matrix& sigma, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size())
    throw std::invalid_argument("scale matrix and location do not conform");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("scale matrix must be positive definite");
  MpeComponent comp;
  comp.mu = mu;
  comp.sigmaInverse = eig.eigenvectors() *
                      eig.eigenvalues().cwiseInverse().asDiagonal() *
                      eig.eigenvectors().transpose();
  comp.logDetSigma = eig.eigenvalues().array().log().sum();
  comp.beta = beta;
  comp.p = static_cast<int>(mu.size());
  return comp;
}

MpeComponent makeComponent(const MixtureParams& params, int g) {
  const Matrix& gam = params.scale.gamma(g);
  const Vector ev = params.scale.eigenvalues(g);
  MpeComponent comp;
  comp.mu = params.mu[g];
  comp.sigmaInverse = gam * ev.cwiseInverse().asDiagonal() * gam.transpose();
  comp.logDetSigma = ev.array().log().sum();
  comp.beta = params.beta[g];
  comp.p = params.spec.p;
  return comp;
}

double mahalanobis(const MpeComponent& comp, const Vector& x) {
  const Vector d = x - comp.mu;
  return d.dot(comp.sigmaInverse * d);
}

double logDensity(const MpeComponent& comp, const Vector& x) {
  const double delta = mahalanobis(comp, x);
  // pow(0, beta) = 0 handles the removable point delta = 0 for every beta > 0.
  const double tail = delta > 0.0 ? std::pow(delta, comp.beta) : 0.0;
  return logNormalizingConstant(comp.p, comp.beta) - 0.5 * comp.logDetSigma -
         0.5 * tail;
}

Matrix covarianceOf(const Matrix& sigma, double beta) {
  return covarianceFactor(static_cast<int>(sigma.rows()), beta) * sigma;
}

double logSumExp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf stays -inf; propagates +inf/nan
  return m + std::log((v.array() - m).exp().sum());
}

Matrix mahalanobisMatrix(const Matrix& X, const MixtureParams& params) {
  const int N = static_cast<int>(X.rows());
  const int G = params.spec.G;
  Matrix delta(N, G);
  for (int g = 0; g < G; ++g) {
    // Rotate into the eigenframe and scale each axis, then take row norms.
    const Matrix& gam = params.scale.gamma(g);
    const Vector invSqrt = params.scale.eigenvalues(g).cwiseSqrt().cwiseInverse();
    Matrix Y = (X.rowwise() - params.mu[g].transpose()) * gam;
    Y *= invSqrt.asDiagonal();
    delta.col(g) = Y.rowwise().squaredNorm();
  }
  return delta;
}

Matrix weightedLogDensityMatrix(const Matrix& X, const MixtureParams& params) {
  const int N = static_cast<int>(X.rows());
  const int G = params.spec.G;
  const Matrix delta = mahalanobisMatrix(X, params);
  Matrix out(N, G);
  for (int g = 0; g < G; ++g) {
    const double beta = params.beta[g];
    const double base = std::log(params.pi[g]) +
                        logNormalizingConstant(params.spec.p, beta) -
                        0.5 * params.scale.eigenvalues(g).array().log().sum();
    for (int i = 0; i < N; ++i) {
      const double d = delta(i, g);
      out(i, g) = base - 0.5 * (d > 0.0 ? std::pow(d, beta) : 0.0);
    }
  }
  return out;
}

double mixtureLogLikelihood(const Matrix& X, const MixtureParams& params) {
  const Matrix logw = weightedLogDensityMatrix(X, params);
  double total = 0.0;
  for (int i = 0; i < logw.rows(); ++i)
    total += logSumExp(logw.row(i).transpose());
  return total;
}

}  // namespace epem
