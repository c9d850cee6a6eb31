#pragma once

#include <cmath>

#include "epem/types.hpp"

namespace epem {

/*
 * Multivariate power exponential density
 *
 *   f(x | mu, Sigma, beta) = k |Sigma|^{-1/2} exp{ -delta(x)^beta / 2 }
 *
 * with delta(x) = (x - mu)' Sigma^{-1} (x - mu) and
 *
 *   k = p Gamma(p/2) / ( pi^{p/2} Gamma(1 + p/(2 beta)) 2^{1 + p/(2 beta)} ).
 *
 * beta = 1 recovers the Gaussian, beta = 1/2 a Laplace-like law, and
 * beta -> infinity tends to the uniform on an ellipsoid.
 */
template <typename Scalar>
Scalar logNormalizingConstant(int p, Scalar beta) {
  const Scalar half_p = Scalar(p) / Scalar(2);
  const Scalar a = Scalar(1) + half_p / beta;
  return std::log(Scalar(p)) + std::lgamma(half_p) -
         half_p * std::log(Scalar(M_PI)) - std::lgamma(a) -
         a * std::log(Scalar(2));
}

/* Multiplier c(p, beta) with Cov(X) = c * Sigma; equals 1 at beta = 1. */
template <typename Scalar>
Scalar covarianceFactor(int p, Scalar beta) {
  const Scalar s = Scalar(2) * beta;
  return std::exp(std::log(Scalar(2)) / beta + std::lgamma((p + 2) / s) -
                  std::log(Scalar(p)) - std::lgamma(Scalar(p) / s));
}

/* Mardia multivariate kurtosis coefficient; 0 at beta = 1. */
template <typename Scalar>
Scalar kurtosisCoefficient(int p, Scalar beta) {
  const Scalar s = Scalar(2) * beta;
  const Scalar logTerm = Scalar(2) * std::log(Scalar(p)) +
                         std::lgamma(Scalar(p) / s) + std::lgamma((p + 4) / s) -
                         Scalar(2) * std::lgamma((p + 2) / s);
  return std::exp(logTerm) - Scalar(p) * (Scalar(p) + Scalar(2));
}

/* One component with its inverse scale cached for repeated evaluation. */
struct MpeComponent {
  Vector mu;
  Matrix sigmaInverse;
  double logDetSigma = 0.0;
  double beta = 1.0;
  int p = 0;
};

MpeComponent makeComponent(const Vector& mu, const Matrix& sigma, double beta);
MpeComponent makeComponent(const MixtureParams& params, int g);

double mahalanobis(const MpeComponent& comp, const Vector& x);
double logDensity(const MpeComponent& comp, const Vector& x);

Matrix covarianceOf(const Matrix& sigma, double beta);

/*
 * Matrix of log( pi_g f_g(x_i) ) for every observation and component,
 * evaluated through the decomposed scale so no explicit inverse is formed.
 */
Matrix weightedLogDensityMatrix(const Matrix& X, const MixtureParams& params);

/* Squared Mahalanobis distances delta_ig under the current parameters. */
Matrix mahalanobisMatrix(const Matrix& X, const MixtureParams& params);

double mixtureLogLikelihood(const Matrix& X, const MixtureParams& params);

/* log sum exp of a vector, guarded against all -inf input. */
double logSumExp(const Vector& v);

}  // namespace epem
