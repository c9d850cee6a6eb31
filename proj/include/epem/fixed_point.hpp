#pragma once

#include <string>
#include <vector>

#include "epem/types.hpp"

namespace epem {

enum class TrajectoryMethod { FixedPoint, Gem };

std::string trajectoryMethodName(TrajectoryMethod method);

/*
 * One single-component scale-estimation run: the log-likelihood after every
 * update, starting with the initial matrix.  Non-finite entries record
 * numerical failure; the sequence stops at the first one.
 */
struct TrajectoryRecord {
  TrajectoryMethod method = TrajectoryMethod::FixedPoint;
  double beta = 1.0;
  int p = 0;
  std::vector<double> logLik;
  bool diverged = false;
};

/*
 * Raw image of the fixed-point scale map
 *   f(S) = (beta/N) sum_i delta_i^{beta-1} (x_i - mu)(x_i - mu)'
 * with delta_i the quadratic form under the current S.  No acceptance
 * control and no monotonicity guarantee; non-finite entries propagate.
 */
Matrix fixedPointSigmaStep(const Matrix& X, const Vector& mu,
                           const Matrix& sigma, double beta);

/* Single-component log-likelihood that reports NaN instead of throwing. */
double singleComponentLogLik(const Matrix& X, const Vector& mu,
                             const Matrix& sigma, double beta);

/*
 * Divergence rule shared by both arms: any non-finite value, or five
 * consecutive decreases whose margins never shrink.
 */
bool divergedTrajectory(const std::vector<double>& logLik);

struct TrajectoryPair {
  TrajectoryRecord fixedPoint;
  TrajectoryRecord gem;
};

/*
 * Runs the fixed-point iteration and the monotone single-component update
 * side by side from the same starting matrix, holding mu and beta fixed.
 * The second overload starts from the identity.
 */
TrajectoryPair compareTrajectories(const Matrix& X, const Vector& mu,
                                   double beta, int iterations,
                                   const Matrix& sigmaInit);
TrajectoryPair compareTrajectories(const Matrix& X, const Vector& mu,
                                   double beta, int iterations);

/*
 * Stationary scale matrix for one component at fixed mu and beta, found by
 * iterating the monotone update from the sample covariance.
 */
Matrix estimateStationaryScale(const Matrix& X, const Vector& mu, double beta,
                               int iterations = 2000);

/*
 * Trace of the Jacobian of the vectorized fixed-point map, evaluated by
 * central differences at (an approximation of) a stationary scale matrix.
 * At an exact stationary point this equals p(1 - beta).
 */
double jacobianTraceAtFixedPoint(const Matrix& X, const Vector& mu,
                                 const Matrix& sigmaHat, double beta);

}  // namespace epem
