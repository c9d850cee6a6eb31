#pragma once

#include <string>
#include <vector>

#include "epem/density.hpp"
#include "epem/scale_updates.hpp"
#include "epem/types.hpp"

namespace epem {

struct BetaBracket {
  double lo = 0.05;
  double hi = 200.0;
};

struct FitConfig {
  int maxIter = 500;
  double aitkenEpsilon = 0.005;
  BetaBracket betaBracket;  // hard cap: fitted exponents stay inside
  int muNewtonSteps = 1;
  int muMaxHalvings = 10;
  double eigenFloorRel = 1e-10;
  LineSearchConfig lineSearch;
};

enum class FitErrorKind {
  BadInput,
  DegenerateComponent,
  SingularScale,
  NonFiniteLikelihood
};

std::string fitErrorKindName(FitErrorKind kind);

class FitError : public std::runtime_error {
 public:
  FitError(FitErrorKind kind, int iteration, const std::string& message)
      : std::runtime_error(message), kind_(kind), iteration_(iteration) {}
  FitErrorKind kind() const { return kind_; }
  int iteration() const { return iteration_; }

 private:
  FitErrorKind kind_;
  int iteration_;
};

struct FitReport {
  MixtureParams params;
  Responsibilities responsibilities;
  std::vector<int> labels;
  std::vector<double> logLikTrace;
  double logLik = 0.0;
  int iterations = 0;
  bool converged = false;
};

/*
 * Posterior membership probabilities through log-sum-exp; also reports the
 * observed log-likelihood of the supplied parameters.  A row where every
 * component underflows signals degenerate parameters.
 */
Responsibilities eStep(const Matrix& X, const MixtureParams& params,
                       double* logLikOut = nullptr);

Vector updatePi(const Responsibilities& tau);

/*
 * Guarded Newton steps on the location of component g, holding the other
 * parameters fixed.  A step is kept only if it does not lower the component's
 * conditional objective, halving up to muMaxHalvings times before giving up.
 * Observations with distances below 1e-12 are excluded from the derivative
 * sums away from beta = 1 where the negative powers are singular.
 */
Vector updateMu(const Matrix& X, const Responsibilities& tau,
                const MixtureParams& params, int g, int newtonSteps = 1,
                int maxHalvings = 10);

/*
 * Shape exponent update for component g at fixed distances: safeguarded
 * Newton on the stationarity equation inside the bracket, falling back to
 * bisection, keeping the incumbent when no bracketed root exists or the
 * root does not improve the conditional objective.
 */
double updateBetaVariable(const Matrix& X, const Responsibilities& tau,
                          const MixtureParams& params, int g,
                          const FitConfig& cfg = {});

/* Pooled variant under the equal shape constraint; one exponent for all. */
double updateBetaEqual(const Matrix& X, const Responsibilities& tau,
                       const MixtureParams& params, const FitConfig& cfg = {});

/*
 * Aitken acceleration stopping rule on the last three log-likelihoods:
 * converged when the projected asymptotic gain is non-negative and below
 * epsilon.  A flat pair of differences (below 1e-12) counts as converged.
 */
bool aitkenConverged(double lPrevPrev, double lPrev, double lNew,
                     double epsilon);

/* Moment-matched parameters from an initial hard or soft partition. */
MixtureParams initialParams(const Matrix& X, const ModelSpec& spec,
                            const Responsibilities& tauInit);

/*
 * Generalized EM: E-step, then conditional maximizations for the shape
 * exponents, locations and scale in that order, stopping on the Aitken rule.
 * The returned trace holds one log-likelihood per E-step and never decreases
 * beyond rounding noise.
 */
FitReport fit(const Matrix& X, const ModelSpec& spec,
              const Responsibilities& tauInit, const FitConfig& cfg = {});

}  // namespace epem
