#include "epem/gem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/* Asymptotic series with recurrence shift, accurate to ~1e-13 for x > 0. */
double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

double trigamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv +
                   inv2 * (1.0 / 6.0 -
                           inv2 * (1.0 / 30.0 -
                                   inv2 * (1.0 / 42.0 - inv2 / 30.0))));
  return result;
}

/*
 * Stationarity residual for the shape exponent at frozen distances:
 *
 *   g(b) = (c / b^2) (digamma(1 + p/(2b)) + log 2)
 *          - sum_i w_i log(delta_i) delta_i^b
 *
 * with c = p * (total weight).  The data sum is split by the sign of
 * log(delta) and accumulated in log space so very light tails stay finite.
 */
struct BetaRootProblem {
  double c = 0.0;
  int p = 0;
  // per retained observation: log weight and log distance
  std::vector<double> logW;
  std::vector<double> logD;

  void add(const Vector& tau, const Vector& delta) {
    for (int i = 0; i < tau.size(); ++i) {
      if (tau[i] <= 0.0 || delta[i] < 1e-300) continue;
      logW.push_back(std::log(tau[i]));
      logD.push_back(std::log(delta[i]));
    }
  }

  /* log sum over a signed subset of w (log delta)^k delta^b. */
  double signedLogSum(double b, int k, bool positive) const {
    double maxExp = -kInf;
    std::vector<double> exps;
    for (std::size_t i = 0; i < logW.size(); ++i) {
      const double ld = logD[i];
      if (ld == 0.0) continue;
      if (positive != (ld > 0.0) && k == 1) continue;
      if (k == 2 && !positive) continue;  // squared logs are all positive
      const double e = logW[i] + k * std::log(std::abs(ld)) + b * ld;
      exps.push_back(e);
      maxExp = std::max(maxExp, e);
    }
    if (exps.empty()) return -kInf;
    double acc = 0.0;
    for (double e : exps) acc += std::exp(e - maxExp);
    return maxExp + std::log(acc);
  }

  double tailSum(double b, int k) const {
    if (k == 2) {
      const double lp = signedLogSum(b, 2, true);
      return lp > 709.0 ? kInf : std::exp(lp);
    }
    const double lp = signedLogSum(b, 1, true);
    const double ln = signedLogSum(b, 1, false);
    if (lp > 709.0) return kInf;
    return std::exp(lp) - std::exp(ln);
  }

  double residual(double b) const {
    const double head =
        (c / (b * b)) * (digamma(1.0 + p / (2.0 * b)) + std::log(2.0));
    const double tail = tailSum(b, 1);
    if (std::isinf(tail)) return -kInf;
    return head - tail;
  }

  double residualDerivative(double b) const {
    const double arg = 1.0 + p / (2.0 * b);
    const double head = -2.0 * c / (b * b * b) *
                            (digamma(arg) + std::log(2.0)) -
                        c * p / (2.0 * b * b * b * b) * trigamma(arg);
    const double tail = tailSum(b, 2);
    if (std::isinf(tail)) return -kInf;
    return head - tail;
  }

  /* Conditional objective in the exponent alone, for the acceptance guard. */
  double shapeObjective(double b) const {
    double maxExp = -kInf;
    std::vector<double> exps;
    exps.reserve(logW.size());
    for (std::size_t i = 0; i < logW.size(); ++i) {
      const double e = logW[i] + b * logD[i];
      exps.push_back(e);
      maxExp = std::max(maxExp, e);
    }
    double sum = 0.0;
    if (!exps.empty() && maxExp > -kInf) {
      if (maxExp > 709.0) return -kInf;
      double acc = 0.0;
      for (double e : exps) acc += std::exp(e - maxExp);
      sum = std::exp(maxExp + std::log(acc));
    }
    return (c / p) * logNormalizingConstant(p, b) - 0.5 * sum;
  }
};

double solveBetaRoot(const BetaRootProblem& problem, double incumbent,
                     const BetaBracket& bracket) {
  double a = bracket.lo;
  double b = bracket.hi;
  double ga = problem.residual(a);
  double gb = problem.residual(b);
  if (!(ga > 0.0 && gb < 0.0) && !(ga < 0.0 && gb > 0.0)) return incumbent;

  double x = std::clamp(incumbent, a + 1e-12, b - 1e-12);
  double best = x;
  double bestAbs = kInf;
  for (int iter = 0; iter < 200; ++iter) {
    const double gx = problem.residual(x);
    if (std::isfinite(gx) && std::abs(gx) < bestAbs) {
      bestAbs = std::abs(gx);
      best = x;
    }
    if (std::abs(gx) < 1e-8) break;
    if ((gx > 0.0) == (ga > 0.0)) {
      a = x;
      ga = gx;
    } else {
      b = x;
      gb = gx;
    }
    const double gpx = problem.residualDerivative(x);
    double next = x - gx / gpx;
    if (!std::isfinite(next) || next <= std::min(a, b) ||
        next >= std::max(a, b))
      next = 0.5 * (a + b);
    if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }

  double root = bestAbs < kInf ? best : x;
  // acceptance guard: never trade the incumbent for a worse objective
  if (problem.shapeObjective(root) < problem.shapeObjective(incumbent))
    return incumbent;
  return std::min(root, bracket.hi - 1e-9);
}

}  // namespace

std::string fitErrorKindName(FitErrorKind kind) {
  switch (kind) {
    case FitErrorKind::BadInput: return "bad_input";
    case FitErrorKind::DegenerateComponent: return "degenerate_component";
    case FitErrorKind::SingularScale: return "singular_scale";
    case FitErrorKind::NonFiniteLikelihood: return "non_finite_likelihood";
  }
  return "unknown";
}

Responsibilities eStep(const Matrix& X, const MixtureParams& params,
                       double* logLikOut) {
  const Matrix logw = weightedLogDensityMatrix(X, params);
  Responsibilities tau(logw.rows(), logw.cols());
  double total = 0.0;
  for (int i = 0; i < logw.rows(); ++i) {
    const double lse = logSumExp(logw.row(i).transpose());
    if (!std::isfinite(lse))
      throw FitError(FitErrorKind::NonFiniteLikelihood, -1,
                     "observation weight underflowed in every component");
    tau.row(i) = (logw.row(i).array() - lse).exp();
    total += lse;
  }
  if (logLikOut != nullptr) *logLikOut = total;
  return tau;
}

Vector updatePi(const Responsibilities& tau) {
  return tau.colwise().mean().transpose();
}

Vector updateMu(const Matrix& X, const Responsibilities& tau,
                const MixtureParams& params, int g, int newtonSteps,
                int maxHalvings) {
  const MpeComponent comp = makeComponent(params, g);
  const double beta = comp.beta;
  const int p = comp.p;
  const int N = static_cast<int>(X.rows());
  Vector mu = comp.mu;

  const auto conditional = [&](const Vector& m) {
    double q = 0.0;
    for (int i = 0; i < N; ++i) {
      const double t = tau(i, g);
      if (t <= 0.0) continue;
      const Vector d = X.row(i).transpose() - m;
      const double delta = d.dot(comp.sigmaInverse * d);
      q -= 0.5 * t * (delta > 0.0 ? std::pow(delta, beta) : 0.0);
    }
    return q;
  };

  double qCur = conditional(mu);
  for (int s = 0; s < newtonSteps; ++s) {
    Vector grad = Vector::Zero(p);
    Matrix hess = Matrix::Zero(p, p);
    for (int i = 0; i < N; ++i) {
      const double t = tau(i, g);
      if (t <= 0.0) continue;
      const Vector d = X.row(i).transpose() - mu;
      const Vector u = comp.sigmaInverse * d;
      const double delta = d.dot(u);
      if (beta != 1.0 && delta < 1e-12) continue;
      const double w1 = std::pow(delta, beta - 1.0);
      grad += t * w1 * u;
      hess -= t * w1 * comp.sigmaInverse;
      if (beta != 1.0)
        hess -= t * 2.0 * (beta - 1.0) * std::pow(delta, beta - 2.0) *
                (u * u.transpose());
    }
    grad *= beta;
    hess *= beta;

    Eigen::LDLT<Matrix> solver(hess);
    if (solver.info() != Eigen::Success) break;
    const Vector step = -solver.solve(grad);
    if (!step.allFinite()) break;

    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= maxHalvings; ++h) {
      const Vector candidate = mu + scale * step;
      const double qNew = conditional(candidate);
      if (qNew >= qCur) {
        mu = candidate;
        qCur = qNew;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
  }
  return mu;
}

double updateBetaVariable(const Matrix& X, const Responsibilities& tau,
                          const MixtureParams& params, int g,
                          const FitConfig& cfg) {
  const Matrix delta = mahalanobisMatrix(X, params);
  BetaRootProblem problem;
  problem.p = params.spec.p;
  problem.c = params.spec.p * tau.col(g).sum();
  problem.add(tau.col(g), delta.col(g));
  return solveBetaRoot(problem, params.beta[g], cfg.betaBracket);
}

double updateBetaEqual(const Matrix& X, const Responsibilities& tau,
                       const MixtureParams& params, const FitConfig& cfg) {
  const Matrix delta = mahalanobisMatrix(X, params);
  BetaRootProblem problem;
  problem.p = params.spec.p;
  problem.c = params.spec.p * tau.sum();
  for (int g = 0; g < params.spec.G; ++g)
    problem.add(tau.col(g), delta.col(g));
  return solveBetaRoot(problem, params.beta[0], cfg.betaBracket);
}

bool aitkenConverged(double lPrevPrev, double lPrev, double lNew,
                     double epsilon) {
  const double dPrev = lPrev - lPrevPrev;
  const double dNew = lNew - lPrev;
  if (std::abs(dPrev) < 1e-12) return std::abs(dNew) < 1e-12;
  const double a = dNew / dPrev;
  if (a == 1.0) return false;
  const double accelerated = lPrev + dNew / (1.0 - a);
  const double gain = accelerated - lPrev;
  return gain >= 0.0 && gain < epsilon;
}

MixtureParams initialParams(const Matrix& X, const ModelSpec& spec,
                            const Responsibilities& tauInit) {
  const int N = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const int G = spec.G;
  if (p != spec.p || tauInit.cols() != G || tauInit.rows() != N)
    throw FitError(FitErrorKind::BadInput, 0,
                   "initial responsibilities do not match the model");

  MixtureParams params;
  params.spec = spec;
  const Vector n = tauInit.colwise().sum().transpose();
  for (int g = 0; g < G; ++g)
    if (n[g] < std::max(p, 2))
      throw FitError(FitErrorKind::DegenerateComponent, 0,
                     "component " + std::to_string(g) +
                         " has too little initial mass");
  params.pi = n / static_cast<double>(N);
  params.beta = Vector::Ones(G);
  params.mu.resize(G);
  std::vector<Matrix> scatter(G);
  Matrix pooled = Matrix::Zero(p, p);
  for (int g = 0; g < G; ++g) {
    params.mu[g] = (X.transpose() * tauInit.col(g)) / n[g];
    const Matrix C = X.rowwise() - params.mu[g].transpose();
    scatter[g] = (C.transpose() * tauInit.col(g).asDiagonal() * C) / n[g];
    pooled += (n[g] / N) * scatter[g];
  }

  ScaleDecomposition scale(spec.structure, G, p);
  const auto setFromDense = [&](int g, const Matrix& S, bool withGamma) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
    scale.setEigenvalues(g, eig.eigenvalues().cwiseMax(1e-12));
    if (withGamma) scale.setGamma(g, eig.eigenvectors());
  };

  switch (spec.structure) {
    case ScaleStructure::EII:
      scale.setLambda(0, std::max(pooled.trace() / p, 1e-12));
      break;
    case ScaleStructure::VII:
      for (int g = 0; g < G; ++g)
        scale.setLambda(g, std::max(scatter[g].trace() / p, 1e-12));
      break;
    case ScaleStructure::EEI:
      scale.setEigenvalues(0, pooled.diagonal().cwiseMax(1e-12));
      break;
    case ScaleStructure::VVI:
      for (int g = 0; g < G; ++g)
        scale.setEigenvalues(g, scatter[g].diagonal().cwiseMax(1e-12));
      break;
    case ScaleStructure::EEE:
      setFromDense(0, pooled, true);
      break;
    case ScaleStructure::EEV: {
      Vector pooledEv = Vector::Zero(p);
      for (int g = 0; g < G; ++g) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter[g]);
        scale.setGamma(g, eig.eigenvectors());
        pooledEv += (n[g] / N) * eig.eigenvalues().cwiseMax(1e-12);
      }
      scale.setEigenvalues(0, pooledEv);
      break;
    }
    case ScaleStructure::VVE: {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(pooled);
      scale.setGamma(0, eig.eigenvectors());
      for (int g = 0; g < G; ++g) {
        const Vector diag =
            (eig.eigenvectors().transpose() * scatter[g] * eig.eigenvectors())
                .diagonal();
        scale.setEigenvalues(g, diag.cwiseMax(1e-12));
      }
      break;
    }
    case ScaleStructure::VVV:
      for (int g = 0; g < G; ++g) setFromDense(g, scatter[g], true);
      break;
  }
  canonicalizeScale(scale);
  params.scale = scale;
  return params;
}

FitReport fit(const Matrix& X, const ModelSpec& spec,
              const Responsibilities& tauInit, const FitConfig& cfg) {
  if (!X.allFinite())
    throw FitError(FitErrorKind::BadInput, 0, "data contains non-finite values");
  const int p = static_cast<int>(X.cols());

  MixtureParams params = initialParams(X, spec, tauInit);

  FitReport report;
  Responsibilities tau;
  double logLik = -kInf;
  int cycles = 0;
  int floorStreak = 0;
  bool converged = false;

  for (int iter = 0; iter < cfg.maxIter; ++iter) {
    try {
      tau = eStep(X, params, &logLik);
    } catch (const FitError& e) {
      throw FitError(e.kind(), iter, e.what());
    }
    if (!std::isfinite(logLik))
      throw FitError(FitErrorKind::NonFiniteLikelihood, iter,
                     "log-likelihood is not finite");
    report.logLikTrace.push_back(logLik);
    const std::size_t k = report.logLikTrace.size();
    if (k >= 3 && aitkenConverged(report.logLikTrace[k - 3],
                                  report.logLikTrace[k - 2],
                                  report.logLikTrace[k - 1],
                                  cfg.aitkenEpsilon)) {
      converged = true;
      break;
    }

    const Vector n = tau.colwise().sum().transpose();
    for (int g = 0; g < spec.G; ++g)
      if (n[g] < std::max(p, 2))
        throw FitError(FitErrorKind::DegenerateComponent, iter,
                       "component " + std::to_string(g) + " collapsed");

    params.pi = updatePi(tau);

    if (spec.beta == BetaConstraint::Equal) {
      const double b = updateBetaEqual(X, tau, params, cfg);
      params.beta = Vector::Constant(spec.G, b);
    } else {
      Vector b(spec.G);
      for (int g = 0; g < spec.G; ++g)
        b[g] = updateBetaVariable(X, tau, params, g, cfg);
      params.beta = b;
    }

    for (int g = 0; g < spec.G; ++g)
      params.mu[g] = updateMu(X, tau, params, g, cfg.muNewtonSteps,
                              cfg.muMaxHalvings);

    const ScatterCache cache = makeScatterCache(X, tau, params.mu);
    bool floored = false;
    try {
      params.scale = updateScale(cache, params.scale, params.beta,
                                 cfg.lineSearch, cfg.eigenFloorRel, &floored);
    } catch (const std::exception& e) {
      throw FitError(FitErrorKind::SingularScale, iter, e.what());
    }
    floorStreak = floored ? floorStreak + 1 : 0;
    if (floorStreak >= 2)
      throw FitError(FitErrorKind::SingularScale, iter,
                     "scale eigenvalues pinned at the floor");
    ++cycles;
  }

  if (!converged) {
    try {
      tau = eStep(X, params, &logLik);
    } catch (const FitError& e) {
      throw FitError(e.kind(), cfg.maxIter, e.what());
    }
    report.logLikTrace.push_back(logLik);
  }

  report.params = params;
  report.responsibilities = tau;
  report.labels = mapLabels(tau);
  report.logLik = report.logLikTrace.back();
  report.iterations = cycles;
  report.converged = converged;
  return report;
}

}  // namespace epem
