#include "epem/scale_updates.hpp"

#include <cmath>
#include <limits>

namespace epem {

namespace {

constexpr double kTinyDelta = 1e-300;

Vector frameDelta(const Matrix& V, const Vector& a) {
  return V.cwiseProduct(V) * a.cwiseInverse();
}

/*
 * Weights tau_i delta_i^{beta-1}.  The delta -> 0 limit of every term these
 * weights multiply is zero (the generating vector vanishes with delta), so
 * near-zero distances are masked instead of letting the negative power blow
 * up; beta = 1 keeps its exact limit tau_i.
 */
Vector tailWeights(const Vector& tau, const Vector& delta, double beta) {
  Vector w(tau.size());
  for (int i = 0; i < tau.size(); ++i) {
    if (tau[i] == 0.0) {
      w[i] = 0.0;
    } else if (delta[i] < kTinyDelta) {
      w[i] = beta == 1.0 ? tau[i] : 0.0;
    } else {
      w[i] = tau[i] * std::pow(delta[i], beta - 1.0);
    }
  }
  return w;
}

/* sum_i w_i V_ih^2 for every coordinate h. */
Vector coordinateSums(const Matrix& V, const Vector& w) {
  return V.array().square().matrix().transpose() * w;
}

/* log of sum_i tau_i (q_i)^beta, -inf when no mass. */
double logWeightedPowerSum(const Vector& tau, const Vector& q, double beta) {
  double maxExp = -std::numeric_limits<double>::infinity();
  std::vector<double> exps;
  exps.reserve(tau.size());
  for (int i = 0; i < tau.size(); ++i) {
    if (tau[i] <= 0.0 || q[i] <= 0.0) continue;
    const double e = std::log(tau[i]) + beta * std::log(q[i]);
    exps.push_back(e);
    maxExp = std::max(maxExp, e);
  }
  if (exps.empty()) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double e : exps) acc += std::exp(e - maxExp);
  return maxExp + std::log(acc);
}

double safeTailPower(double delta, double beta) {
  return delta > 0.0 ? std::pow(delta, beta) : 0.0;
}

/* sum over listed components of sum_i tau delta^beta in a common frame. */
double orientationTailSum(const ScatterCache& cache,
                          const std::vector<int>& groups,
                          const std::vector<Vector>& a,
                          const std::vector<double>& betas, const Matrix& D) {
  double total = 0.0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const int g = groups[k];
    const Matrix V = cache.centered[g] * D;
    const Vector delta = frameDelta(V, a[k]);
    for (int i = 0; i < cache.N; ++i) {
      const double tau = cache.tau(i, g);
      if (tau > 0.0) total += tau * safeTailPower(delta[i], betas[k]);
    }
  }
  return total;
}

/*
 * One backtracking step on the orientation objective
 * sum_g tr{(Q_g D A_g^{-1} D')^{beta_g}} with Q_g = sum_i tau^{1/beta} M_ig.
 * The surrogate does not touch the conditional objective away from beta = 1,
 * so the retracted point is kept only when the exact scale contribution does
 * not get worse.
 */
Matrix orientationStep(const ScatterCache& cache, const std::vector<int>& groups,
                       const std::vector<Vector>& a,
                       const std::vector<double>& betas, const Matrix& D,
                       const LineSearchConfig& ls) {
  std::vector<TracePowerTerm> terms;
  terms.reserve(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const int g = groups[k];
    const Matrix& C = cache.centered[g];
    Vector wq(cache.N);
    for (int i = 0; i < cache.N; ++i) {
      const double tau = cache.tau(i, g);
      wq[i] = tau > 0.0 ? std::pow(tau, 1.0 / betas[k]) : 0.0;
    }
    TracePowerTerm term;
    term.Q = C.transpose() * wq.asDiagonal() * C;
    term.aInv = a[k].cwiseInverse();
    term.beta = betas[k];
    terms.push_back(std::move(term));
  }

  const Matrix grad = riemannianGradForTracePower(D, terms);
  if (!grad.allFinite()) return D;
  const auto objective = [&terms](const Matrix& X) {
    return tracePowerObjective(X, terms);
  };
  const LineSearchResult res = armijoStep(objective, D, grad, ls);
  if (!res.accepted) return D;

  const double before = orientationTailSum(cache, groups, a, betas, D);
  const double after = orientationTailSum(cache, groups, a, betas, res.X);
  return after <= before ? res.X : D;
}

/*
 * Eigenvalue step in a fixed frame for one component.  Below 1 the
 * supporting hyperplane gives the closed form directly; at or above 1 the
 * current eigenvalues enter through the outer 1/beta power.
 */
Vector eigenvalueStep(const Vector& aCur, const Vector& s, double n,
                      double beta) {
  const int p = static_cast<int>(s.size());
  Vector aNew(p);
  if (beta < 1.0) {
    aNew = (beta / n) * s;
  } else {
    for (int h = 0; h < p; ++h) {
      const double inner = (beta / n) * s[h];
      aNew[h] = inner > 0.0
                    ? std::exp(((beta - 1.0) * std::log(aCur[h]) +
                                std::log(inner)) /
                               beta)
                    : 0.0;
    }
  }
  return aNew.cwiseMax(kTinyDelta);
}

/*
 * Pooled eigenvalue step for the shared-shape structures.  With every
 * exponent below 1 the pooled hyperplane solution applies; otherwise the
 * largest exponent drives the outer power.
 */
Vector pooledEigenvalueStep(const Vector& aCur, const Vector& pooled, double N,
                            double betaStar, bool allLow) {
  const int p = static_cast<int>(pooled.size());
  Vector aNew(p);
  if (allLow) {
    aNew = pooled / N;
  } else {
    for (int h = 0; h < p; ++h) {
      const double inner = pooled[h] / N;
      aNew[h] = inner > 0.0
                    ? std::exp(((betaStar - 1.0) * std::log(aCur[h]) +
                                std::log(inner)) /
                               betaStar)
                    : 0.0;
    }
  }
  return aNew.cwiseMax(kTinyDelta);
}

bool allBelowOne(const Vector& beta) {
  return (beta.array() < 1.0).all();
}

bool allExactlyOne(const Vector& beta) {
  return (beta.array() == 1.0).all();
}

/* Weighted scatter sum_i tau_i d_i d_i' without the 1/n normalization. */
Matrix weightedScatter(const Matrix& C, const Vector& tau) {
  return C.transpose() * tau.asDiagonal() * C;
}

}  // namespace

ScatterCache makeScatterCache(const Matrix& X, const Matrix& tau,
                              const std::vector<Vector>& mu) {
  ScatterCache cache;
  cache.N = static_cast<int>(X.rows());
  cache.p = static_cast<int>(X.cols());
  cache.G = static_cast<int>(tau.cols());
  if (tau.rows() != cache.N || static_cast<int>(mu.size()) != cache.G)
    throw std::invalid_argument("scatter cache inputs do not conform");
  cache.tau = tau;
  cache.n = tau.colwise().sum();
  cache.centered.reserve(cache.G);
  for (int g = 0; g < cache.G; ++g)
    cache.centered.push_back(X.rowwise() - mu[g].transpose());
  return cache;
}

double computeScaleQ(const ScatterCache& cache, const ScaleDecomposition& scale,
                     const Vector& beta) {
  double q = 0.0;
  for (int g = 0; g < cache.G; ++g) {
    const Vector a = scale.eigenvalues(g);
    const Matrix V = cache.centered[g] * scale.gamma(g);
    const Vector delta = frameDelta(V, a);
    q -= 0.5 * cache.n[g] * a.array().log().sum();
    for (int i = 0; i < cache.N; ++i) {
      const double tau = cache.tau(i, g);
      if (tau > 0.0) q -= 0.5 * tau * safeTailPower(delta[i], beta[g]);
    }
  }
  return q;
}

ScaleDecomposition updateEII(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta) {
  // Exact root of p N = sum_g beta_g lambda^{-beta_g} S_g with
  // S_g = sum_i tau_ig (d_i'd_i)^{beta_g}; the right side is strictly
  // decreasing in lambda so the root is unique.  Solved in log lambda.
  std::vector<double> logS(cache.G);
  for (int g = 0; g < cache.G; ++g) {
    const Vector sq = cache.centered[g].rowwise().squaredNorm();
    logS[g] = logWeightedPowerSum(cache.tau.col(g), sq, beta[g]);
  }
  const double target = cache.p * cache.n.sum();

  const auto rhs = [&](double t) {
    double acc = 0.0;
    for (int g = 0; g < cache.G; ++g) {
      if (!std::isfinite(logS[g])) continue;
      const double e = std::log(beta[g]) + logS[g] - beta[g] * t;
      if (e > 700.0) return std::numeric_limits<double>::infinity();
      acc += std::exp(e);
    }
    return acc;
  };

  double t = std::log(scale.lambda(0));
  double lo = t, hi = t;
  double step = 1.0;
  if (rhs(t) > target) {
    while (rhs(hi) > target && step < 1e6) hi += step, step *= 2.0;
    lo = hi - step / 2.0 - 1.0;
  } else {
    while (rhs(lo) <= target && step < 1e6) lo -= step, step *= 2.0;
    hi = lo + step / 2.0 + 1.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rhs(mid) > target ? lo : hi) = mid;
  }

  ScaleDecomposition out = scale;
  out.setLambda(0, std::exp(0.5 * (lo + hi)));
  return out;
}

ScaleDecomposition updateVII(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta) {
  // Closed form per component, valid for every shape exponent.
  ScaleDecomposition out = scale;
  for (int g = 0; g < cache.G; ++g) {
    const Vector sq = cache.centered[g].rowwise().squaredNorm();
    const double logS = logWeightedPowerSum(cache.tau.col(g), sq, beta[g]);
    const double logLambda =
        (std::log(beta[g]) + logS - std::log(cache.p * cache.n[g])) / beta[g];
    out.setLambda(g, std::exp(logLambda));
  }
  return out;
}

ScaleDecomposition updateVVI(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta) {
  ScaleDecomposition out = scale;
  for (int g = 0; g < cache.G; ++g) {
    const Vector a = scale.eigenvalues(g);
    const Matrix& V = cache.centered[g];  // axis aligned frame
    const Vector delta = frameDelta(V, a);
    const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
    const Vector s = coordinateSums(V, w);
    out.setEigenvalues(g, eigenvalueStep(a, s, cache.n[g], beta[g]));
  }
  return out;
}

ScaleDecomposition updateEEI(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta) {
  const Vector a = scale.eigenvalues(0);
  Vector pooled = Vector::Zero(cache.p);
  for (int g = 0; g < cache.G; ++g) {
    const Matrix& V = cache.centered[g];
    const Vector delta = frameDelta(V, a);
    const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
    pooled += beta[g] * coordinateSums(V, w);
  }
  ScaleDecomposition out = scale;
  out.setEigenvalues(0, pooledEigenvalueStep(a, pooled, cache.n.sum(),
                                             beta.maxCoeff(),
                                             allBelowOne(beta)));
  return out;
}

ScaleDecomposition updateEEE(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta, const LineSearchConfig& ls) {
  if (allExactlyOne(beta)) {
    // the conditional maximum is the pooled scatter, frame and all
    Matrix pooled = Matrix::Zero(cache.p, cache.p);
    for (int g = 0; g < cache.G; ++g)
      pooled += weightedScatter(cache.centered[g], cache.tau.col(g));
    pooled /= cache.n.sum();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(pooled);
    ScaleDecomposition out = scale;
    out.setEigenvalues(0, eig.eigenvalues().cwiseMax(kTinyDelta));
    out.setGamma(0, eig.eigenvectors());
    return out;
  }
  const Matrix D = scale.gamma(0);
  const Vector a = scale.eigenvalues(0);
  Vector pooled = Vector::Zero(cache.p);
  for (int g = 0; g < cache.G; ++g) {
    const Matrix V = cache.centered[g] * D;
    const Vector delta = frameDelta(V, a);
    const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
    pooled += beta[g] * coordinateSums(V, w);
  }
  const Vector aNew = pooledEigenvalueStep(a, pooled, cache.n.sum(),
                                           beta.maxCoeff(), allBelowOne(beta));

  std::vector<int> groups(cache.G);
  std::vector<Vector> aPer(cache.G, aNew);
  std::vector<double> betas(cache.G);
  for (int g = 0; g < cache.G; ++g) groups[g] = g, betas[g] = beta[g];
  const Matrix Dnew = orientationStep(cache, groups, aPer, betas, D, ls);

  ScaleDecomposition out = scale;
  out.setEigenvalues(0, aNew);
  out.setGamma(0, Dnew);
  return out;
}

ScaleDecomposition updateEEV(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta, const LineSearchConfig& ls) {
  if (allExactlyOne(beta)) {
    // each orientation aligns with its component scatter; the shared
    // eigenvalues pool the per-component spectra in matching order
    ScaleDecomposition out = scale;
    Vector pooled = Vector::Zero(cache.p);
    for (int g = 0; g < cache.G; ++g) {
      const Matrix W = weightedScatter(cache.centered[g], cache.tau.col(g));
      Eigen::SelfAdjointEigenSolver<Matrix> eig(W);
      pooled += eig.eigenvalues();
      out.setGamma(g, eig.eigenvectors());
    }
    out.setEigenvalues(0, (pooled / cache.n.sum()).cwiseMax(kTinyDelta));
    return out;
  }
  const Vector a = scale.eigenvalues(0);
  Vector pooled = Vector::Zero(cache.p);
  for (int g = 0; g < cache.G; ++g) {
    const Matrix V = cache.centered[g] * scale.gamma(g);
    const Vector delta = frameDelta(V, a);
    const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
    pooled += beta[g] * coordinateSums(V, w);
  }
  const Vector aNew = pooledEigenvalueStep(a, pooled, cache.n.sum(),
                                           beta.maxCoeff(), allBelowOne(beta));

  ScaleDecomposition out = scale;
  out.setEigenvalues(0, aNew);
  for (int g = 0; g < cache.G; ++g) {
    const Matrix Dg = orientationStep(cache, {g}, {aNew}, {beta[g]},
                                      scale.gamma(g), ls);
    out.setGamma(g, Dg);
  }
  return out;
}

ScaleDecomposition updateVVE(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta, const LineSearchConfig& ls) {
  const Matrix D = scale.gamma(0);
  ScaleDecomposition out = scale;
  std::vector<Vector> aPer(cache.G);
  std::vector<int> groups(cache.G);
  std::vector<double> betas(cache.G);
  for (int g = 0; g < cache.G; ++g) {
    const Vector a = scale.eigenvalues(g);
    const Matrix V = cache.centered[g] * D;
    const Vector delta = frameDelta(V, a);
    const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
    const Vector s = coordinateSums(V, w);
    aPer[g] = eigenvalueStep(a, s, cache.n[g], beta[g]);
    out.setEigenvalues(g, aPer[g]);
    groups[g] = g;
    betas[g] = beta[g];
  }
  out.setGamma(0, orientationStep(cache, groups, aPer, betas, D, ls));
  return out;
}

ScaleDecomposition updateVVV(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta, const LineSearchConfig& ls) {
  ScaleDecomposition out = scale;
  for (int g = 0; g < cache.G; ++g) {
    const Matrix& C = cache.centered[g];
    if (beta[g] <= 1.0) {
      // Dense supporting hyperplane step; the eigendecomposition of the
      // result refreshes volume, shape and orientation at once.  At an
      // exponent of exactly 1 the weights collapse to the responsibilities
      // and this is the conditional maximum itself.
      const Matrix V = C * scale.gamma(g);
      const Vector delta = frameDelta(V, scale.eigenvalues(g));
      const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
      const Matrix sigma =
          (beta[g] / cache.n[g]) * (C.transpose() * w.asDiagonal() * C);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
      out.setEigenvalues(g, eig.eigenvalues().cwiseMax(kTinyDelta));
      out.setGamma(g, eig.eigenvectors());
    } else {
      const Matrix D = scale.gamma(g);
      const Vector a = scale.eigenvalues(g);
      const Matrix V = C * D;
      const Vector delta = frameDelta(V, a);
      const Vector w = tailWeights(cache.tau.col(g), delta, beta[g]);
      const Vector s = coordinateSums(V, w);
      const Vector aNew = eigenvalueStep(a, s, cache.n[g], beta[g]);
      out.setEigenvalues(g, aNew);
      out.setGamma(g, orientationStep(cache, {g}, {aNew}, {beta[g]}, D, ls));
    }
  }
  return out;
}

ScaleDecomposition updateScale(const ScatterCache& cache,
                               const ScaleDecomposition& scale,
                               const Vector& beta, const LineSearchConfig& ls,
                               double eigenFloorRel, bool* flooredOut) {
  if (beta.size() != cache.G)
    throw std::invalid_argument("beta vector does not match component count");
  ScaleDecomposition next;
  switch (scale.structure()) {
    case ScaleStructure::EII: next = updateEII(cache, scale, beta); break;
    case ScaleStructure::VII: next = updateVII(cache, scale, beta); break;
    case ScaleStructure::EEI: next = updateEEI(cache, scale, beta); break;
    case ScaleStructure::VVI: next = updateVVI(cache, scale, beta); break;
    case ScaleStructure::EEE: next = updateEEE(cache, scale, beta, ls); break;
    case ScaleStructure::EEV: next = updateEEV(cache, scale, beta, ls); break;
    case ScaleStructure::VVE: next = updateVVE(cache, scale, beta, ls); break;
    case ScaleStructure::VVV: next = updateVVV(cache, scale, beta, ls); break;
  }

  double maxEig = 0.0;
  for (int g = 0; g < cache.G; ++g)
    maxEig = std::max(maxEig, next.eigenvalues(g).maxCoeff());
  if (!(maxEig > 0.0) || !std::isfinite(maxEig))
    throw std::runtime_error("scale update produced a non-finite scale");
  const double floor = eigenFloorRel * maxEig;
  bool floored = false;
  for (int g = 0; g < cache.G; ++g) {
    Vector ev = next.eigenvalues(g);
    if (ev.minCoeff() < floor) {
      floored = true;
      next.setEigenvalues(g, ev.cwiseMax(floor));
    }
  }
  if (flooredOut != nullptr) *flooredOut = floored;

  canonicalizeScale(next);
  return next;
}

}  // namespace epem
