// End-to-end acceptance gate: ten checks, one line each, exit 0 only if all
// pass.  Tolerances are pinned here on purpose; do not relax them to make a
// run green.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "epem/density.hpp"
#include "epem/fixed_point.hpp"
#include "epem/gem.hpp"
#include "epem/sampler.hpp"
#include "epem/scale_updates.hpp"
#include "epem/selection.hpp"
#include "epem/stiefel.hpp"
#include "epem/types.hpp"

using namespace epem;
using Json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Gen = std::mt19937_64;

Matrix randomOrthonormal(int p, Gen& gen) {
  std::normal_distribution<double> normal;
  Matrix A(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) A(i, j) = normal(gen);
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR();
  for (int j = 0; j < p; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q;
}

Matrix randomSpd(int p, Gen& gen, double lo = 0.3, double hi = 3.0) {
  const Matrix Q = randomOrthonormal(p, gen);
  std::uniform_real_distribution<double> uniform(lo, hi);
  Vector ev(p);
  for (int i = 0; i < p; ++i) ev[i] = uniform(gen);
  return Q * ev.asDiagonal() * Q.transpose();
}

Vector randomVector(int p, Gen& gen, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(p);
  for (int i = 0; i < p; ++i) v[i] = normal(gen);
  return v;
}

template <typename F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

std::string num(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

/* ---------- 1: gaussian reduction ---------- */

Outcome gaussianReduction() {
  Gen gen(1001);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    for (int p : {1, 2, 5}) {
      const Vector mu = randomVector(p, gen, 2.0);
      const Matrix sigma = randomSpd(p, gen);
      const Vector x = randomVector(p, gen, 3.0);
      const MpeComponent comp = makeComponent(mu, sigma, 1.0);

      const Eigen::LLT<Matrix> llt(sigma);
      const Vector z = llt.matrixL().solve(x - mu);
      double logDet = 0.0;
      for (int i = 0; i < p; ++i) logDet += 2.0 * std::log(llt.matrixL()(i, i));
      const double gauss =
          -0.5 * (p * std::log(2.0 * M_PI) + logDet + z.squaredNorm());
      worst = std::max(worst, std::abs(logDensity(comp, x) - gauss));
    }
  }
  return {worst < 1e-10, "max |mpe - gaussian| = " + num(worst) +
                             " over 300 cases (limit 1e-10)"};
}

/* ---------- 2: quadrature normalization ---------- */

Outcome quadratureNormalization() {
  double worst = 0.0;
  for (double beta : {0.5, 1.0, 2.0, 5.0}) {
    const double w1 = beta < 0.75 ? 140.0 : (beta < 1.5 ? 16.0 : 8.0);
    const double logK1 = logNormalizingConstant(1, beta);
    const double mass1 = simpson(
        [&](double x) { return std::exp(logK1 - 0.5 * std::pow(x * x, beta)); },
        -w1, w1, 60000);
    worst = std::max(worst, std::abs(mass1 - 1.0));

    const double w2 = beta < 0.75 ? 180.0 : (beta < 1.5 ? 16.0 : 8.0);
    const double logK2 = logNormalizingConstant(2, beta);
    const double mass2 = simpson(
        [&](double r) {
          return 2.0 * M_PI * r * std::exp(logK2 - 0.5 * std::pow(r * r, beta));
        },
        0.0, w2, 60000);
    worst = std::max(worst, std::abs(mass2 - 1.0));
  }
  return {worst < 1e-4,
          "max |mass - 1| = " + num(worst) + " over p in {1,2} (limit 1e-4)"};
}

/* ---------- 3: moment identities ---------- */

Outcome momentIdentities() {
  for (int p : {1, 2, 3, 5}) {
    if (std::abs(covarianceFactor(p, 1.0) - 1.0) > 1e-12)
      return {false,
              "covariance factor at beta=1 off for p=" + std::to_string(p)};
    if (std::abs(kurtosisCoefficient(p, 1.0)) > 1e-12)
      return {false, "kurtosis at beta=1 off for p=" + std::to_string(p)};
  }

  double worstCov = 0.0;
  bool signsOk = true;
  for (double beta : {0.5, 5.0}) {
    const int p = 2, n = 100000;
    Rng rng = makeRng(7000 + static_cast<int>(beta * 2));
    const Matrix X =
        sampleMpe(n, Vector::Zero(p), Matrix::Identity(p, p), beta, rng);
    const Vector mean = X.colwise().mean().transpose();
    const Matrix centered = X.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / (n - 1.0);
    const double expected = covarianceFactor(p, beta);
    for (int i = 0; i < p; ++i)
      worstCov = std::max(worstCov, std::abs(cov(i, i) - expected) / expected);

    const Matrix inv = cov.inverse();
    double b2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vector d = X.row(i).transpose() - mean;
      const double delta = d.dot(inv * d);
      b2 += delta * delta;
    }
    const double gammaHat = b2 / n - p * (p + 2.0);
    if (gammaHat * kurtosisCoefficient(p, beta) <= 0.0) signsOk = false;
  }
  const bool pass = worstCov < 0.05 && signsOk;
  return {pass, "worst cov error " + num(worstCov) +
                    " (limit 0.05), kurtosis signs " +
                    (signsOk ? "match" : "MISMATCH")};
}

/* ---------- 4: GEM monotonicity across the family ---------- */

Outcome gemMonotone() {
  int fits = 0;
  double worstDrop = 0.0;
  std::string failure;
  for (int rep = 0; rep < 10; ++rep) {
    const int p = (rep % 2 == 0) ? 2 : 3;
    const int G = 1 + rep % 3;
    Rng rng = makeRng(deriveSeed(4000, rep));
    Gen gen(5000 + rep);
    Matrix X(200, p);
    int row = 0;
    for (int g = 0; g < G; ++g) {
      const int n = (g == G - 1) ? 200 - row : 200 / G;
      const Vector mu = randomVector(p, gen, 3.0);
      const Matrix sigma = randomSpd(p, gen, 0.4, 2.0);
      X.middleRows(row, n) = sampleGaussian(n, mu, sigma, rng);
      row += n;
    }
    const Responsibilities init = kmeansInit(X, G, 5, deriveSeed(4100, rep));
    for (ScaleStructure s : allScaleStructures)
      for (BetaConstraint bc :
           {BetaConstraint::Equal, BetaConstraint::Variable}) {
        const ModelSpec spec{s, bc, G, p};
        FitConfig cfg;
        cfg.maxIter = 300;
        try {
          const FitReport report = fit(X, spec, init, cfg);
          ++fits;
          for (std::size_t k = 1; k < report.logLikTrace.size(); ++k)
            worstDrop = std::max(
                worstDrop, report.logLikTrace[k - 1] - report.logLikTrace[k]);
        } catch (const FitError& e) {
          failure = modelName(spec) + " rep " + std::to_string(rep) + ": " +
                    e.what();
        }
      }
  }
  const bool pass = worstDrop <= 1e-8 && fits == 160;
  std::string detail = std::to_string(fits) + "/160 fits, worst decrease " +
                       num(worstDrop) + " (limit 1e-8)";
  if (!failure.empty()) detail += ", last failure: " + failure;
  return {pass, detail};
}

/* ---------- 5: simulation study, two spherical components ---------- */

struct Sim1Replicate {
  bool gTwo = false;
  bool eiiv = false;
  double ari = 0.0;
  // matched estimates, component 1 the one near the origin
  double pi1 = 0.0, var1 = 0.0, var2 = 0.0, beta1 = 0.0, beta2 = 0.0;
  Vector mu1, mu2;
};

Sim1Replicate runSim1Replicate(int rep) {
  Sim1Replicate out;
  const SimulatedData data =
      generateScenario(SimScenario::Sim1, 450, deriveSeed(510, rep));
  FamilySearchConfig cfg;
  cfg.gMin = 1;
  cfg.gMax = 3;
  cfg.seed = deriveSeed(520, rep);
  const FamilySearchResult result = familySearch(data.X, cfg);
  if (result.bestByBic < 0) return out;
  const FitCell& best = result.grid[result.bestByBic];
  out.ari = adjustedRandIndex(best.report.labels, data.labels);
  out.gTwo = best.spec.G == 2;
  if (!out.gTwo) return out;
  out.eiiv = modelName(best.spec) == "EIIV";

  const MixtureParams& params = best.report.params;
  const Vector target = (Vector(2) << 2.0, 0.0).finished();
  const int c2 =
      (params.mu[0] - target).norm() < (params.mu[1] - target).norm() ? 0 : 1;
  const int c1 = 1 - c2;
  out.pi1 = params.pi[c1];
  out.mu1 = params.mu[c1];
  out.mu2 = params.mu[c2];
  out.beta1 = params.beta[c1];
  out.beta2 = params.beta[c2];
  out.var1 =
      covarianceOf(reconstructSigma(params.scale, c1), params.beta[c1])(0, 0);
  out.var2 =
      covarianceOf(reconstructSigma(params.scale, c2), params.beta[c2])(0, 0);
  return out;
}

Outcome simulationOne() {
  const int reps = 20;
  std::vector<std::future<Sim1Replicate>> futures;
  for (int rep = 0; rep < reps; ++rep)
    futures.push_back(std::async(std::launch::async, runSim1Replicate, rep));
  std::vector<Sim1Replicate> rows;
  for (auto& f : futures) rows.push_back(f.get());

  int gTwo = 0, eiiv = 0;
  std::vector<double> aris;
  for (const auto& r : rows) {
    gTwo += r.gTwo;
    eiiv += r.eiiv;
    aris.push_back(r.ari);
  }
  std::sort(aris.begin(), aris.end());
  const double medianAri = 0.5 * (aris[reps / 2 - 1] + aris[reps / 2]);

  double pi1 = 0, var1 = 0, var2 = 0, beta1 = 0, beta2 = 0;
  Vector mu1 = Vector::Zero(2), mu2 = Vector::Zero(2);
  for (const auto& r : rows)
    if (r.gTwo) {
      pi1 += r.pi1;
      var1 += r.var1;
      var2 += r.var2;
      beta1 += r.beta1;
      beta2 += r.beta2;
      mu1 += r.mu1;
      mu2 += r.mu2;
    }
  const int m = std::max(gTwo, 1);
  pi1 /= m; var1 /= m; var2 /= m; beta1 /= m; beta2 /= m;
  mu1 /= m; mu2 /= m;

  // replication table for the two component study: replicate means must
  // land inside the reference mean +- 3 sd columns
  bool bands = true;
  auto inBand = [&bands](double value, double mean, double sd) {
    if (std::abs(value - mean) > 3.0 * sd) bands = false;
  };
  inBand(pi1, 0.45, 0.03);
  inBand(mu1[0], -0.01, 0.05);
  inBand(mu1[1], 0.00, 0.04);
  inBand(mu2[0], 2.00, 0.03);
  inBand(mu2[1], 0.00, 0.02);
  inBand(var1, 0.40, 0.02);
  inBand(var2, 0.28, 0.01);
  inBand(beta1, 2.10, 0.39);
  inBand(beta2, 5.77, 3.06);

  const bool pass =
      gTwo >= 18 && eiiv * 10 >= gTwo * 8 && bands && medianAri >= 0.8;
  return {pass, "G=2 " + std::to_string(gTwo) + "/20, EIIV " +
                    std::to_string(eiiv) + "/" + std::to_string(gTwo) +
                    ", median ARI " + num(medianAri) + ", bands " +
                    (bands ? "ok" : "VIOLATED") + " (beta1 " + num(beta1) +
                    ", var1 " + num(var1) + ")"};
}

/* ---------- 6: simulation study, three shared-frame components ---------- */

struct Sim2Replicate {
  bool gThree = false;
  double ari = 0.0;
  std::array<Matrix, 3> cov;
  bool matched = false;
};

Sim2Replicate runSim2Replicate(int rep) {
  Sim2Replicate out;
  const SimulatedData data =
      generateScenario(SimScenario::Sim2, 500, deriveSeed(610, rep));
  FamilySearchConfig cfg;
  cfg.gMin = 1;
  cfg.gMax = 4;
  cfg.seed = deriveSeed(620, rep);
  const FamilySearchResult result = familySearch(data.X, cfg);
  if (result.bestByBic < 0) return out;
  const FitCell& best = result.grid[result.bestByBic];
  out.ari = adjustedRandIndex(best.report.labels, data.labels);
  out.gThree = best.spec.G == 3;
  if (!out.gThree) return out;

  const MixtureParams& params = best.report.params;
  std::array<bool, 3> used = {false, false, false};
  out.matched = true;
  for (int t = 0; t < 3; ++t) {
    int bestG = -1;
    double bestDist = 1e300;
    for (int g = 0; g < 3; ++g) {
      if (used[g]) continue;
      const double dist = (params.mu[g] - data.components[t].mu).norm();
      if (dist < bestDist) {
        bestDist = dist;
        bestG = g;
      }
    }
    used[bestG] = true;
    if (bestDist > 1.0) out.matched = false;
    out.cov[t] = covarianceOf(reconstructSigma(params.scale, bestG),
                              params.beta[bestG]);
  }
  return out;
}

Outcome simulationTwo() {
  const int reps = 10;
  std::vector<std::future<Sim2Replicate>> futures;
  for (int rep = 0; rep < reps; ++rep)
    futures.push_back(std::async(std::launch::async, runSim2Replicate, rep));
  std::vector<Sim2Replicate> rows;
  for (auto& f : futures) rows.push_back(f.get());

  int gThree = 0;
  std::vector<double> aris;
  for (const auto& r : rows) {
    gThree += r.gThree;
    aris.push_back(r.ari);
  }
  std::sort(aris.begin(), aris.end());
  const double medianAri = 0.5 * (aris[reps / 2 - 1] + aris[reps / 2]);

  std::array<Matrix, 3> covMean;
  for (auto& v : covMean) v = Matrix::Zero(3, 3);
  int usable = 0;
  for (const auto& r : rows)
    if (r.gThree && r.matched) {
      ++usable;
      for (int t = 0; t < 3; ++t) covMean[t] += r.cov[t];
    }
  bool bands = usable > 0;
  if (usable > 0) {
    for (int t = 0; t < 3; ++t) covMean[t] /= usable;
    // replication table for the three component study: mean and sd of
    // every covariance entry
    const std::array<std::array<std::array<double, 3>, 3>, 3> mean = {{
        {{{2.88, -0.41, 1.75}, {-0.41, 5.71, -0.57}, {1.75, -0.57, 3.89}}},
        {{{0.49, -0.07, 0.30}, {-0.07, 0.98, -0.10}, {0.30, -0.10, 0.67}}},
        {{{0.42, -0.06, 0.25}, {-0.06, 0.83, -0.08}, {0.25, -0.08, 0.57}}},
    }};
    const std::array<std::array<std::array<double, 3>, 3>, 3> sd = {{
        {{{0.27, 0.16, 0.20}, {0.16, 0.53, 0.18}, {0.20, 0.18, 0.34}}},
        {{{0.05, 0.03, 0.04}, {0.03, 0.09, 0.03}, {0.04, 0.03, 0.06}}},
        {{{0.02, 0.02, 0.02}, {0.02, 0.04, 0.02}, {0.02, 0.02, 0.03}}},
    }};
    for (int t = 0; t < 3; ++t)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (std::abs(covMean[t](i, j) - mean[t][i][j]) > 3.0 * sd[t][i][j])
            bands = false;
  }

  const bool pass = gThree >= 8 && medianAri >= 0.9 && bands;
  return {pass, "G=3 " + std::to_string(gThree) + "/10, median ARI " +
                    num(medianAri) + ", covariance bands " +
                    (bands ? "ok" : "VIOLATED") + " over " +
                    std::to_string(usable) + " replicates"};
}

/* ---------- 7: high dimensional spot check ---------- */

struct Sim3Replicate {
  bool perfect = false;
  Vector muErr0, muErr1;
  double beta1 = 0.0;
};

Sim3Replicate runSim3Replicate(int rep) {
  const SimulatedData data =
      generateScenario(SimScenario::Sim3, 400, deriveSeed(710, rep));
  const Responsibilities init = kmeansInit(data.X, 2, 10, deriveSeed(720, rep));
  const ModelSpec spec{ScaleStructure::EEE, BetaConstraint::Variable, 2, 30};
  const FitReport report = fit(data.X, spec, init);

  Sim3Replicate out;
  out.perfect = adjustedRandIndex(report.labels, data.labels) == 1.0;
  // component 1 is the one centred at the origin
  const int c1 =
      report.params.mu[0].norm() < report.params.mu[1].norm() ? 0 : 1;
  out.muErr0 = report.params.mu[c1] - data.components[0].mu;
  out.muErr1 = report.params.mu[1 - c1] - data.components[1].mu;
  out.beta1 = report.params.beta[c1];
  return out;
}

Outcome simulationThree() {
  // the reference bias table averages 100 runs; 12 replicates put the noise
  // floor of the bias norm safely under the 0.2 band while a real bias of
  // that size would still trip it
  const int reps = 12;
  std::vector<std::future<Sim3Replicate>> futures;
  for (int rep = 0; rep < reps; ++rep)
    futures.push_back(std::async(std::launch::async, runSim3Replicate, rep));

  std::array<Vector, 2> muBias = {Vector::Zero(30), Vector::Zero(30)};
  double beta1 = 0.0;
  int perfect = 0;
  for (auto& f : futures) {
    const Sim3Replicate r = f.get();
    perfect += r.perfect;
    muBias[0] += r.muErr0;
    muBias[1] += r.muErr1;
    beta1 += r.beta1;
  }
  const double bias0 = (muBias[0] / reps).norm();
  const double bias1 = (muBias[1] / reps).norm();
  const double betaBias = std::abs(beta1 / reps - 2.0);
  const bool pass =
      perfect == reps && bias0 < 0.2 && bias1 < 0.2 && betaBias < 1.0;
  return {pass, "ARI=1 on " + std::to_string(perfect) + "/" +
                    std::to_string(reps) + ", mu bias norms " + num(bias0) +
                    "/" + num(bias1) + " (limit 0.2), beta1 bias " +
                    num(betaBias) + " (limit 1.0)"};
}

/* ---------- 8: fixed point lab ---------- */

Outcome fixedPointLab() {
  const int seeds = 20;
  bool finiteOk = true, gemOk = true;
  int divergedHeavy = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    for (double beta : {1.5, 1.9, 1.95, 2.05}) {
      Rng rng = makeRng(deriveSeed(810 + static_cast<int>(beta * 100), seed));
      const Matrix X =
          sampleMpe(1000, Vector::Zero(2), Matrix::Identity(2, 2), beta, rng);
      const TrajectoryPair pair =
          compareTrajectories(X, Vector::Zero(2), beta, 300);
      for (std::size_t k = 1; k < pair.gem.logLik.size(); ++k)
        if (pair.gem.logLik[k] <
            pair.gem.logLik[k - 1] -
                1e-8 * std::max(1.0, std::abs(pair.gem.logLik[k - 1])))
          gemOk = false;
      if (beta == 2.05) {
        divergedHeavy += pair.fixedPoint.diverged;
      } else {
        for (double value : pair.fixedPoint.logLik)
          if (!std::isfinite(value)) finiteOk = false;
      }
    }
  }

  double worstTrace = 0.0;
  for (int p : {1, 2, 3})
    for (double beta : {0.5, 1.0, 1.5}) {
      Rng rng = makeRng(deriveSeed(830 + p, static_cast<int>(beta * 100)));
      const Matrix X =
          sampleMpe(500, Vector::Zero(p), Matrix::Identity(p, p), beta, rng);
      const Matrix sigmaHat = estimateStationaryScale(X, Vector::Zero(p), beta);
      const double trace =
          jacobianTraceAtFixedPoint(X, Vector::Zero(p), sigmaHat, beta);
      const double expected = p * (1.0 - beta);
      worstTrace =
          std::max(worstTrace, std::abs(trace - expected) /
                                   std::max(1.0, std::abs(expected)));
    }

  const bool pass =
      finiteOk && gemOk && divergedHeavy >= 19 && worstTrace <= 0.02;
  return {pass,
          "stable exponents finite " + std::string(finiteOk ? "yes" : "NO") +
              ", heavy diverged " + std::to_string(divergedHeavy) +
              "/20, gem monotone " + (gemOk ? "yes" : "NO") +
              ", worst jacobian error " + num(worstTrace) + " (limit 0.02)"};
}

/* ---------- 9: property suites ---------- */

ScaleDecomposition runStructureUpdate(ScaleStructure s,
                                      const ScatterCache& cache,
                                      const ScaleDecomposition& scale,
                                      const Vector& beta) {
  switch (s) {
    case ScaleStructure::EII: return updateEII(cache, scale, beta);
    case ScaleStructure::VII: return updateVII(cache, scale, beta);
    case ScaleStructure::EEI: return updateEEI(cache, scale, beta);
    case ScaleStructure::VVI: return updateVVI(cache, scale, beta);
    case ScaleStructure::EEE: return updateEEE(cache, scale, beta);
    case ScaleStructure::EEV: return updateEEV(cache, scale, beta);
    case ScaleStructure::VVE: return updateVVE(cache, scale, beta);
    case ScaleStructure::VVV: return updateVVV(cache, scale, beta);
  }
  throw std::logic_error("unreachable");
}

Outcome propertySuites() {
  // every scale update leaves its objective non-decreasing, 1000 randomized
  // instances per structure
  Gen gen(9001);
  std::uniform_real_distribution<double> betaDist(0.5, 3.0);
  std::uniform_real_distribution<double> evDist(0.5, 2.0);
  std::uniform_real_distribution<double> tauDist(0.05, 1.0);
  std::normal_distribution<double> normal;
  double worstDrop = 0.0;
  for (ScaleStructure s : allScaleStructures) {
    for (int rep = 0; rep < 1000; ++rep) {
      const int G = 1 + static_cast<int>(gen() % 3);
      const int p = 2 + static_cast<int>(gen() % 3);
      const int N = 30 + static_cast<int>(gen() % 40);
      Matrix X(N, p);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = 2.0 * normal(gen);
      Matrix tau(N, G);
      for (int i = 0; i < N; ++i) {
        double sum = 0.0;
        for (int g = 0; g < G; ++g) {
          tau(i, g) = tauDist(gen);
          sum += tau(i, g);
        }
        tau.row(i) /= sum;
      }
      std::vector<Vector> mu(G);
      for (int g = 0; g < G; ++g) mu[g] = randomVector(p, gen, 0.5);
      const ScatterCache cache = makeScatterCache(X, tau, mu);
      ScaleDecomposition scale = ScaleDecomposition::identity(s, G, p);
      for (int g = 0; g < G; ++g) {
        Vector values(p);
        for (int i = 0; i < p; ++i) values[i] = evDist(gen);
        scale.setEigenvalues(g, values);
        if (!gammaIdentity(s)) scale.setGamma(g, randomOrthonormal(p, gen));
      }
      canonicalizeScale(scale);
      Vector beta(G);
      for (int g = 0; g < G; ++g) beta[g] = betaDist(gen);

      const double before = computeScaleQ(cache, scale, beta);
      const ScaleDecomposition after =
          runStructureUpdate(s, cache, scale, beta);
      const double gain = computeScaleQ(cache, after, beta) - before;
      worstDrop = std::max(worstDrop, -gain / std::max(1.0, std::abs(before)));
    }
  }
  if (worstDrop > 1e-8)
    return {false, "scale update decreased its objective by " + num(worstDrop)};

  // orientation gradient against central differences through the retraction
  double worstGrad = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int p = 2 + static_cast<int>(gen() % 3);
    const Matrix X = randomOrthonormal(p, gen);
    std::vector<TracePowerTerm> terms;
    for (int t = 0; t < 2; ++t) {
      TracePowerTerm term;
      term.Q = randomSpd(p, gen, 0.5, 2.0);
      term.aInv = Vector(p);
      for (int i = 0; i < p; ++i) term.aInv[i] = evDist(gen);
      term.beta = betaDist(gen);
      terms.push_back(term);
    }
    const Matrix grad = riemannianGradForTracePower(X, terms);
    Matrix Z(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) Z(i, j) = normal(gen);
    Matrix xi = projectToTangent(X, Z);
    xi /= xi.norm();
    const double h = 1e-5;
    const double fd = (tracePowerObjective(qrRetract(X, h * xi), terms) -
                       tracePowerObjective(qrRetract(X, -h * xi), terms)) /
                      (2.0 * h);
    const double analytic = (grad.array() * xi.array()).sum();
    worstGrad = std::max(
        worstGrad, std::abs(fd - analytic) / std::max(1.0, std::abs(analytic)));
  }
  if (worstGrad > 1e-4)
    return {false,
            "orientation gradient off by " + num(worstGrad) + " relative"};

  // agreement index identities
  auto randomLabels = [&gen](int n, int k) {
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = static_cast<int>(gen() % k);
    return labels;
  };
  double total = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    const std::vector<int> a = randomLabels(60, 3);
    if (rep % 100 == 0 && adjustedRandIndex(a, a) != 1.0)
      return {false, "ARI of a partition with itself is not 1"};
    total += adjustedRandIndex(a, randomLabels(60, 3));
  }
  const double meanAri = std::abs(total / 10000.0);
  if (meanAri >= 0.02)
    return {false, "mean |ARI| of random pairs " + num(meanAri)};

  // the entropy penalty can only lower the criterion
  for (int rep = 0; rep < 500; ++rep) {
    const int N = 10 + static_cast<int>(gen() % 50);
    const int G = 2 + static_cast<int>(gen() % 3);
    Matrix tau(N, G);
    for (int i = 0; i < N; ++i) {
      double sum = 0.0;
      for (int g = 0; g < G; ++g) {
        tau(i, g) = tauDist(gen);
        sum += tau(i, g);
      }
      tau.row(i) /= sum;
    }
    const double b = -500.0 * tauDist(gen);
    if (icl(b, tau) > b + 1e-12) return {false, "ICL exceeded BIC"};
  }

  // free parameter counts for every structure and size
  const auto triangle = [](int p) { return p * (p + 1) / 2; };
  for (int G : {1, 2, 3})
    for (int p : {1, 2, 5})
      for (ScaleStructure s : allScaleStructures) {
        int expected = 0;
        switch (s) {
          case ScaleStructure::EII: expected = 1; break;
          case ScaleStructure::VII: expected = G; break;
          case ScaleStructure::EEI: expected = p; break;
          case ScaleStructure::VVI: expected = G * p; break;
          case ScaleStructure::EEE: expected = triangle(p); break;
          case ScaleStructure::EEV:
            expected = p + G * (triangle(p) - p);
            break;
          case ScaleStructure::VVE:
            expected = G * p + (triangle(p) - p);
            break;
          case ScaleStructure::VVV: expected = G * triangle(p); break;
        }
        if (freeScaleParamCount(s, G, p) != expected)
          return {false, "scale parameter count wrong for " +
                             scaleStructureName(s) + " G=" + std::to_string(G) +
                             " p=" + std::to_string(p)};
      }

  return {true, "MM monotone on 8000 instances, gradient error " +
                    num(worstGrad) + ", mean |ARI| " + num(meanAri) +
                    ", ICL<=BIC, parameter table verified"};
}

/* ---------- 10: CLI pipeline smoke ---------- */

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Outcome cliSmoke() {
#if !defined(EPEM_CLI_PATH) || !defined(EPEM_DATA_FILE)
  return {false, "CLI or data path not configured at build time"};
#else
  const std::string cli = EPEM_CLI_PATH;
  const std::string dataPath = EPEM_DATA_FILE;
  if (readFile(dataPath).empty())
    return {false, "bundled dataset missing: " + dataPath};

  char tmpl[] = "/tmp/epem_acceptance_XXXXXX";
  if (mkdtemp(tmpl) == nullptr) return {false, "mkdtemp failed"};
  const std::string dir = tmpl;
  const std::string out1 = dir + "/fit1.json";
  const std::string out2 = dir + "/fit2.json";

  const std::string base = cli + " fit --input " + dataPath +
                           " --gmin 2 --gmax 3 --seed 17 --out ";
  if (std::system((base + out1).c_str()) != 0)
    return {false, "fit subcommand failed"};

  const std::string first = readFile(out1);
  if (first.empty()) return {false, "fit produced no output"};
  Json doc;
  try {
    doc = Json::parse(first);
  } catch (const std::exception& e) {
    return {false, std::string("output is not valid JSON: ") + e.what()};
  }
  for (const char* key : {"command", "config", "data", "models", "best_by_bic",
                          "best_by_icl"})
    if (!doc.contains(key))
      return {false, std::string("result document is missing ") + key};
  if (doc["command"] != "fit" || !doc["models"].is_array() ||
      doc["models"].empty())
    return {false, "result document malformed"};
  for (const Json& row : doc["models"])
    if (!row.contains("name") || !row.contains("G") || !row.contains("ok"))
      return {false, "model row malformed"};
  const Json& best = doc["best_by_bic"];
  for (const char* key :
       {"name", "parameters", "map_labels", "loglik_trace", "bic", "icl"})
    if (!best.contains(key))
      return {false, std::string("winner node is missing ") + key};
  if (static_cast<int>(best["map_labels"].size()) !=
      doc["data"]["rows"].get<int>())
    return {false, "label count does not match the dataset"};
  const Json& params = best["parameters"];
  for (const char* key : {"model", "pi", "mu", "beta", "scale"})
    if (!params.contains(key))
      return {false, std::string("parameter node is missing ") + key};

  if (std::system((base + out2).c_str()) != 0)
    return {false, "second fit run failed"};
  if (readFile(out2) != first) return {false, "rerun differs byte for byte"};

  return {true, "fit on bundled data, schema checks, rerun byte-identical"};
#endif
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gaussian-reduction", gaussianReduction},
      {"density-normalization", quadratureNormalization},
      {"moment-identities", momentIdentities},
      {"gem-monotonicity", gemMonotone},
      {"two-component-replication", simulationOne},
      {"three-component-replication", simulationTwo},
      {"high-dimension-spot-check", simulationThree},
      {"fixed-point-lab", fixedPointLab},
      {"property-suites", propertySuites},
      {"cli-pipeline", cliSmoke},
  };

  bool allPass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    allPass = allPass && outcome.pass;
    std::printf("[%s] %zu %s: %s\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, outcome.detail.c_str());
    std::fflush(stdout);
  }
  return allPass ? 0 : 1;
}
