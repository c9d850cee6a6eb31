#include "epem/sampler.hpp"

#include <cmath>

namespace epem {

std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng makeRng(std::uint64_t seed) { return Rng(seed); }

namespace {

Matrix symmetricSqrt(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("scale matrix must be positive definite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

Vector sphereDraw(int p, Rng& rng, std::normal_distribution<double>& normal) {
  Vector u(p);
  double norm2 = 0.0;
  do {
    for (int j = 0; j < p; ++j) u[j] = normal(rng);
    norm2 = u.squaredNorm();
  } while (norm2 == 0.0);
  return u / std::sqrt(norm2);
}

}  // namespace

Matrix sampleMpe(int n, const Vector& mu, const Matrix& sigma, double beta,
                 Rng& rng) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  const int p = static_cast<int>(mu.size());
  const Matrix root = symmetricSqrt(sigma);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> gamma(p / (2.0 * beta), 2.0);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i) {
    const Vector u = sphereDraw(p, rng, normal);
    const double radius = std::pow(gamma(rng), 1.0 / (2.0 * beta));
    X.row(i) = (mu + radius * (root * u)).transpose();
  }
  return X;
}

Matrix sampleGaussian(int n, const Vector& mu, const Matrix& sigma, Rng& rng) {
  const int p = static_cast<int>(mu.size());
  const Matrix root = symmetricSqrt(sigma);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(n, p);
  Vector z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z[j] = normal(rng);
    X.row(i) = (mu + root * z).transpose();
  }
  return X;
}

Matrix sampleStudentT(int n, const Vector& mu, const Matrix& sigma, double dof,
                      Rng& rng) {
  if (!(dof > 0.0)) throw std::invalid_argument("dof must be positive");
  const int p = static_cast<int>(mu.size());
  const Matrix root = symmetricSqrt(sigma);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> chi2(dof / 2.0, 2.0);
  Matrix X(n, p);
  Vector z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z[j] = normal(rng);
    const double w = std::sqrt(dof / chi2(rng));
    X.row(i) = (mu + w * (root * z)).transpose();
  }
  return X;
}

SimScenario parseScenario(const std::string& name) {
  if (name == "sim1") return SimScenario::Sim1;
  if (name == "sim2") return SimScenario::Sim2;
  if (name == "sim3") return SimScenario::Sim3;
  if (name == "sim4") return SimScenario::Sim4;
  throw std::invalid_argument("unknown scenario: " + name);
}

std::string scenarioName(SimScenario scenario) {
  switch (scenario) {
    case SimScenario::Sim1: return "sim1";
    case SimScenario::Sim2: return "sim2";
    case SimScenario::Sim3: return "sim3";
    case SimScenario::Sim4: return "sim4";
  }
  throw std::invalid_argument("unknown scenario");
}

namespace {

/* Multinomial component sizes via chained binomials. */
std::vector<int> drawCounts(int n, const Vector& weights, Rng& rng) {
  const int G = static_cast<int>(weights.size());
  std::vector<int> counts(G, 0);
  int remaining = n;
  double massLeft = 1.0;
  for (int g = 0; g < G - 1; ++g) {
    const double prob = std::min(1.0, weights[g] / massLeft);
    std::binomial_distribution<int> binom(remaining, prob);
    counts[g] = binom(rng);
    remaining -= counts[g];
    massLeft -= weights[g];
  }
  counts[G - 1] = remaining;
  return counts;
}

SimulatedData assemble(SimScenario scenario, const Vector& weights,
                       const std::vector<ComponentTruth>& comps, int n,
                       std::uint64_t seed) {
  Rng rng = makeRng(deriveSeed(seed, 0));
  const std::vector<int> counts = drawCounts(n, weights, rng);
  const int p = static_cast<int>(comps.front().mu.size());
  SimulatedData out;
  out.scenario = scenarioName(scenario);
  out.weights = weights;
  out.components = comps;
  out.X.resize(n, p);
  out.labels.resize(n);
  int row = 0;
  for (std::size_t g = 0; g < comps.size(); ++g) {
    const ComponentTruth& c = comps[g];
    Matrix block;
    if (c.kind == "mpe")
      block = sampleMpe(counts[g], c.mu, c.sigma, c.beta, rng);
    else if (c.kind == "gaussian")
      block = sampleGaussian(counts[g], c.mu, c.sigma, rng);
    else
      block = sampleStudentT(counts[g], c.mu, c.sigma, c.dof, rng);
    for (int i = 0; i < counts[g]; ++i, ++row) {
      out.X.row(row) = block.row(i);
      out.labels[row] = static_cast<int>(g);
    }
  }
  return out;
}

}  // namespace

SimulatedData generateScenario(SimScenario scenario, int n,
                               std::uint64_t seed) {
  switch (scenario) {
    case SimScenario::Sim1: {
      // Two spherical components, moderate overlap, light and very light tails.
      if (n <= 0) n = 450;
      Vector w(2);
      w << 0.45, 0.55;
      ComponentTruth a{"mpe", Vector::Zero(2), Matrix::Identity(2, 2), 2.0, 0.0};
      ComponentTruth b{"mpe", Vector::Zero(2), Matrix::Identity(2, 2), 5.0, 0.0};
      b.mu << 2.0, 0.0;
      return assemble(scenario, w, {a, b}, n, seed);
    }
    case SimScenario::Sim2: {
      // Three components sharing orientation and shape, tails from heavy to
      // very light.
      if (n <= 0) n = 500;
      Vector w(3);
      w << 0.35, 0.15, 0.5;
      Matrix gamma(3, 3);
      gamma << 0.36, 0.48, -0.8,
               -0.8, 0.6, 0.0,
               0.48, 0.64, 0.6;
      const Vector shape = (Vector(3) << 4.0, 3.0, 1.0).finished();
      const Matrix sigma = gamma * shape.asDiagonal() * gamma.transpose();
      ComponentTruth c1{"mpe", (Vector(3) << 0, 2, 0).finished(), sigma, 0.85, 0};
      ComponentTruth c2{"mpe", (Vector(3) << 2, 5, 0).finished(), sigma, 3.0, 0};
      ComponentTruth c3{"mpe", (Vector(3) << 4, 2, 0).finished(), sigma, 5.0, 0};
      return assemble(scenario, w, {c1, c2, c3}, n, seed);
    }
    case SimScenario::Sim3: {
      // Thirty dimensional pair with a block Kronecker scale.
      if (n <= 0) n = 400;
      Vector w(2);
      w << 0.35, 0.65;
      Matrix base(3, 3);
      base << 1.0, 0.1, 0.2,
              0.1, 1.5, 0.3,
              0.2, 0.3, 1.2;
      Matrix sigma = Matrix::Zero(30, 30);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          for (int j = 0; j < 10; ++j) sigma(a * 10 + j, b * 10 + j) = base(a, b);
      ComponentTruth c1{"mpe", Vector::Zero(30), sigma, 2.0, 0.0};
      ComponentTruth c2{"mpe", Vector::Constant(30, 3.0), sigma, 0.95, 0.0};
      return assemble(scenario, w, {c1, c2}, n, seed);
    }
    case SimScenario::Sim4: {
      // Contamination check: one Gaussian and one heavy tailed Student t.
      if (n <= 0) n = 100;
      Vector w(2);
      w << 0.4, 0.6;
      Matrix sigma(3, 3);
      sigma << 1.0, 0.5, 0.25,
               0.5, 1.0, 0.3,
               0.25, 0.3, 1.0;
      ComponentTruth c1{"gaussian", Vector::Zero(3), sigma, 1.0, 0.0};
      ComponentTruth c2{"student", (Vector(3) << 5, 0, 0).finished(), sigma, 1.0,
                        5.0};
      return assemble(scenario, w, {c1, c2}, n, seed);
    }
  }
  throw std::invalid_argument("unknown scenario");
}

}  // namespace epem
