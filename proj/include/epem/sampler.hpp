#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "epem/types.hpp"

namespace epem {

using Rng = std::mt19937_64;

/* splitmix64 mix of (seed, stream) for decorrelated substreams. */
std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream);

Rng makeRng(std::uint64_t seed);

/*
 * Exact draws via the stochastic representation X = mu + R Sigma^{1/2} U with
 * U uniform on the unit sphere and R^{2 beta} ~ Gamma(p/(2 beta), scale 2).
 * Sigma^{1/2} is the symmetric square root.
 */
Matrix sampleMpe(int n, const Vector& mu, const Matrix& sigma, double beta,
                 Rng& rng);

Matrix sampleGaussian(int n, const Vector& mu, const Matrix& sigma, Rng& rng);

/* Multivariate Student t with the given degrees of freedom. */
Matrix sampleStudentT(int n, const Vector& mu, const Matrix& sigma, double dof,
                      Rng& rng);

enum class SimScenario { Sim1, Sim2, Sim3, Sim4 };

SimScenario parseScenario(const std::string& name);
std::string scenarioName(SimScenario scenario);

struct ComponentTruth {
  std::string kind;  // "mpe", "gaussian" or "student"
  Vector mu;
  Matrix sigma;
  double beta = 1.0;  // mpe only
  double dof = 0.0;   // student only
};

struct SimulatedData {
  std::string scenario;
  Matrix X;
  std::vector<int> labels;
  Vector weights;
  std::vector<ComponentTruth> components;
};

/*
 * Benchmark scenarios.  n = 0 keeps each scenario's default size
 * (450, 500, 400, 100).  Component sizes are drawn binomially or
 * multinomially from the scenario weights, then rows are emitted grouped
 * by component with the labels recording membership.
 */
SimulatedData generateScenario(SimScenario scenario, int n, std::uint64_t seed);

}  // namespace epem
