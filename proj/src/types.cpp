#include "epem/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace epem {

std::string scaleStructureName(ScaleStructure s) {
  switch (s) {
    case ScaleStructure::EII: return "EII";
    case ScaleStructure::VII: return "VII";
    case ScaleStructure::EEI: return "EEI";
    case ScaleStructure::VVI: return "VVI";
    case ScaleStructure::EEE: return "EEE";
    case ScaleStructure::EEV: return "EEV";
    case ScaleStructure::VVE: return "VVE";
    case ScaleStructure::VVV: return "VVV";
  }
  throw std::invalid_argument("unknown scale structure");
}

ScaleStructure parseScaleStructure(const std::string& name) {
  for (ScaleStructure s : allScaleStructures)
    if (scaleStructureName(s) == name) return s;
  throw std::invalid_argument("unknown scale structure: " + name);
}

bool lambdaShared(ScaleStructure s) {
  switch (s) {
    case ScaleStructure::EII:
    case ScaleStructure::EEI:
    case ScaleStructure::EEE:
    case ScaleStructure::EEV: return true;
    default: return false;
  }
}

bool deltaShared(ScaleStructure s) {
  switch (s) {
    case ScaleStructure::EEI:
    case ScaleStructure::EEE:
    case ScaleStructure::EEV: return true;
    default: return deltaIdentity(s);
  }
}

bool gammaShared(ScaleStructure s) {
  switch (s) {
    case ScaleStructure::EEE:
    case ScaleStructure::VVE: return true;
    default: return gammaIdentity(s);
  }
}

bool deltaIdentity(ScaleStructure s) {
  return s == ScaleStructure::EII || s == ScaleStructure::VII;
}

bool gammaIdentity(ScaleStructure s) {
  switch (s) {
    case ScaleStructure::EII:
    case ScaleStructure::VII:
    case ScaleStructure::EEI:
    case ScaleStructure::VVI: return true;
    default: return false;
  }
}

std::string modelName(const ModelSpec& spec) {
  return scaleStructureName(spec.structure) +
         (spec.beta == BetaConstraint::Equal ? "E" : "V");
}

ModelSpec decodeModelName(const std::string& name, int G, int p) {
  if (name.size() != 4)
    throw std::invalid_argument("model name must have four letters: " + name);
  ModelSpec spec;
  spec.structure = parseScaleStructure(name.substr(0, 3));
  if (name[3] == 'E')
    spec.beta = BetaConstraint::Equal;
  else if (name[3] == 'V')
    spec.beta = BetaConstraint::Variable;
  else
    throw std::invalid_argument("shape constraint letter must be E or V: " + name);
  spec.G = G;
  spec.p = p;
  return spec;
}

int freeScaleParamCount(ScaleStructure s, int G, int p) {
  if (G < 1 || p < 1) throw std::invalid_argument("G and p must be positive");
  switch (s) {
    case ScaleStructure::EII: return 1;
    case ScaleStructure::VII: return G;
    case ScaleStructure::EEI: return p;
    case ScaleStructure::VVI: return G * p;
    case ScaleStructure::EEE: return p * (p + 1) / 2;
    case ScaleStructure::EEV: return G * p * (p + 1) / 2 - (G - 1) * p;
    case ScaleStructure::VVE: return p * (p + 1) / 2 + (G - 1) * p;
    case ScaleStructure::VVV: return G * p * (p + 1) / 2;
  }
  throw std::invalid_argument("unknown scale structure");
}

int totalFreeParams(const ModelSpec& spec) {
  const int shape = spec.beta == BetaConstraint::Equal ? 1 : spec.G;
  return (spec.G - 1) + spec.G * spec.p +
         freeScaleParamCount(spec.structure, spec.G, spec.p) + shape;
}

ScaleDecomposition::ScaleDecomposition(ScaleStructure structure, int G, int p)
    : structure_(structure), G_(G), p_(p) {
  if (G < 1 || p < 1) throw std::invalid_argument("G and p must be positive");
  lambda_.assign(lambdaShared(structure) ? 1 : G, 1.0);
  delta_.assign(deltaShared(structure) ? 1 : G, Vector::Ones(p));
  gamma_.assign(gammaShared(structure) ? 1 : G, Matrix::Identity(p, p));
}

ScaleDecomposition ScaleDecomposition::identity(ScaleStructure structure, int G,
                                                int p) {
  return ScaleDecomposition(structure, G, p);
}

Vector ScaleDecomposition::eigenvalues(int g) const {
  return lambda(g) * delta(g);
}

void ScaleDecomposition::setEigenvalues(int g, const Vector& values) {
  if (values.size() != p_)
    throw std::invalid_argument("eigenvalue vector has wrong size");
  if ((values.array() <= 0.0).any())
    throw std::invalid_argument("eigenvalues must be positive");
  // Geometric mean becomes the volume, the remainder the unit determinant shape.
  const double logVolume = values.array().log().mean();
  const double vol = std::exp(logVolume);
  setLambda(g, vol);
  if (!deltaIdentity(structure_)) setDelta(g, values / vol);
}

Matrix reconstructSigma(const ScaleDecomposition& scale, int g) {
  const Matrix& gam = scale.gamma(g);
  return gam * scale.eigenvalues(g).asDiagonal() * gam.transpose();
}

void canonicalizeScale(ScaleDecomposition& scale) {
  const ScaleStructure s = scale.structure();
  const int G = scale.componentCount();
  const int p = scale.dimension();

  // Sorting permutes Gamma columns together with Delta entries. That is only
  // well defined when the pairing is unambiguous: per-component pairs (VVV),
  // one shared pair (EEE), or a shared Delta applied to every Gamma (EEV).
  const bool sortable = s == ScaleStructure::VVV || s == ScaleStructure::EEE ||
                        s == ScaleStructure::EEV;
  if (sortable) {
    const int deltaBlocks = deltaShared(s) ? 1 : G;
    for (int b = 0; b < deltaBlocks; ++b) {
      Vector d = scale.delta(b);
      std::vector<int> order(p);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int c) { return d[a] > d[c]; });
      Vector sorted(p);
      for (int h = 0; h < p; ++h) sorted[h] = d[order[h]];
      scale.setDelta(b, sorted);
      const int gammaBlocks = gammaShared(s) ? 1 : G;
      for (int gb = 0; gb < gammaBlocks; ++gb) {
        if (!deltaShared(s) && gb != b) continue;
        Matrix gam = scale.gamma(gb);
        Matrix permuted(p, p);
        for (int h = 0; h < p; ++h) permuted.col(h) = gam.col(order[h]);
        scale.setGamma(gb, permuted);
      }
    }
  }

  if (!gammaIdentity(s)) {
    const int gammaBlocks = gammaShared(s) ? 1 : G;
    for (int gb = 0; gb < gammaBlocks; ++gb) {
      Matrix gam = scale.gamma(gb);
      for (int h = 0; h < p; ++h) {
        int lead = 0;
        while (lead < p - 1 && std::abs(gam(lead, h)) < 1e-12) ++lead;
        if (gam(lead, h) < 0.0) gam.col(h) *= -1.0;
      }
      scale.setGamma(gb, gam);
    }
  }
}

void validateScale(const ScaleDecomposition& scale, double tol) {
  const ScaleStructure s = scale.structure();
  const int G = scale.componentCount();
  const int p = scale.dimension();
  if (G < 1 || p < 1) throw std::invalid_argument("empty scale decomposition");

  if (scale.storedLambdaCount() != (lambdaShared(s) ? 1 : G))
    throw std::invalid_argument("lambda storage does not match structure");
  if (scale.storedDeltaCount() != (deltaShared(s) ? 1 : G))
    throw std::invalid_argument("Delta storage does not match structure");
  if (scale.storedGammaCount() != (gammaShared(s) ? 1 : G))
    throw std::invalid_argument("Gamma storage does not match structure");

  for (int g = 0; g < G; ++g) {
    if (!(scale.lambda(g) > 0.0))
      throw std::invalid_argument("lambda must be positive");
    const Vector& d = scale.delta(g);
    if (d.size() != p) throw std::invalid_argument("Delta has wrong size");
    if ((d.array() <= 0.0).any())
      throw std::invalid_argument("Delta entries must be positive");
    const double logDet = d.array().log().sum();
    if (std::abs(logDet) > tol)
      throw std::invalid_argument("det(Delta) must equal one");
    if (deltaIdentity(s) && (d.array() - 1.0).abs().maxCoeff() > tol)
      throw std::invalid_argument("spherical structure requires Delta = I");
    const Matrix& gam = scale.gamma(g);
    if (gam.rows() != p || gam.cols() != p)
      throw std::invalid_argument("Gamma has wrong size");
    const double orthErr =
        (gam.transpose() * gam - Matrix::Identity(p, p)).norm();
    if (orthErr > tol)
      throw std::invalid_argument("Gamma must be orthonormal");
    if (gammaIdentity(s) && (gam - Matrix::Identity(p, p)).norm() > tol)
      throw std::invalid_argument("axis aligned structure requires Gamma = I");
  }
}

void validateParams(const MixtureParams& params, double tol) {
  const int G = params.spec.G;
  const int p = params.spec.p;
  if (G < 1 || p < 1) throw std::invalid_argument("invalid model dimensions");
  if (params.pi.size() != G)
    throw std::invalid_argument("pi has wrong size");
  if ((params.pi.array() <= 0.0).any())
    throw std::invalid_argument("mixing proportions must be positive");
  if (std::abs(params.pi.sum() - 1.0) > tol)
    throw std::invalid_argument("mixing proportions must sum to one");
  if (static_cast<int>(params.mu.size()) != G)
    throw std::invalid_argument("mu has wrong component count");
  for (const Vector& m : params.mu) {
    if (m.size() != p) throw std::invalid_argument("mu has wrong dimension");
    if (!m.allFinite()) throw std::invalid_argument("mu must be finite");
  }
  if (params.beta.size() != G)
    throw std::invalid_argument("beta has wrong size");
  for (int g = 0; g < G; ++g)
    if (!(params.beta[g] > 0.0) || !(params.beta[g] < 200.0))
      throw std::invalid_argument("beta must lie in (0, 200)");
  if (params.spec.beta == BetaConstraint::Equal)
    for (int g = 1; g < G; ++g)
      if (params.beta[g] != params.beta[0])
        throw std::invalid_argument("equal shape constraint violated");
  if (params.scale.componentCount() != G || params.scale.dimension() != p ||
      params.scale.structure() != params.spec.structure)
    throw std::invalid_argument("scale decomposition does not match spec");
  validateScale(params.scale);
}

void validateDataset(const Dataset& data) {
  if (data.X.rows() < 1 || data.X.cols() < 1)
    throw std::invalid_argument("dataset must be non-empty");
  if (!data.X.allFinite())
    throw std::invalid_argument("dataset contains non-finite entries");
  if (!data.columnNames.empty() &&
      static_cast<int>(data.columnNames.size()) != data.X.cols())
    throw std::invalid_argument("column name count does not match data");
}

void validateResponsibilities(const Responsibilities& tau, double tol) {
  if (tau.rows() < 1 || tau.cols() < 1)
    throw std::invalid_argument("responsibilities must be non-empty");
  if ((tau.array() < 0.0).any() || (tau.array() > 1.0).any())
    throw std::invalid_argument("responsibilities must lie in [0, 1]");
  for (int i = 0; i < tau.rows(); ++i)
    if (std::abs(tau.row(i).sum() - 1.0) > tol)
      throw std::invalid_argument("responsibility rows must sum to one");
}

std::vector<int> mapLabels(const Responsibilities& tau) {
  std::vector<int> labels(tau.rows());
  for (int i = 0; i < tau.rows(); ++i) {
    int best = 0;
    for (int g = 1; g < tau.cols(); ++g)
      if (tau(i, g) > tau(i, best)) best = g;
    labels[i] = best;
  }
  return labels;
}

}  // namespace epem
