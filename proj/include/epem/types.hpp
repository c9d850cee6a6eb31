#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace epem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/*
 * Scale structures for the eigen-decomposed scale matrix
 *
 *   Sigma_g = lambda_g * Gamma_g * Delta_g * Gamma_g'
 *
 * with lambda_g > 0 the volume, Delta_g a positive diagonal shape matrix with
 * det(Delta_g) = 1, and Gamma_g an orthonormal orientation matrix.  The three
 * letters encode volume/shape/orientation: E = equal across components,
 * V = variable, I = identity (axis aligned or spherical).
 */
enum class ScaleStructure { EII, VII, EEI, VVI, EEE, EEV, VVE, VVV };

enum class BetaConstraint { Equal, Variable };

constexpr std::array<ScaleStructure, 8> allScaleStructures = {
    ScaleStructure::EII, ScaleStructure::VII, ScaleStructure::EEI,
    ScaleStructure::VVI, ScaleStructure::EEE, ScaleStructure::EEV,
    ScaleStructure::VVE, ScaleStructure::VVV};

std::string scaleStructureName(ScaleStructure s);
ScaleStructure parseScaleStructure(const std::string& name);

/* Sharing pattern implied by a structure tag. */
bool lambdaShared(ScaleStructure s);
bool deltaShared(ScaleStructure s);
bool gammaShared(ScaleStructure s);
bool deltaIdentity(ScaleStructure s);  // spherical shapes (EII, VII)
bool gammaIdentity(ScaleStructure s);  // axis aligned orientations

struct ModelSpec {
  ScaleStructure structure = ScaleStructure::VVV;
  BetaConstraint beta = BetaConstraint::Variable;
  int G = 0;
  int p = 0;
};

/* Four letter model code, e.g. "VVIE" = VVI scale with equal beta. */
std::string modelName(const ModelSpec& spec);
ModelSpec decodeModelName(const std::string& name, int G = 0, int p = 0);

/* Free parameters contributed by the scale matrices alone. */
int freeScaleParamCount(ScaleStructure s, int G, int p);

/* (G-1) mixing weights + G*p means + scale count + shape parameters. */
int totalFreeParams(const ModelSpec& spec);

/*
 * Storage for the decomposed scale matrices of all components.  Shared blocks
 * are stored once; accessors map a component index onto the right slot.
 */
class ScaleDecomposition {
 public:
  ScaleDecomposition() = default;
  ScaleDecomposition(ScaleStructure structure, int G, int p);

  static ScaleDecomposition identity(ScaleStructure structure, int G, int p);

  ScaleStructure structure() const { return structure_; }
  int componentCount() const { return G_; }
  int dimension() const { return p_; }

  double lambda(int g) const { return lambda_[lambdaSlot(g)]; }
  const Vector& delta(int g) const { return delta_[deltaSlot(g)]; }
  const Matrix& gamma(int g) const { return gamma_[gammaSlot(g)]; }

  void setLambda(int g, double value) { lambda_[lambdaSlot(g)] = value; }
  void setDelta(int g, const Vector& value) { delta_[deltaSlot(g)] = value; }
  void setGamma(int g, const Matrix& value) { gamma_[gammaSlot(g)] = value; }

  /* Eigenvalues lambda_g * Delta_g of component g as a vector. */
  Vector eigenvalues(int g) const;

  /* Replace component g's eigenvalues, then renormalize so det(Delta)=1. */
  void setEigenvalues(int g, const Vector& values);

  int storedLambdaCount() const { return static_cast<int>(lambda_.size()); }
  int storedDeltaCount() const { return static_cast<int>(delta_.size()); }
  int storedGammaCount() const { return static_cast<int>(gamma_.size()); }

 private:
  int lambdaSlot(int g) const { return lambda_.size() == 1 ? 0 : g; }
  int deltaSlot(int g) const { return delta_.size() == 1 ? 0 : g; }
  int gammaSlot(int g) const { return gamma_.size() == 1 ? 0 : g; }

  ScaleStructure structure_ = ScaleStructure::VVV;
  int G_ = 0;
  int p_ = 0;
  std::vector<double> lambda_;
  std::vector<Vector> delta_;
  std::vector<Matrix> gamma_;
};

Matrix reconstructSigma(const ScaleDecomposition& scale, int g);

/*
 * Canonical form: where the structure permits, eigenvalues are sorted in
 * decreasing order with Gamma columns permuted alongside, and each Gamma
 * column is sign fixed so its first entry of non-negligible magnitude is
 * positive.  Reconstructed matrices are unchanged.
 */
void canonicalizeScale(ScaleDecomposition& scale);

/* Throws std::invalid_argument on violated structural invariants. */
void validateScale(const ScaleDecomposition& scale, double tol = 1e-9);

struct MixtureParams {
  ModelSpec spec;
  Vector pi;                // G mixing proportions
  std::vector<Vector> mu;   // G location vectors
  ScaleDecomposition scale;
  Vector beta;              // G shape exponents (all equal under Equal)
};

void validateParams(const MixtureParams& params, double tol = 1e-12);

struct Dataset {
  Matrix X;  // N x p, finite entries
  std::vector<std::string> columnNames;  // empty or size p
};

void validateDataset(const Dataset& data);

/* Row stochastic N x G responsibility matrix. */
using Responsibilities = Matrix;

void validateResponsibilities(const Responsibilities& tau, double tol = 1e-10);

/* Hard assignment by row-wise argmax; ties resolved to the lowest index. */
std::vector<int> mapLabels(const Responsibilities& tau);

}  // namespace epem
