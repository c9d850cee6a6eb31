#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epem/gem.hpp"
#include "epem/types.hpp"

namespace epem {

/* Penalized log-likelihood, larger-is-better convention. */
double bic(double logLik, int freeParams, int N);

/*
 * BIC plus the entropy penalty evaluated on the MAP entry of each row;
 * equals BIC exactly for hard assignments and is never larger.
 */
double icl(double bicValue, const Responsibilities& tau);

/*
 * Chance-corrected pair-counting agreement between two labelings.
 * Label values are arbitrary; only the induced partitions matter.
 * A degenerate denominator (both partitions trivial) yields 1.
 */
double adjustedRandIndex(const std::vector<int>& a, const std::vector<int>& b);

/*
 * Lloyd's algorithm from `restarts` random centroid seedings, keeping the
 * labeling with the lowest within-cluster sum of squares and returning it
 * as hard responsibilities.  Empty clusters are reseeded at the point
 * farthest from its current centroid.  Deterministic given the seed.
 */
Responsibilities kmeansInit(const Matrix& X, int G, int restarts,
                            std::uint64_t seed);

struct FitCell {
  ModelSpec spec;
  bool ok = false;
  std::string error;        // failure class when not ok
  std::string errorDetail;  // human-readable cause
  std::string note;         // non-fatal remark, e.g. small-sample warning
  FitReport report;         // populated only when ok
  double bicValue = 0.0;
  double iclValue = 0.0;
};

struct FamilySearchConfig {
  std::vector<ScaleStructure> structures;        // empty = all eight
  std::vector<BetaConstraint> betaConstraints;   // empty = both
  int gMin = 1;
  int gMax = 3;
  std::uint64_t seed = 0;
  int kmeansRestarts = 10;
  FitConfig fit;
};

/*
 * One entry per requested (structure, constraint, G) in a fixed order:
 * G ascending, then structure, then equal before variable.  Best indices
 * are -1 when every cell failed; ties break toward fewer free parameters,
 * then the lexicographically smaller model name.
 */
struct FamilySearchResult {
  std::vector<FitCell> grid;
  int bestByBic = -1;
  int bestByIcl = -1;
};

/*
 * Fits the whole requested family.  All models at the same G start from one
 * shared k-means partition.  Cells run independently, in parallel when the
 * EPEM_THREADS environment variable allows; results are deterministic either
 * way.  Components-times-dimension sample-size guard: structures with
 * per-component orientation or shape are skipped with an error entry when
 * N < G(p+1), while EII, VII and EEI proceed with a note.
 */
FamilySearchResult familySearch(const Matrix& X, const FamilySearchConfig& cfg);

/* Worker cap from EPEM_THREADS; unset, empty, 0 or garbage mean serial. */
int threadBudget();

}  // namespace epem
