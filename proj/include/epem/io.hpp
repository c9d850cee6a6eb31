#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epem/selection.hpp"
#include "epem/types.hpp"

namespace epem {

/*
 * Comma-separated numeric table, '.' decimal point, optional header row.
 * Any non-numeric or non-finite cell and any ragged row is an error naming
 * the offending line and column.
 */
Dataset readCsv(const std::string& path, bool hasHeader);

/* True when the first non-empty line contains a cell that is not a number. */
bool csvHasHeader(const std::string& path);

void writeCsv(const std::string& path, const Matrix& X,
              const std::vector<std::string>& columnNames = {});

/* Column moments captured before scaling, for mapping results back. */
struct Standardizer {
  Vector mean;
  Vector sd;  // sample standard deviations, all positive
};

Standardizer fitStandardizer(const Matrix& X);
Matrix applyStandardizer(const Matrix& X, const Standardizer& s);

/*
 * Maps parameters fitted on standardized data back to the original axes.
 * The rescaled scale matrices lose their structural constraints, so the
 * result is reported under the unconstrained structure.
 */
MixtureParams backTransform(const MixtureParams& params,
                            const Standardizer& s);

/* Full-precision JSON persistence; round-trips exactly. */
std::string paramsToJson(const MixtureParams& params);
MixtureParams paramsFromJson(const std::string& text);

std::vector<ScaleStructure> parseStructureList(const std::string& text);
std::vector<BetaConstraint> parseBetaMode(const std::string& text);

struct RunConfig {
  std::string inputPath;
  int gMin = 1;
  int gMax = 3;
  std::string models = "all";     // comma list of structure names, or "all"
  std::string betaMode = "both";  // equal | variable | both
  bool scale = false;
  std::uint64_t seed = 0;
  double aitkenEpsilon = 0.005;
  int maxIter = 500;
  std::string outputPath;  // empty = stdout
  std::string format = "json";  // json | csv-summary
};

/*
 * Family search over the configured grid.  Writes the result document and
 * returns 0 when at least one model fit succeeded, 1 otherwise (with a
 * machine-readable error document in JSON mode).
 */
int runFit(const RunConfig& cfg);

struct SimulateConfig {
  std::string scenario = "sim1";
  int n = 0;  // 0 = scenario default size
  std::uint64_t seed = 0;
  std::string outputPath;  // dataset CSV; truth JSON written beside it
};

int runSimulate(const SimulateConfig& cfg);

struct FpLabConfig {
  std::vector<double> betas = {1.5, 1.9, 1.95, 2.05};
  int p = 2;
  int n = 1000;
  int iterations = 300;
  std::uint64_t seed = 0;
  std::string outputPath;  // tidy trajectory CSV
};

int runFpLab(const FpLabConfig& cfg);

}  // namespace epem
