#include "epem/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "epem/sampler.hpp"

namespace epem {

double bic(double logLik, int freeParams, int N) {
  if (N < 1) throw std::invalid_argument("sample size must be positive");
  return 2.0 * logLik - freeParams * std::log(static_cast<double>(N));
}

double icl(double bicValue, const Responsibilities& tau) {
  double penalty = 0.0;
  for (int i = 0; i < tau.rows(); ++i) {
    int arg = 0;
    const double top = tau.row(i).maxCoeff(&arg);
    penalty += std::log(std::max(top, 1e-300));
  }
  return bicValue + penalty;
}

namespace {

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double adjustedRandIndex(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("labelings have different lengths");
  const std::size_t N = a.size();
  if (N < 2) throw std::invalid_argument("need at least two observations");

  std::map<std::pair<int, int>, long long> cells;
  std::map<int, long long> rowSums;
  std::map<int, long long> colSums;
  for (std::size_t i = 0; i < N; ++i) {
    ++cells[{a[i], b[i]}];
    ++rowSums[a[i]];
    ++colSums[b[i]];
  }

  double sumCells = 0.0;
  for (const auto& [key, count] : cells)
    sumCells += choose2(static_cast<double>(count));
  double sumRows = 0.0;
  for (const auto& [key, count] : rowSums)
    sumRows += choose2(static_cast<double>(count));
  double sumCols = 0.0;
  for (const auto& [key, count] : colSums)
    sumCols += choose2(static_cast<double>(count));

  const double total = choose2(static_cast<double>(N));
  const double expected = sumRows * sumCols / total;
  const double maximum = 0.5 * (sumRows + sumCols);
  const double numerator = sumCells - expected;
  const double denominator = maximum - expected;
  if (denominator == 0.0) return numerator == 0.0 ? 1.0 : 0.0;
  return numerator / denominator;
}

namespace {

struct LloydRun {
  std::vector<int> labels;
  double wcss = std::numeric_limits<double>::infinity();
};

LloydRun runLloyd(const Matrix& X, int G, Rng& rng, int maxIter) {
  const int N = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  for (int g = 0; g < G; ++g) {
    std::uniform_int_distribution<int> pick(g, N - 1);
    std::swap(order[g], order[pick(rng)]);
  }
  Matrix centroids(G, p);
  for (int g = 0; g < G; ++g) centroids.row(g) = X.row(order[g]);

  LloydRun run;
  run.labels.assign(N, 0);
  double prev = std::numeric_limits<double>::infinity();
  Matrix dist(N, G);
  for (int iter = 0; iter < maxIter; ++iter) {
    for (int g = 0; g < G; ++g)
      dist.col(g) =
          (X.rowwise() - centroids.row(g)).rowwise().squaredNorm();
    std::vector<int> count(G, 0);
    for (int i = 0; i < N; ++i) {
      int arg = 0;
      dist.row(i).minCoeff(&arg);
      run.labels[i] = arg;
      ++count[arg];
    }

    // reseed empty clusters at the worst-served point
    for (int round = 0; round < G; ++round) {
      int empty = -1;
      for (int g = 0; g < G; ++g)
        if (count[g] == 0) { empty = g; break; }
      if (empty < 0) break;
      int farthest = -1;
      double worst = -1.0;
      for (int i = 0; i < N; ++i) {
        if (count[run.labels[i]] <= 1) continue;
        const double d = dist(i, run.labels[i]);
        if (d > worst) {
          worst = d;
          farthest = i;
        }
      }
      if (farthest < 0) break;
      --count[run.labels[farthest]];
      run.labels[farthest] = empty;
      ++count[empty];
      centroids.row(empty) = X.row(farthest);
      dist.col(empty) =
          (X.rowwise() - centroids.row(empty)).rowwise().squaredNorm();
    }

    centroids.setZero();
    for (int i = 0; i < N; ++i) centroids.row(run.labels[i]) += X.row(i);
    for (int g = 0; g < G; ++g)
      if (count[g] > 0) centroids.row(g) /= static_cast<double>(count[g]);

    double wcss = 0.0;
    for (int i = 0; i < N; ++i)
      wcss += (X.row(i) - centroids.row(run.labels[i])).squaredNorm();
    run.wcss = wcss;
    if (prev - wcss < 1e-6 * std::max(prev, 1e-300)) break;
    prev = wcss;
  }
  return run;
}

}  // namespace

Responsibilities kmeansInit(const Matrix& X, int G, int restarts,
                            std::uint64_t seed) {
  const int N = static_cast<int>(X.rows());
  if (G < 1) throw std::invalid_argument("need at least one cluster");
  if (N < G) throw std::invalid_argument("fewer observations than clusters");
  Responsibilities tau = Responsibilities::Zero(N, G);
  if (G == 1) {
    tau.setOnes();
    return tau;
  }

  Rng rng = makeRng(seed);
  LloydRun best;
  for (int r = 0; r < std::max(restarts, 1); ++r) {
    LloydRun run = runLloyd(X, G, rng, 25);
    if (run.wcss < best.wcss) best = run;
  }
  for (int i = 0; i < N; ++i) tau(i, best.labels[i]) = 1.0;
  return tau;
}

int threadBudget() {
  const char* raw = std::getenv("EPEM_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  if (end == raw || value <= 0) return 1;
  return static_cast<int>(std::min<long>(value, 256));
}

namespace {

bool smallSampleTolerant(ScaleStructure s) {
  return s == ScaleStructure::EII || s == ScaleStructure::VII ||
         s == ScaleStructure::EEI;
}

void runCell(const Matrix& X, const Responsibilities& init, FitCell& cell,
             const FitConfig& fitCfg, int N) {
  try {
    cell.report = fit(X, cell.spec, init, fitCfg);
    cell.bicValue = bic(cell.report.logLik, totalFreeParams(cell.spec), N);
    cell.iclValue = icl(cell.bicValue, cell.report.responsibilities);
    cell.ok = true;
  } catch (const FitError& e) {
    cell.error = fitErrorKindName(e.kind());
    cell.errorDetail = e.what();
  } catch (const std::exception& e) {
    cell.error = "internal";
    cell.errorDetail = e.what();
  }
}

}  // namespace

FamilySearchResult familySearch(const Matrix& X,
                                const FamilySearchConfig& cfg) {
  const int N = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (cfg.gMin < 1 || cfg.gMin > cfg.gMax)
    throw std::invalid_argument("component range is empty");

  std::vector<ScaleStructure> structures = cfg.structures;
  if (structures.empty())
    structures.assign(allScaleStructures.begin(), allScaleStructures.end());
  std::vector<BetaConstraint> constraints = cfg.betaConstraints;
  if (constraints.empty())
    constraints = {BetaConstraint::Equal, BetaConstraint::Variable};

  std::map<int, Responsibilities> inits;
  for (int G = cfg.gMin; G <= cfg.gMax; ++G)
    inits[G] = kmeansInit(X, G, cfg.kmeansRestarts, deriveSeed(cfg.seed, G));

  FamilySearchResult result;
  for (int G = cfg.gMin; G <= cfg.gMax; ++G)
    for (ScaleStructure s : allScaleStructures) {
      if (std::find(structures.begin(), structures.end(), s) ==
          structures.end())
        continue;
      for (BetaConstraint bc :
           {BetaConstraint::Equal, BetaConstraint::Variable}) {
        if (std::find(constraints.begin(), constraints.end(), bc) ==
            constraints.end())
          continue;
        FitCell cell;
        cell.spec = ModelSpec{s, bc, G, p};
        if (N < G * (p + 1)) {
          if (smallSampleTolerant(s)) {
            cell.note = "sample smaller than G(p+1); fit attempted anyway";
          } else {
            cell.error = "insufficient_data";
            cell.errorDetail =
                "need at least G(p+1) observations for per-component scale";
            result.grid.push_back(std::move(cell));
            continue;
          }
        }
        result.grid.push_back(std::move(cell));
      }
    }

  std::vector<int> pending;
  for (int i = 0; i < static_cast<int>(result.grid.size()); ++i)
    if (result.grid[i].error.empty()) pending.push_back(i);

  const int workers =
      std::min<int>(threadBudget(), static_cast<int>(pending.size()));
  if (workers <= 1) {
    for (int i : pending)
      runCell(X, inits.at(result.grid[i].spec.G), result.grid[i], cfg.fit, N);
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= pending.size()) return;
        FitCell& cell = result.grid[pending[k]];
        runCell(X, inits.at(cell.spec.G), cell, cfg.fit, N);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  const auto pickBest = [&](auto value) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(result.grid.size()); ++i) {
      const FitCell& cell = result.grid[i];
      if (!cell.ok) continue;
      if (best < 0) {
        best = i;
        continue;
      }
      const FitCell& incumbent = result.grid[best];
      const double vi = value(cell);
      const double vb = value(incumbent);
      if (vi != vb) {
        if (vi > vb) best = i;
        continue;
      }
      const int mi = totalFreeParams(cell.spec);
      const int mb = totalFreeParams(incumbent.spec);
      if (mi != mb) {
        if (mi < mb) best = i;
        continue;
      }
      if (modelName(cell.spec) < modelName(incumbent.spec)) best = i;
    }
    return best;
  };
  result.bestByBic = pickBest([](const FitCell& c) { return c.bicValue; });
  result.bestByIcl = pickBest([](const FitCell& c) { return c.iclValue; });
  return result;
}

}  // namespace epem
