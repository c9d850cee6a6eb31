#pragma once

#include "epem/stiefel.hpp"
#include "epem/types.hpp"

namespace epem {

/*
 * Per-iteration sufficient pieces for the conditional scale maximization:
 * centered observations for every component, the responsibilities, and the
 * effective counts.  Outer products are never materialized; every update
 * works from these rows.
 */
struct ScatterCache {
  std::vector<Matrix> centered;  // per component: N x p rows x_i - mu_g
  Matrix tau;                    // N x G
  Vector n;                      // column sums of tau
  int N = 0;
  int G = 0;
  int p = 0;
};

ScatterCache makeScatterCache(const Matrix& X, const Matrix& tau,
                              const std::vector<Vector>& mu);

/*
 * Scale block of the minorized objective:
 *   sum_g [ -n_g/2 log det Sigma_g - 1/2 sum_i tau_ig delta_ig^{beta_g} ].
 * Every update below leaves this non-decreasing.
 */
double computeScaleQ(const ScatterCache& cache, const ScaleDecomposition& scale,
                     const Vector& beta);

/*
 * One conditional maximization step per structure.  Shape exponents below 1
 * use the supporting hyperplane minorization; at or above 1 the eigenvalue
 * minorization in the current frame, followed by one guarded line-search
 * step for the orientation where the structure has one.  Structures sharing
 * volume or shape pool across components, with the largest shape exponent
 * driving the outer power whenever any component has beta >= 1.
 */
ScaleDecomposition updateEII(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta);
ScaleDecomposition updateVII(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta);
ScaleDecomposition updateEEI(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta);
ScaleDecomposition updateVVI(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta);
ScaleDecomposition updateEEE(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta,
                             const LineSearchConfig& ls = {});
ScaleDecomposition updateEEV(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta,
                             const LineSearchConfig& ls = {});
ScaleDecomposition updateVVE(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta,
                             const LineSearchConfig& ls = {});
ScaleDecomposition updateVVV(const ScatterCache& cache,
                             const ScaleDecomposition& scale,
                             const Vector& beta,
                             const LineSearchConfig& ls = {});

/*
 * Dispatch on the stored structure, then floor eigenvalues at
 * eigenFloorRel times the largest eigenvalue across components and put the
 * result in canonical form.  flooredOut reports whether the floor fired.
 */
ScaleDecomposition updateScale(const ScatterCache& cache,
                               const ScaleDecomposition& scale,
                               const Vector& beta,
                               const LineSearchConfig& ls = {},
                               double eigenFloorRel = 1e-10,
                               bool* flooredOut = nullptr);

}  // namespace epem
