#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "setproj/parsdmm.hpp"

namespace setproj {

/// Inner solver settings for projections onto {x : A x in C} with a non-orthogonal A.
struct NestedOptions {
  double tol = 1e-4;
  int max_iter = 100;
  SolverOptions solver{};  ///< eps_evol, eps_feas and max_outer are overridden by tol / max_iter
};

template <typename Real>
struct NestedResult {
  Vec<Real> x;
  int iterations = 0;
  long cg_iterations = 0;
  long projections = 0;  ///< simple projections onto C
  bool converged = false;
};

/// Projection of w onto {x : A x in C} by single-set PARSDMM.
template <typename Real>
NestedResult<Real> nested_projection(const ConstraintPair<Real>& pair, const CompGrid& grid, const Vec<Real>& w,
                                     const NestedOptions& opts = {});

/// A per-set projector P_V treated as a black box. Closed-form for identity or orthonormal
/// operators, a nested solve otherwise.
template <typename Real>
struct BlackBoxProjector {
  std::function<NestedResult<Real>(const Vec<Real>&)> project;
  std::string label;
  ProjectorKind kind = ProjectorKind::bounds;
  bool nested = false;
  std::optional<ConstraintPair<Real>> pair;  ///< used for the logged feasibility errors

  static BlackBoxProjector from_pair(const ConstraintPair<Real>& pair, const CompGrid& grid,
                                     const NestedOptions& opts = {});
};

struct DykstraOptions {
  double tol = 1e-3;
  int max_iter = 1000;
  std::vector<double> weights;  ///< empty means uniform
  std::size_t threads = 1;
  int log_every = 1;
  bool record_wall_time = false;

  void validate(std::size_t p) const;
};

template <typename Real>
struct DykstraResult {
  Vec<Real> x;
  SolverLog log;
  int nested_failures = 0;  ///< inner solves that hit max_iter
};

/// Parallel Dykstra: y_i = P_i(v_i), x = sum_i w_i y_i, v_i <- x + v_i - y_i, stopping once
/// max_i ||y_i - x|| / ||x|| < tol. Per iteration the log adds the largest inner CG count over
/// the sets and the inner projection counts of every set.
template <typename Real>
DykstraResult<Real> parallel_dykstra(const Vec<Real>& m, const std::vector<BlackBoxProjector<Real>>& projectors,
                                     const DykstraOptions& opts = {});

template <typename Real>
struct ConsensusResult {
  Vec<Real> x;
  SolverState<Real> state;
  SolverLog log;
  int nested_failures = 0;
};

/// Consensus ADMM: x is the penalty-weighted average of y_i + v_i / rho_i, every y_i is a
/// projection onto {x : A_i x in C_i} (nested for non-orthogonal A_i), the last block is the
/// distance to m. Penalties and relaxations adapt per block; stopping as in parsdmm.
template <typename Real>
ConsensusResult<Real> consensus_admm_project(const ProjectionProblem<Real>& problem, const SolverOptions& opts = {},
                                             const NestedOptions& nested = {});

}  // namespace setproj
