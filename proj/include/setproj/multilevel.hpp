#pragma once

#include <optional>
#include <string>
#include <vector>

#include "setproj/constraints.hpp"

namespace setproj {

/// Grid hierarchy for coarse-to-fine continuation. grids[0] is the original grid.
struct LevelPlan {
  int n_levels = 3;
  int factor = 2;
  std::vector<CompGrid> grids;

  std::string describe() const;
};

/// Throws ConfigError when n_levels < 1, factor < 2, or a coarse axis would have fewer than 2 cells.
LevelPlan make_level_plan(const CompGrid& grid, int n_levels = 3, int factor = 2);

/// Grid with counts ceil(n / factor) and spacing h * factor.
CompGrid coarsen_grid(const CompGrid& grid, int factor);

/// Box filter of width `factor` followed by strided sampling, along every axis.
template <typename Real>
Vec<Real> coarsen_model(const Vec<Real>& m, const CompGrid& grid, int factor, CompGrid* coarse = nullptr);

/// Block average of a field of shape `from` by `factor` along every axis.
template <typename Real>
Vec<Real> coarsen_field(const Vec<Real>& v, const Shape& from, int factor);

/// Linear interpolation along every axis with aligned end points (bilinear in 2D, trilinear in 3D).
template <typename Real>
Vec<Real> interpolate_field(const Vec<Real>& v, const Shape& from, const Shape& to);

/// Definitions for a coarse level. Set parameters are rescaled; entries without a coarse
/// counterpart (custom operators, per-entry bounds on non-identity operators) are empty.
template <typename Real>
std::vector<std::optional<SetDefinition>> coarsen_definitions(const std::vector<SetDefinition>& defs,
                                                              const CompGrid& fine, const CompGrid& coarse,
                                                              int factor, const Vec<Real>& m_coarse);

template <typename Real>
struct MultilevelResult {
  Vec<Real> x;
  SolverState<Real> state;
  std::vector<SolverLog> logs;  ///< coarsest level first, original grid last
  LevelPlan plan;
  bool converged = false;
};

/// Solves on the coarsest grid first, then interpolates x and every y_i, v_i to the next finer
/// grid and warm-starts there. Penalties and relaxations restart from the option values.
template <typename Real>
MultilevelResult<Real> ml_parsdmm(const Vec<Real>& m, const std::vector<SetDefinition>& defs,
                                  const LevelPlan& plan, const SolverOptions& opts);

}  // namespace setproj
