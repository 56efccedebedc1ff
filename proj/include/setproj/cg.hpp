#pragma once

#include <functional>
#include <vector>

#include "setproj/system_matrix.hpp"

namespace setproj {

struct CgOptions {
  double rel_tol = 1e-6;
  int max_iter = 100;
  double abs_floor = 1e-14;  ///< rhs norms at or below this count as zero

  /// Throws ParameterError unless rel_tol > 0 and max_iter >= 1.
  void validate() const;
};

template <typename Real>
struct CgResult {
  Vec<Real> x;
  int iterations = 0;
  double rel_residual = 0;  ///< ||C x - rhs|| / ||rhs|| of the returned x
  bool converged = false;
  bool breakdown = false;  ///< nonpositive or non-finite curvature was met
  std::vector<double> residual_history;  ///< relative residual before the first and after each iteration
};

template <typename Real>
using ApplyFn = std::function<void(const Vec<Real>&, Vec<Real>&)>;

/// Conjugate gradients on an SPD operator, started from x0.
template <typename Real>
CgResult<Real> cg_solve(const ApplyFn<Real>& apply, const Vec<Real>& rhs, const Vec<Real>& x0,
                        const CgOptions& opts);

template <typename Real>
CgResult<Real> cg_solve(const SystemMatrix<Real>& c, const Vec<Real>& rhs, const Vec<Real>& x0,
                        const CgOptions& opts, WorkerPool* pool = nullptr);

}  // namespace setproj
