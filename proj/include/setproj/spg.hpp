#pragma once

#include <functional>
#include <vector>

#include "setproj/types.hpp"

namespace setproj {

struct SpgOptions {
  int max_evals = 10;  ///< objective evaluations, including the one at m0
  int memory = 10;     ///< non-monotone window
  double armijo = 1e-4;
  double alpha_min = 1e-10;
  double alpha_max = 1e10;
  double tol = 1e-8;  ///< stop when ||P(m - g) - m||_inf falls below this

  void validate() const;
};

struct SpgResult {
  Vec<double> m;
  double f = 0;
  int evaluations = 0;
  int iterations = 0;
  int projections = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> f_history;  ///< objective at every accepted iterate, starting with m0
};

/// Spectral projected gradient. Steps m + lambda (P(m - alpha g) - m) with a Barzilai-Borwein
/// alpha and a backtracking lambda accepted against the largest of the last `memory`
/// objective values. `project` is called once per iteration.
SpgResult spg_solve(const std::function<double(const Vec<double>&)>& f_value,
                    const std::function<Vec<double>(const Vec<double>&)>& f_grad,
                    const std::function<Vec<double>(const Vec<double>&)>& project, const Vec<double>& m0,
                    const SpgOptions& opts = {});

}  // namespace setproj
