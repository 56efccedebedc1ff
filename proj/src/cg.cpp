#include "setproj/cg.hpp"

#include <cmath>

#include "setproj/errors.hpp"

namespace setproj {

void CgOptions::validate() const {
  if (!(rel_tol > 0)) throw ParameterError("CG rel_tol must be positive");
  if (max_iter < 1) throw ParameterError("CG max_iter must be at least 1");
  if (!(abs_floor >= 0)) throw ParameterError("CG abs_floor must be nonnegative");
}

template <typename Real>
CgResult<Real> cg_solve(const ApplyFn<Real>& apply, const Vec<Real>& rhs, const Vec<Real>& x0,
                        const CgOptions& opts) {
  opts.validate();
  if (x0.size() != rhs.size()) throw ShapeError("CG: initial guess and rhs lengths differ");
  CgResult<Real> res;
  const double bnorm = static_cast<double>(rhs.norm());
  if (bnorm <= opts.abs_floor) {
    res.x = Vec<Real>::Zero(rhs.size());
    res.converged = true;
    res.residual_history.push_back(0.0);
    return res;
  }

  res.x = x0;
  Vec<Real> q(rhs.size());
  apply(res.x, q);
  Vec<Real> r = rhs - q;
  double rr = static_cast<double>(r.squaredNorm());
  double rel = std::sqrt(rr) / bnorm;
  res.residual_history.push_back(rel);
  if (rel <= opts.rel_tol) {
    res.rel_residual = rel;
    res.converged = true;
    return res;
  }

  Vec<Real> best = res.x;
  double best_rel = rel;
  Vec<Real> p = r;
  for (int it = 0; it < opts.max_iter; ++it) {
    apply(p, q);
    const double pq = static_cast<double>(p.dot(q));
    if (!(pq > 0) || !std::isfinite(pq)) {
      res.breakdown = true;
      break;
    }
    const double alpha = rr / pq;
    res.x += static_cast<Real>(alpha) * p;
    r -= static_cast<Real>(alpha) * q;
    const double rr_new = static_cast<double>(r.squaredNorm());
    ++res.iterations;
    rel = std::sqrt(rr_new) / bnorm;
    res.residual_history.push_back(rel);
    if (rel < best_rel) {
      best = res.x;
      best_rel = rel;
    }
    if (rel <= opts.rel_tol) {
      res.converged = true;
      break;
    }
    p = r + static_cast<Real>(rr_new / rr) * p;
    rr = rr_new;
  }
  if (!res.converged) {
    res.x = std::move(best);
    rel = best_rel;
  }
  res.rel_residual = rel;
  return res;
}

template <typename Real>
CgResult<Real> cg_solve(const SystemMatrix<Real>& c, const Vec<Real>& rhs, const Vec<Real>& x0,
                        const CgOptions& opts, WorkerPool* pool) {
  if (c.size() != rhs.size()) throw ShapeError("CG: system matrix and rhs sizes differ");
  return cg_solve<Real>([&](const Vec<Real>& v, Vec<Real>& out) { c.multiply(v, out, pool); }, rhs, x0,
                        opts);
}

template CgResult<float> cg_solve<float>(const ApplyFn<float>&, const Vec<float>&, const Vec<float>&,
                                         const CgOptions&);
template CgResult<double> cg_solve<double>(const ApplyFn<double>&, const Vec<double>&,
                                           const Vec<double>&, const CgOptions&);
template CgResult<float> cg_solve<float>(const SystemMatrix<float>&, const Vec<float>&, const Vec<float>&,
                                         const CgOptions&, WorkerPool*);
template CgResult<double> cg_solve<double>(const SystemMatrix<double>&, const Vec<double>&,
                                           const Vec<double>&, const CgOptions&, WorkerPool*);

}  // namespace setproj
