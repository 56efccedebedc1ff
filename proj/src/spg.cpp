#include "setproj/spg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "setproj/errors.hpp"

namespace setproj {

void SpgOptions::validate() const {
  if (max_evals < 1) throw ParameterError("spg: max_evals must be at least 1");
  if (memory < 1) throw ParameterError("spg: memory must be at least 1");
  if (!(armijo > 0 && armijo < 1)) throw ParameterError("spg: armijo constant must lie in (0, 1)");
  if (!(alpha_min > 0 && alpha_min < alpha_max)) throw ParameterError("spg: need 0 < alpha_min < alpha_max");
  if (!(tol >= 0)) throw ParameterError("spg: tol must be nonnegative");
}

SpgResult spg_solve(const std::function<double(const Vec<double>&)>& f_value,
                    const std::function<Vec<double>(const Vec<double>&)>& f_grad,
                    const std::function<Vec<double>(const Vec<double>&)>& project, const Vec<double>& m0,
                    const SpgOptions& opts) {
  opts.validate();
  SpgResult res;
  Vec<double> m = project(m0);
  ++res.projections;
  double f = f_value(m);
  ++res.evaluations;
  if (!std::isfinite(f)) throw NumericError("spg: objective is not finite at the starting point");
  Vec<double> g = f_grad(m);
  res.f_history.push_back(f);
  std::deque<double> window{f};

  Vec<double> best = m;
  double best_f = f;

  auto clamp_alpha = [&](double a) { return std::clamp(a, opts.alpha_min, opts.alpha_max); };
  double alpha = 1.0;
  {
    const Vec<double> d = project(m - g) - m;
    ++res.projections;
    const double dn = d.lpNorm<Eigen::Infinity>();
    if (dn <= opts.tol) {
      res.m = m;
      res.f = f;
      res.converged = true;
      return res;
    }
    alpha = clamp_alpha(1.0 / dn);
  }

  while (res.evaluations < opts.max_evals) {
    const Vec<double> d = project(m - alpha * g) - m;
    ++res.projections;
    if (d.lpNorm<Eigen::Infinity>() <= opts.tol) {
      res.converged = true;
      break;
    }
    const double slope = g.dot(d);
    const double f_ref = *std::max_element(window.begin(), window.end());
    double lambda = 1.0;
    bool accepted = false;
    Vec<double> m_new;
    double f_new = 0;
    while (res.evaluations < opts.max_evals) {
      m_new = m + lambda * d;
      f_new = f_value(m_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= f_ref + opts.armijo * lambda * slope) {
        accepted = true;
        break;
      }
      // safeguarded quadratic interpolation along d
      const double denom = 2.0 * (f_new - f - lambda * slope);
      double trial = denom > 0 ? -slope * lambda * lambda / denom : 0.5 * lambda;
      if (!(trial >= 0.1 * lambda && trial <= 0.9 * lambda)) trial = 0.5 * lambda;
      lambda = trial;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    const Vec<double> g_new = f_grad(m_new);
    const Vec<double> s = m_new - m;
    const Vec<double> y = g_new - g;
    const double sy = s.dot(y);
    alpha = sy > 0 ? clamp_alpha(s.squaredNorm() / sy) : opts.alpha_max;
    m = m_new;
    f = f_new;
    g = g_new;
    ++res.iterations;
    res.f_history.push_back(f);
    window.push_back(f);
    while (static_cast<int>(window.size()) > opts.memory) window.pop_front();
    if (f <= best_f) {
      best_f = f;
      best = m;
    }
  }
  res.m = res.converged ? m : best;
  res.f = res.converged ? f : best_f;
  return res;
}

}  // namespace setproj
