#include "setproj/dykstra.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include "setproj/errors.hpp"

namespace setproj {

template <typename Real>
NestedResult<Real> nested_projection(const ConstraintPair<Real>& pair, const CompGrid& grid, const Vec<Real>& w,
                                     const NestedOptions& opts) {
  if (!(opts.tol > 0) || opts.max_iter < 1) throw ParameterError("nested_projection: tol and max_iter must be positive");
  NestedResult<Real> out;
  if (pair.op->is_identity()) {
    out.x = pair.projector(w);
    out.projections = 1;
    out.converged = true;
    return out;
  }
  if (pair.op->is_orthogonal()) {
    out.x = pair.op->adjoint(pair.projector(pair.op->forward(w)));
    out.projections = 1;
    out.converged = true;
    return out;
  }
  SolverOptions so = opts.solver;
  so.eps_evol = opts.tol;
  so.eps_feas = opts.tol;
  so.max_outer = opts.max_iter;
  so.threads = 1;
  so.parallel_sets = false;
  so.record_wall_time = false;
  ProjectionProblem<Real> prob{w, {pair}, grid};
  auto res = parsdmm(prob, so);
  out.x = std::move(res.x);
  out.iterations = static_cast<int>(res.log.iterations);
  out.cg_iterations = res.log.cg_iterations;
  out.projections = res.log.proj_counts.empty() ? 0 : res.log.proj_counts[0];
  out.converged = res.log.converged;
  return out;
}

template <typename Real>
BlackBoxProjector<Real> BlackBoxProjector<Real>::from_pair(const ConstraintPair<Real>& pair, const CompGrid& grid,
                                                           const NestedOptions& opts) {
  BlackBoxProjector<Real> bb;
  bb.label = pair.projector.label();
  if (!pair.op->is_identity()) bb.label = std::string(to_string(pair.op->kind())) + ":" + bb.label;
  bb.kind = pair.projector.kind();
  bb.nested = !pair.op->is_identity() && !pair.op->is_orthogonal();
  bb.pair = pair;
  bb.project = [pair, grid, opts](const Vec<Real>& w) { return nested_projection(pair, grid, w, opts); };
  return bb;
}

void DykstraOptions::validate(std::size_t p) const {
  if (!(tol > 0)) throw ParameterError("dykstra: tol must be positive");
  if (max_iter < 1) throw ParameterError("dykstra: max_iter must be at least 1");
  if (log_every < 1) throw ParameterError("dykstra: log_every must be at least 1");
  if (threads < 1) throw ParameterError("dykstra: threads must be at least 1");
  if (weights.empty()) return;
  if (weights.size() != p) throw ShapeError("dykstra: one weight per projector is required");
  double sum = 0;
  for (double w : weights) {
    if (!(w > 0)) throw ParameterError("dykstra: weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ParameterError("dykstra: weights must sum to 1");
}

template <typename Real>
DykstraResult<Real> parallel_dykstra(const Vec<Real>& m, const std::vector<BlackBoxProjector<Real>>& projectors,
                                     const DykstraOptions& opts) {
  const std::size_t p = projectors.size();
  if (p == 0) throw ConfigError("parallel_dykstra: at least one projector is required");
  opts.validate(p);
  const auto t_start = std::chrono::steady_clock::now();
  std::vector<double> weights = opts.weights;
  if (weights.empty()) weights.assign(p, 1.0 / static_cast<double>(p));

  DykstraResult<Real> res;
  SolverLog& log = res.log;
  for (const auto& bb : projectors) {
    log.set_labels.push_back(bb.label);
    log.set_kinds.push_back(bb.kind);
  }
  log.proj_counts.assign(p, 0);

  Vec<Real> x = m;
  std::vector<Vec<Real>> v(p, m);
  std::vector<NestedResult<Real>> y(p);
  WorkerPool pool(opts.threads);

  Vec<Real> best_x = x;
  double best_feas = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int k = 1; k <= opts.max_iter; ++k) {
    const Vec<Real> x_prev = x;
    pool.for_each(static_cast<Index>(p), [&](Index i) { y[i] = projectors[i].project(v[i]); });

    long cg_max = 0;
    x.setZero();
    for (std::size_t i = 0; i < p; ++i) {
      if (!y[i].converged) ++res.nested_failures;
      cg_max = std::max(cg_max, y[i].cg_iterations);
      log.proj_counts[i] += y[i].projections;
      x += static_cast<Real>(weights[i]) * y[i].x;
    }
    log.cg_iterations += cg_max;
    for (std::size_t i = 0; i < p; ++i) v[i] += x - y[i].x;

    const double nx = static_cast<double>(x.norm());
    double gap = 0;
    for (std::size_t i = 0; i < p; ++i) {
      const double d = static_cast<double>((y[i].x - x).norm());
      gap = std::max(gap, nx > 0 ? d / nx : (d > 0 ? std::numeric_limits<double>::infinity() : 0.0));
    }
    ++log.iterations;
    const bool stop = gap < opts.tol;

    if (k % opts.log_every == 0 || stop || k == opts.max_iter) {
      LogRecord rec;
      rec.iter = k;
      for (std::size_t i = 0; i < p; ++i) {
        if (projectors[i].pair) {
          rec.r_feas.push_back(feasibility_errors<Real>(x, {*projectors[i].pair})[0]);
        } else {
          const double d = static_cast<double>((y[i].x - x).norm());
          rec.r_feas.push_back(nx > 0 ? d / nx : 0.0);
        }
      }
      rec.r_evol = nx > 0 ? static_cast<double>((x - x_prev).norm()) / nx : 0.0;
      rec.cg_iters_cum = log.cg_iterations;
      rec.proj_counts_cum = log.proj_counts;
      if (opts.record_wall_time) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
      }
      const double worst = *std::max_element(rec.r_feas.begin(), rec.r_feas.end());
      if (!have_best || worst <= best_feas) {
        best_feas = worst;
        best_x = x;
        have_best = true;
      }
      log.records.push_back(std::move(rec));
    }
    if (stop) {
      log.converged = true;
      break;
    }
  }
  res.x = log.converged || !have_best ? x : best_x;
  return res;
}

template <typename Real>
ConsensusResult<Real> consensus_admm_project(const ProjectionProblem<Real>& problem, const SolverOptions& opts,
                                             const NestedOptions& nested) {
  problem.validate();
  opts.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t p = problem.pairs.size();
  const Index n = problem.m.size();

  ConsensusResult<Real> res;
  SolverState<Real>& st = res.state;
  st.x = problem.m;
  for (std::size_t i = 0; i <= p; ++i) {
    BlockState<Real> b;
    b.y = problem.m;
    b.v = Vec<Real>::Zero(n);
    b.rho = static_cast<Real>(opts.rho0);
    b.gamma = std::clamp(static_cast<Real>(opts.gamma0), Real(kGammaMin), Real(kGammaMax));
    st.blocks.push_back(std::move(b));
  }

  SolverLog& log = res.log;
  for (const auto& pr : problem.pairs) {
    log.set_labels.push_back(pr.projector.label());
    log.set_kinds.push_back(pr.projector.kind());
  }
  log.proj_counts.assign(p, 0);
  log.min_rho = std::numeric_limits<double>::infinity();
  log.min_gamma = std::numeric_limits<double>::infinity();
  log.max_gamma = -std::numeric_limits<double>::infinity();

  WorkerPool pool(opts.threads);
  std::vector<NestedResult<Real>> inner(p + 1);
  std::deque<Vec<Real>> history;
  history.push_back(st.x);
  const int log_every = opts.log_every > 0 ? opts.log_every : opts.feas_check_every;

  Vec<Real> best_x = st.x;
  double best_feas = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int it = 0; it < opts.max_outer; ++it) {
    const Index k = ++st.k;
    Vec<Real> num = Vec<Real>::Zero(n);
    Real den = 0;
    for (const auto& b : st.blocks) {
      num += b.rho * b.y + b.v;
      den += b.rho;
    }
    st.x = num / den;

    const bool adapting = opts.adapt && (k % opts.adapt_every == 1 % opts.adapt_every);
    auto block_step = [&](Index i) {
      auto& b = st.blocks[i];
      const Vec<Real> v_old = b.v;
      const Vec<Real> y_old = b.y;
      auto prox = [&](const Vec<Real>& w) -> Vec<Real> {
        if (static_cast<std::size_t>(i) == p) {
          inner[i] = NestedResult<Real>{};
          return prox_distance<Real>(w, problem.m, b.rho);
        }
        try {
          inner[i] = nested_projection(problem.pairs[i], problem.grid, w, nested);
        } catch (const Error& e) {
          throw NumericError("consensus_admm_project: set " + std::to_string(i) + ": " + e.what());
        }
        return inner[i].x;
      };
      y_v_update(b, st.x, std::function<Vec<Real>(const Vec<Real>&)>(prox));
      if (adapting) adapt_rho_gamma(b, v_old, y_old, st.x, opts.eps_corr);
    };
    if (opts.parallel_sets) {
      pool.for_each(static_cast<Index>(p + 1), block_step);
    } else {
      for (std::size_t i = 0; i <= p; ++i) block_step(static_cast<Index>(i));
    }
    long cg_max = 0;
    for (std::size_t i = 0; i < p; ++i) {
      if (!inner[i].converged) ++res.nested_failures;
      cg_max = std::max(cg_max, inner[i].cg_iterations);
      log.proj_counts[i] += inner[i].projections;
    }
    log.cg_iterations += cg_max;
    if (adapting) {
      ++log.adapt_steps;
      clamp_rho_ratios(st.blocks, opts.rho_ratio_cap);
    }
    for (const auto& b : st.blocks) {
      log.min_rho = std::min(log.min_rho, static_cast<double>(b.rho));
      log.min_gamma = std::min(log.min_gamma, static_cast<double>(b.gamma));
      log.max_gamma = std::max(log.max_gamma, static_cast<double>(b.gamma));
    }

    const bool check = k % opts.feas_check_every == 0;
    const bool record = k % log_every == 0;
    bool stop = false;
    if (check || record) {
      const std::vector<double> r_feas = feasibility_errors(st.x, problem.pairs);
      const std::vector<Vec<Real>> hist(history.begin(), history.end());
      const double r_evol = relative_evolution(st.x, hist);
      const double worst = r_feas.empty() ? 0.0 : *std::max_element(r_feas.begin(), r_feas.end());
      if (!have_best || worst <= best_feas) {
        best_feas = worst;
        best_x = st.x;
        have_best = true;
      }
      if (record) {
        LogRecord rec;
        rec.iter = k;
        rec.r_feas = r_feas;
        rec.r_evol = r_evol;
        rec.cg_iters_cum = log.cg_iterations;
        rec.proj_counts_cum = log.proj_counts;
        for (const auto& b : st.blocks) {
          rec.rho.push_back(static_cast<double>(b.rho));
          rec.gamma.push_back(static_cast<double>(b.gamma));
        }
        if (opts.record_wall_time) {
          rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
        }
        log.records.push_back(std::move(rec));
      }
      if (check && static_cast<int>(history.size()) >= opts.history_s) stop = check_stop(r_evol, r_feas, opts);
    }
    history.push_back(st.x);
    while (static_cast<int>(history.size()) > opts.history_s) history.pop_front();
    ++log.iterations;
    if (stop) {
      log.converged = true;
      break;
    }
  }
  res.x = log.converged || !have_best ? st.x : best_x;
  return res;
}

#define SETPROJ_INSTANTIATE(Real)                                                                               \
  template NestedResult<Real> nested_projection<Real>(const ConstraintPair<Real>&, const CompGrid&,             \
                                                      const Vec<Real>&, const NestedOptions&);                  \
  template struct BlackBoxProjector<Real>;                                                                      \
  template DykstraResult<Real> parallel_dykstra<Real>(const Vec<Real>&, const std::vector<BlackBoxProjector<Real>>&, \
                                                      const DykstraOptions&);                                   \
  template ConsensusResult<Real> consensus_admm_project<Real>(const ProjectionProblem<Real>&, const SolverOptions&, \
                                                              const NestedOptions&);

SETPROJ_INSTANTIATE(float)
SETPROJ_INSTANTIATE(double)

}  // namespace setproj
