#include "setproj/parsdmm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>

#include "setproj/errors.hpp"

namespace setproj {

template <typename Real>
void ProjectionProblem<Real>::validate() const {
  if (m.size() != grid.size()) {
    throw ShapeError("model length " + std::to_string(m.size()) + " does not match grid size " +
                     std::to_string(grid.size()));
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].op) throw ConfigError("constraint " + std::to_string(i) + " has no operator");
    if (pairs[i].op->input_size() != m.size()) {
      throw ShapeError("operator of constraint " + std::to_string(i) + " expects length " +
                       std::to_string(pairs[i].op->input_size()));
    }
  }
}

void SolverOptions::validate() const {
  if (!(eps_evol > 0) || !(eps_feas > 0)) throw ParameterError("stopping tolerances must be positive");
  if (history_s < 1 || feas_check_every < 1 || adapt_every < 1 || max_outer < 1) {
    throw ParameterError("iteration counts must be positive");
  }
  if (!(rho0 > 0)) throw ParameterError("rho0 must be positive");
  if (gamma0 < kGammaMin || gamma0 > kGammaMax) throw ParameterError("gamma0 must lie in [1, 2)");
  if (!(eps_corr > 0) || !(rho_ratio_cap >= 1)) throw ParameterError("invalid adaptation constants");
  if (!(cg_tol_floor > 0)) throw ParameterError("cg_tol_floor must be positive");
  if (threads < 1) throw ParameterError("threads must be at least 1");
  if (log_every < 0) throw ParameterError("log_every must be nonnegative");
  cg.validate();
}

long SolverLog::projections_of_kind(ProjectorKind kind) const {
  long total = 0;
  for (std::size_t i = 0; i < set_kinds.size() && i < proj_counts.size(); ++i) {
    if (set_kinds[i] == kind) total += proj_counts[i];
  }
  return total;
}

void SolverLog::write_csv(std::ostream& os) const {
  os << kLogCsvHeader << '\n';
  const auto old = os.precision(17);
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < rec.r_feas.size(); ++i) {
      os << rec.iter << ',' << i << ',' << rec.r_feas[i] << ',' << rec.r_evol << ',' << rec.cg_iters_cum
         << ',' << (i < rec.proj_counts_cum.size() ? rec.proj_counts_cum[i] : 0) << ',' << rec.wall_ms
         << '\n';
    }
  }
  os.precision(old);
}

std::string_view to_string(AdaptBranch branch) {
  switch (branch) {
    case AdaptBranch::both: return "both";
    case AdaptBranch::alpha_only: return "alpha_only";
    case AdaptBranch::beta_only: return "beta_only";
    case AdaptBranch::neither: return "neither";
  }
  return "unknown";
}

namespace {

double correlation(double dot, double na, double nb) {
  if (!(na > 0) || !(nb > 0)) return -std::numeric_limits<double>::infinity();
  const double c = dot / (na * nb);
  return std::isfinite(c) ? c : -std::numeric_limits<double>::infinity();
}

double spectral_estimate(double dot_hv, double dot_hh, double dot_vv) {
  const double mg = dot_hv / dot_hh;
  const double sd = dot_vv / dot_hv;
  return 2 * mg > sd ? mg : sd - 0.5 * mg;
}

}  // namespace

template <typename Real>
SpectralUpdate spectral_update(const Vec<Real>& dvhat, const Vec<Real>& dv, const Vec<Real>& dh,
                               const Vec<Real>& dg, double rho, double eps_corr) {
  const double hv = static_cast<double>(dh.dot(dvhat));
  const double hh = static_cast<double>(dh.squaredNorm());
  const double vhvh = static_cast<double>(dvhat.squaredNorm());
  const double gv = static_cast<double>(dg.dot(dv));
  const double gg = static_cast<double>(dg.squaredNorm());
  const double vv = static_cast<double>(dv.squaredNorm());

  SpectralUpdate out;
  out.alpha_corr = correlation(hv, std::sqrt(hh), std::sqrt(vhvh));
  out.beta_corr = correlation(gv, std::sqrt(gg), std::sqrt(vv));
  bool alpha_ok = out.alpha_corr > eps_corr;
  bool beta_ok = out.beta_corr > eps_corr;
  if (alpha_ok) {
    out.alpha_hat = spectral_estimate(hv, hh, vhvh);
    alpha_ok = std::isfinite(out.alpha_hat) && out.alpha_hat > 0;
  }
  if (beta_ok) {
    out.beta_hat = spectral_estimate(gv, gg, vv);
    beta_ok = std::isfinite(out.beta_hat) && out.beta_hat > 0;
  }

  if (alpha_ok && beta_ok) {
    const double root = std::sqrt(out.alpha_hat * out.beta_hat);
    out.rho = root;
    out.gamma = 1 + 2 * root / (out.alpha_hat + out.beta_hat);
    out.branch = AdaptBranch::both;
  } else if (alpha_ok) {
    out.rho = out.alpha_hat;
    out.gamma = 1.9;
    out.branch = AdaptBranch::alpha_only;
  } else if (beta_ok) {
    out.rho = out.beta_hat;
    out.gamma = 1.1;
    out.branch = AdaptBranch::beta_only;
  } else {
    out.rho = rho;
    out.gamma = 1.5;
    out.branch = AdaptBranch::neither;
  }
  return out;
}

template <typename Real>
std::optional<SpectralUpdate> adapt_rho_gamma(BlockState<Real>& block, const Vec<Real>& v_old,
                                              const Vec<Real>& y_old, const Vec<Real>& s,
                                              double eps_corr) {
  Vec<Real> vhat = v_old + block.rho * (y_old - s);
  if (!block.has_snapshot) {
    block.vhat0 = std::move(vhat);
    block.v0 = block.v;
    block.s0 = s;
    block.y0 = block.y;
    block.has_snapshot = true;
    return std::nullopt;
  }
  const Vec<Real> dvhat = vhat - block.vhat0;
  const Vec<Real> dv = block.v - block.v0;
  const Vec<Real> dh = s - block.s0;
  const Vec<Real> dg = -(block.y - block.y0);
  SpectralUpdate upd = spectral_update<Real>(dvhat, dv, dh, dg, static_cast<double>(block.rho), eps_corr);
  upd.gamma = std::clamp(upd.gamma, kGammaMin, kGammaMax);
  block.gamma = static_cast<Real>(upd.gamma);
  if (std::isfinite(upd.rho) && static_cast<Real>(upd.rho) > Real(0)) block.rho = static_cast<Real>(upd.rho);

  block.vhat0 = std::move(vhat);
  block.v0 = block.v;
  block.s0 = s;
  block.y0 = block.y;
  return upd;
}

template <typename Real>
void clamp_rho_ratios(std::vector<BlockState<Real>>& blocks, double cap) {
  if (blocks.empty()) return;
  const double ref = static_cast<double>(blocks.back().rho);
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    const double r = std::clamp(static_cast<double>(blocks[i].rho), ref / cap, ref * cap);
    blocks[i].rho = static_cast<Real>(r);
  }
}

template <typename Real>
std::vector<double> feasibility_errors_from(const std::vector<Vec<Real>>& s,
                                            const std::vector<ConstraintPair<Real>>& pairs, double x_norm) {
  std::vector<double> r(pairs.size());
  const double eps = static_cast<double>(std::numeric_limits<Real>::epsilon());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double nrm = static_cast<double>(s[i].norm());
    const double floor = 100 * eps * std::sqrt(static_cast<double>(s[i].size())) * x_norm;
    if (nrm <= floor) {
      r[i] = pairs[i].projector.contains_zero() ? 0.0 : std::numeric_limits<double>::infinity();
      continue;
    }
    const Vec<Real> p = pairs[i].projector(s[i]);
    r[i] = static_cast<double>((s[i] - p).norm()) / nrm;
  }
  return r;
}

template <typename Real>
std::vector<double> feasibility_errors(const Vec<Real>& x, const std::vector<ConstraintPair<Real>>& pairs) {
  std::vector<Vec<Real>> s;
  s.reserve(pairs.size());
  for (const auto& pr : pairs) s.push_back(pr.op->forward(x));
  return feasibility_errors_from(s, pairs, static_cast<double>(x.norm()));
}

template <typename Real>
double relative_evolution(const Vec<Real>& x, const std::vector<Vec<Real>>& history) {
  double worst = 0;
  for (const auto& h : history) worst = std::max(worst, static_cast<double>((x - h).norm()));
  const double nx = static_cast<double>(x.norm());
  if (nx == 0) return worst == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return worst / nx;
}

bool check_stop(double r_evol, const std::vector<double>& r_feas, const SolverOptions& opts) {
  if (!(r_evol < opts.eps_evol)) return false;
  return std::all_of(r_feas.begin(), r_feas.end(), [&](double r) { return r < opts.eps_feas; });
}

template <typename Real>
CgResult<Real> x_update(const SolverState<Real>& state, const std::vector<OperatorPtr<Real>>& ops,
                        const SystemMatrix<Real>& c, const SolverOptions& opts, WorkerPool* pool) {
  if (ops.size() != state.blocks.size()) throw ShapeError("x_update: one operator per block is required");
  const Index n = state.x.size();
  std::vector<Vec<Real>> parts(ops.size());
  auto contribution = [&](Index i) {
    const auto& b = state.blocks[i];
    const Vec<Real> w = b.rho * b.y + b.v;
    ops[i]->adjoint(w, parts[i]);
  };
  if (pool && opts.parallel_sets) {
    pool->for_each(static_cast<Index>(ops.size()), contribution);
  } else {
    for (std::size_t i = 0; i < ops.size(); ++i) contribution(static_cast<Index>(i));
  }
  Vec<Real> rhs = Vec<Real>::Zero(n);
  for (const auto& p : parts) rhs += p;

  CgOptions cg = opts.cg;
  const double bnorm = static_cast<double>(rhs.norm());
  if (bnorm > cg.abs_floor) {
    Vec<Real> q;
    c.multiply(state.x, q, pool);
    const double rel0 = static_cast<double>((q - rhs).norm()) / bnorm;
    cg.rel_tol = std::max(0.1 * rel0, opts.cg_tol_floor);
  }
  return cg_solve(c, rhs, state.x, cg, pool);
}

template <typename Real>
void y_v_update(BlockState<Real>& block, const Vec<Real>& s,
                const std::function<Vec<Real>(const Vec<Real>&)>& prox) {
  const Vec<Real> xbar = block.gamma * s + (Real(1) - block.gamma) * block.y;
  block.y = prox(xbar - block.v / block.rho);
  block.v += block.rho * (block.y - xbar);
}

template <typename Real>
SolverState<Real> initial_state(const ProjectionProblem<Real>& problem, const SolverOptions& opts) {
  SolverState<Real> st;
  st.x = problem.m;
  for (const auto& pr : problem.pairs) {
    BlockState<Real> b;
    b.y = pr.op->forward(problem.m);
    b.v = Vec<Real>::Zero(b.y.size());
    b.rho = static_cast<Real>(opts.rho0);
    b.gamma = static_cast<Real>(opts.gamma0);
    st.blocks.push_back(std::move(b));
  }
  BlockState<Real> dist;
  dist.y = problem.m;
  dist.v = Vec<Real>::Zero(problem.m.size());
  dist.rho = static_cast<Real>(opts.rho0);
  dist.gamma = static_cast<Real>(opts.gamma0);
  st.blocks.push_back(std::move(dist));
  return st;
}

namespace {

template <typename Real>
void check_state(const SolverState<Real>& st, const std::vector<OperatorPtr<Real>>& ops, Index n) {
  if (st.x.size() != n) throw ShapeError("initial state: x has the wrong length");
  if (st.blocks.size() != ops.size()) throw ShapeError("initial state: wrong number of blocks");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& b = st.blocks[i];
    if (b.y.size() != ops[i]->output_size() || b.v.size() != ops[i]->output_size()) {
      throw ShapeError("initial state: block " + std::to_string(i) + " has the wrong length");
    }
    if (!(b.rho > Real(0))) throw ParameterError("initial state: rho must be positive");
  }
}

template <typename Real>
SparseMatrix<Real> block_gram(const LinearOperator<Real>& op) {
  if (op.is_orthogonal()) {
    SparseMatrix<Real> eye(op.input_size(), op.input_size());
    eye.setIdentity();
    return eye;
  }
  return gram(op);
}

}  // namespace

template <typename Real>
ParsdmmResult<Real> parsdmm(const ProjectionProblem<Real>& problem, const SolverOptions& opts,
                            const std::optional<SolverState<Real>>& init) {
  problem.validate();
  opts.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const Index n = problem.m.size();
  const std::size_t p = problem.pairs.size();

  std::vector<OperatorPtr<Real>> ops;
  for (const auto& pr : problem.pairs) ops.push_back(pr.op);
  ops.push_back(build_operator<Real>(OperatorKind::identity, problem.grid));

  ParsdmmResult<Real> res;
  res.state = init ? *init : initial_state(problem, opts);
  SolverState<Real>& st = res.state;
  check_state(st, ops, n);
  for (auto& b : st.blocks) b.gamma = std::clamp(b.gamma, Real(kGammaMin), Real(kGammaMax));

  std::vector<SparseMatrix<Real>> grams;
  std::vector<Real> rho;
  for (std::size_t i = 0; i <= p; ++i) {
    grams.push_back(block_gram(*ops[i]));
    rho.push_back(st.blocks[i].rho);
  }
  SystemMatrix<Real> c = SystemMatrix<Real>::assemble(grams, rho, opts.band_budget);

  WorkerPool pool(opts.threads);
  SolverLog& log = res.log;
  for (const auto& pr : problem.pairs) {
    log.set_labels.push_back(pr.projector.label());
    log.set_kinds.push_back(pr.projector.kind());
  }
  log.proj_counts.assign(p, 0);
  log.min_rho = std::numeric_limits<double>::infinity();
  log.min_gamma = std::numeric_limits<double>::infinity();
  log.max_gamma = -std::numeric_limits<double>::infinity();

  std::vector<std::function<Vec<Real>(const Vec<Real>&)>> prox(p + 1);
  for (std::size_t i = 0; i < p; ++i) {
    prox[i] = [&problem, i](const Vec<Real>& w) { return problem.pairs[i].projector(w); };
  }
  prox[p] = [&problem, &st, p](const Vec<Real>& w) { return prox_distance<Real>(w, problem.m, st.blocks[p].rho); };

  std::vector<Vec<Real>> s(p + 1);
  std::deque<Vec<Real>> history;
  history.push_back(st.x);
  const int log_every = opts.log_every > 0 ? opts.log_every : opts.feas_check_every;

  Vec<Real> best_x = st.x;
  double best_feas = std::numeric_limits<double>::infinity();
  bool have_best = false;

  const Index k_begin = st.k;
  for (Index it = 0; it < opts.max_outer; ++it) {
    const Index k = ++st.k;
    CgResult<Real> cg = x_update(st, ops, c, opts, &pool);
    log.cg_iterations += cg.iterations;
    if (cg.breakdown) ++log.cg_breakdowns;
    st.x = std::move(cg.x);

    const bool adapting = opts.adapt && ((k - k_begin) % opts.adapt_every == 1 % opts.adapt_every);
    std::vector<char> adapted(p + 1, 0);
    auto block_step = [&](Index i) {
      auto& b = st.blocks[i];
      ops[i]->forward(st.x, s[i]);
      if (adapting) {
        const Vec<Real> v_old = b.v;
        const Vec<Real> y_old = b.y;
        y_v_update(b, s[i], prox[i]);
        adapted[i] = adapt_rho_gamma(b, v_old, y_old, s[i], opts.eps_corr).has_value();
      } else {
        y_v_update(b, s[i], prox[i]);
      }
    };
    if (opts.parallel_sets) {
      pool.for_each(static_cast<Index>(p + 1), block_step);
    } else {
      for (std::size_t i = 0; i <= p; ++i) block_step(static_cast<Index>(i));
    }
    for (std::size_t i = 0; i < p; ++i) ++log.proj_counts[i];

    if (adapting) {
      if (std::any_of(adapted.begin(), adapted.end(), [](char a) { return a != 0; })) ++log.adapt_steps;
      clamp_rho_ratios(st.blocks, opts.rho_ratio_cap);
      for (std::size_t i = 0; i <= p; ++i) {
        const Real old = c.rho()[i];
        if (st.blocks[i].rho != old) c.update(i, st.blocks[i].rho, old);
      }
      if (opts.verify_system) {
        std::vector<Real> now;
        for (const auto& b : st.blocks) now.push_back(b.rho);
        const auto fresh = SystemMatrix<Real>::assemble(grams, now, opts.band_budget);
        log.max_system_drift = std::max(log.max_system_drift, relative_frobenius_gap(c, fresh));
      }
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
      const std::vector<double> r_feas = feasibility_errors_from(s, problem.pairs, static_cast<double>(st.x.norm()));
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
      if (check && static_cast<int>(history.size()) >= opts.history_s) {
        stop = check_stop(r_evol, r_feas, opts);
      }
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

template <typename Real>
bool verify_feasible(const Vec<Real>& x, const std::vector<ConstraintPair<Real>>& pairs, double eps_feas) {
  const auto r = feasibility_errors(x, pairs);
  return std::all_of(r.begin(), r.end(), [&](double v) { return v < eps_feas; });
}

#define SETPROJ_INSTANTIATE(Real)                                                                       \
  template struct ProjectionProblem<Real>;                                                              \
  template SpectralUpdate spectral_update<Real>(const Vec<Real>&, const Vec<Real>&, const Vec<Real>&,   \
                                                const Vec<Real>&, double, double);                      \
  template std::optional<SpectralUpdate> adapt_rho_gamma<Real>(BlockState<Real>&, const Vec<Real>&,     \
                                                               const Vec<Real>&, const Vec<Real>&,      \
                                                               double);                                 \
  template void clamp_rho_ratios<Real>(std::vector<BlockState<Real>>&, double);                         \
  template std::vector<double> feasibility_errors<Real>(const Vec<Real>&,                               \
                                                        const std::vector<ConstraintPair<Real>>&);      \
  template std::vector<double> feasibility_errors_from<Real>(const std::vector<Vec<Real>>&,             \
                                                             const std::vector<ConstraintPair<Real>>&, \
                                                             double);                                  \
  template double relative_evolution<Real>(const Vec<Real>&, const std::vector<Vec<Real>>&);            \
  template CgResult<Real> x_update<Real>(const SolverState<Real>&, const std::vector<OperatorPtr<Real>>&, \
                                         const SystemMatrix<Real>&, const SolverOptions&, WorkerPool*); \
  template void y_v_update<Real>(BlockState<Real>&, const Vec<Real>&,                                   \
                                 const std::function<Vec<Real>(const Vec<Real>&)>&);                    \
  template SolverState<Real> initial_state<Real>(const ProjectionProblem<Real>&, const SolverOptions&); \
  template ParsdmmResult<Real> parsdmm<Real>(const ProjectionProblem<Real>&, const SolverOptions&,      \
                                             const std::optional<SolverState<Real>>&);                  \
  template bool verify_feasible<Real>(const Vec<Real>&, const std::vector<ConstraintPair<Real>>&, double);

SETPROJ_INSTANTIATE(float)
SETPROJ_INSTANTIATE(double)

}  // namespace setproj
