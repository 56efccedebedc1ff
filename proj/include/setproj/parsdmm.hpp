#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "setproj/cg.hpp"
#include "setproj/projectors.hpp"

namespace setproj {

/// One constraint {x : A x in C}: the operator A and the projector onto C.
template <typename Real>
struct ConstraintPair {
  OperatorPtr<Real> op;
  SetProjector<Real> projector;
};

/// Project m onto the intersection of the sets described by `pairs`. The distance
/// block (identity operator, prox of the squared distance to m) is added by the solver.
template <typename Real>
struct ProjectionProblem {
  Vec<Real> m;
  std::vector<ConstraintPair<Real>> pairs;
  CompGrid grid;

  /// Throws ShapeError when m or an operator does not match the grid.
  void validate() const;
};

struct SolverOptions {
  double eps_evol = 1e-2;
  double eps_feas = 1e-3;
  int history_s = 5;
  int feas_check_every = 5;
  int adapt_every = 2;
  double rho0 = 1.0;
  double gamma0 = 1.0;
  int max_outer = 5000;
  double eps_corr = 0.3;
  double rho_ratio_cap = 1e3;
  double cg_tol_floor = 1e-12;
  CgOptions cg{};

  std::size_t threads = 1;
  bool parallel_sets = false;  ///< run the per-set y/v/rho/gamma updates concurrently
  bool adapt = true;
  std::size_t band_budget = kDefaultBandBudget;
  bool verify_system = false;  ///< compare the updated system matrix with reassembly after each adapt step
  bool record_wall_time = false;
  int log_every = 0;  ///< 0 logs at every feasibility check

  void validate() const;
};

inline constexpr double kGammaMin = 1.0;
inline constexpr double kGammaMax = 2.0 - 1e-3;

/// Per-block iterates and the snapshots of the previous adapt call.
template <typename Real>
struct BlockState {
  Vec<Real> y;
  Vec<Real> v;
  Real rho = 1;
  Real gamma = 1;
  bool has_snapshot = false;
  Vec<Real> vhat0;
  Vec<Real> v0;
  Vec<Real> s0;
  Vec<Real> y0;
};

/// blocks[0..p-1] belong to the constraint pairs, blocks[p] to the distance term.
template <typename Real>
struct SolverState {
  Vec<Real> x;
  std::vector<BlockState<Real>> blocks;
  Index k = 0;
};

struct LogRecord {
  Index iter = 0;
  std::vector<double> r_feas;
  double r_evol = 0;
  long cg_iters_cum = 0;
  std::vector<long> proj_counts_cum;
  std::vector<double> rho;
  std::vector<double> gamma;
  double wall_ms = 0;
};

struct SolverLog {
  std::vector<LogRecord> records;
  std::vector<std::string> set_labels;
  std::vector<ProjectorKind> set_kinds;
  bool converged = false;
  Index iterations = 0;
  long cg_iterations = 0;
  std::vector<long> proj_counts;
  int cg_breakdowns = 0;
  double max_system_drift = 0;
  int adapt_steps = 0;
  double min_rho = 0;
  double min_gamma = 0;
  double max_gamma = 0;

  /// Cumulative simple projections onto sets of `kind`.
  long projections_of_kind(ProjectorKind kind) const;
  /// Columns: iter,set_index,r_feas,r_evol,cg_iters_cum,proj_counts_cum,wall_ms
  void write_csv(std::ostream& os) const;
};

inline constexpr const char* kLogCsvHeader = "iter,set_index,r_feas,r_evol,cg_iters_cum,proj_counts_cum,wall_ms";

template <typename Real>
struct ParsdmmResult {
  Vec<Real> x;
  SolverState<Real> state;
  SolverLog log;
};

// ---- building blocks ----------------------------------------------------------

enum class AdaptBranch { both, alpha_only, beta_only, neither };
std::string_view to_string(AdaptBranch branch);

struct SpectralUpdate {
  double rho = 0;
  double gamma = 0;
  AdaptBranch branch = AdaptBranch::neither;
  double alpha_corr = 0;
  double beta_corr = 0;
  double alpha_hat = 0;
  double beta_hat = 0;
};

/// The spectral estimates and four-way case table of the penalty/relaxation update, before
/// clamping. Inputs are the differences against the previous adapt call:
/// dvhat = vhat - vhat0, dv = v - v0, dh = s - s0, dg = -(y - y0).
template <typename Real>
SpectralUpdate spectral_update(const Vec<Real>& dvhat, const Vec<Real>& dv, const Vec<Real>& dh,
                               const Vec<Real>& dg, double rho, double eps_corr);

/// Updates rho and gamma of one block from v^k (`v_old`), y^k (`y_old`), s^{k+1} and the
/// block's current v and y. The first call only stores snapshots. Returns the case used, or
/// nothing on a snapshot-only call.
template <typename Real>
std::optional<SpectralUpdate> adapt_rho_gamma(BlockState<Real>& block, const Vec<Real>& v_old,
                                              const Vec<Real>& y_old, const Vec<Real>& s,
                                              double eps_corr);

/// Keeps every constraint rho within [rho_dist / cap, rho_dist * cap] of the distance block.
template <typename Real>
void clamp_rho_ratios(std::vector<BlockState<Real>>& blocks, double cap);

/// r_i = ||A_i x - P_i(A_i x)|| / ||A_i x||. An A_i x that is zero up to round-off relative to
/// ||x|| gives 0 when the set contains 0 and +infinity otherwise.
template <typename Real>
std::vector<double> feasibility_errors(const Vec<Real>& x, const std::vector<ConstraintPair<Real>>& pairs);

/// Same as feasibility_errors with A_i x already computed. `x_norm` sets the round-off floor;
/// 0 only treats exact zeros as zero.
template <typename Real>
std::vector<double> feasibility_errors_from(const std::vector<Vec<Real>>& s,
                                            const std::vector<ConstraintPair<Real>>& pairs, double x_norm = 0);

/// max_j ||x - history[j]|| / ||x|| over the given earlier iterates.
template <typename Real>
double relative_evolution(const Vec<Real>& x, const std::vector<Vec<Real>>& history);

/// Stopping test on already measured quantities.
bool check_stop(double r_evol, const std::vector<double>& r_feas, const SolverOptions& opts);

/// Solves C x = sum_i A_i^T (rho_i y_i + v_i) by CG from state.x with the adaptive tolerance
/// 0.1 ||C x - rhs|| / ||rhs||, floored at opts.cg_tol_floor. `ops` has one entry per block,
/// the last being the identity.
template <typename Real>
CgResult<Real> x_update(const SolverState<Real>& state, const std::vector<OperatorPtr<Real>>& ops,
                        const SystemMatrix<Real>& c, const SolverOptions& opts,
                        WorkerPool* pool = nullptr);

/// Relaxed y/v update of one block given s = A_i x^{k+1}.
template <typename Real>
void y_v_update(BlockState<Real>& block, const Vec<Real>& s,
                const std::function<Vec<Real>(const Vec<Real>&)>& prox);

/// Initial state: x = m, y_i = A_i m, v_i = 0, rho and gamma from the options.
template <typename Real>
SolverState<Real> initial_state(const ProjectionProblem<Real>& problem, const SolverOptions& opts);

template <typename Real>
ParsdmmResult<Real> parsdmm(const ProjectionProblem<Real>& problem, const SolverOptions& opts = {},
                            const std::optional<SolverState<Real>>& init = std::nullopt);

/// Independent re-check of the stopping conditions on a returned x.
template <typename Real>
bool verify_feasible(const Vec<Real>& x, const std::vector<ConstraintPair<Real>>& pairs, double eps_feas);

}  // namespace setproj
