#include "setproj/multilevel.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "setproj/errors.hpp"

namespace setproj {

std::string LevelPlan::describe() const {
  std::ostringstream os;
  os << "levels=" << n_levels << " factor=" << factor;
  for (std::size_t l = 0; l < grids.size(); ++l) {
    os << " | L" << l << ": " << grids[l].shape().str() << " h=(";
    for (std::size_t a = 0; a < grids[l].spacing.size(); ++a) os << (a ? "," : "") << grids[l].spacing[a];
    os << ")";
  }
  return os.str();
}

CompGrid coarsen_grid(const CompGrid& grid, int factor) {
  if (factor < 2) throw ConfigError("coarsening factor must be at least 2");
  std::vector<double> h;
  std::vector<Index> n;
  for (int a = 0; a < grid.dims(); ++a) {
    const Index c = (grid.counts[a] + factor - 1) / factor;
    if (c < 2) {
      throw ConfigError("level plan: axis " + std::to_string(a) + " would have " + std::to_string(c) +
                        " cells after coarsening " + std::to_string(grid.counts[a]) + " by " +
                        std::to_string(factor));
    }
    n.push_back(c);
    h.push_back(grid.spacing[a] * factor);
  }
  return CompGrid(h, n);
}

LevelPlan make_level_plan(const CompGrid& grid, int n_levels, int factor) {
  if (n_levels < 1) throw ConfigError("level plan needs at least one level");
  if (factor < 2) throw ConfigError("coarsening factor must be at least 2");
  LevelPlan plan;
  plan.n_levels = n_levels;
  plan.factor = factor;
  plan.grids.push_back(grid);
  for (int l = 1; l < n_levels; ++l) plan.grids.push_back(coarsen_grid(plan.grids.back(), factor));
  return plan;
}

namespace {

/// Applies `fn(line_in, line_out)` to every line of `v` along `axis`, producing length n_out lines.
template <typename Real, typename Fn>
Vec<Real> map_axis(const Vec<Real>& v, const Shape& in, int axis, Index n_out, Fn&& fn, Shape* out_shape) {
  Shape os = in;
  os.counts[static_cast<std::size_t>(axis)] = n_out;
  Vec<Real> out(os.size());
  const Index n_in = in.count(axis);
  std::vector<Real> line_in(static_cast<std::size_t>(n_in));
  std::vector<Real> line_out(static_cast<std::size_t>(n_out));
  std::array<Index, 3> ext{in.count(kAxisZ), in.count(kAxisX), in.count(kAxisY)};
  ext[static_cast<std::size_t>(axis)] = 1;
  for (Index iy = 0; iy < ext[kAxisY]; ++iy) {
    for (Index iz = 0; iz < ext[kAxisZ]; ++iz) {
      for (Index ix = 0; ix < ext[kAxisX]; ++ix) {
        std::array<Index, 3> c{iz, ix, iy};
        for (Index j = 0; j < n_in; ++j) {
          c[static_cast<std::size_t>(axis)] = j;
          line_in[static_cast<std::size_t>(j)] = v[in.index(c[0], c[1], c[2])];
        }
        fn(line_in, line_out);
        for (Index j = 0; j < n_out; ++j) {
          c[static_cast<std::size_t>(axis)] = j;
          out[os.index(c[0], c[1], c[2])] = line_out[static_cast<std::size_t>(j)];
        }
      }
    }
  }
  if (out_shape) *out_shape = os;
  return out;
}

}  // namespace

template <typename Real>
Vec<Real> coarsen_field(const Vec<Real>& v, const Shape& from, int factor) {
  if (factor < 1) throw ConfigError("coarsening factor must be positive");
  if (v.size() != from.size()) throw ShapeError("coarsen: field length does not match " + from.str());
  Vec<Real> cur = v;
  Shape shape = from;
  for (int a = 0; a < from.dims(); ++a) {
    const Index n = shape.count(a);
    const Index nc = (n + factor - 1) / factor;
    Shape next;
    cur = map_axis<Real>(
        cur, shape, a, nc,
        [&](const std::vector<Real>& in, std::vector<Real>& out) {
          for (Index j = 0; j < nc; ++j) {
            const Index b = j * factor;
            const Index e = std::min(n, b + factor);
            double sum = 0;
            for (Index i = b; i < e; ++i) sum += static_cast<double>(in[static_cast<std::size_t>(i)]);
            out[static_cast<std::size_t>(j)] = static_cast<Real>(sum / static_cast<double>(e - b));
          }
        },
        &next);
    shape = next;
  }
  return cur;
}

template <typename Real>
Vec<Real> coarsen_model(const Vec<Real>& m, const CompGrid& grid, int factor, CompGrid* coarse) {
  const CompGrid cg = coarsen_grid(grid, factor);
  Vec<Real> out = coarsen_field(m, grid.shape(), factor);
  if (coarse) *coarse = cg;
  return out;
}

template <typename Real>
Vec<Real> interpolate_field(const Vec<Real>& v, const Shape& from, const Shape& to) {
  if (v.size() != from.size()) throw ShapeError("interpolate: field length does not match " + from.str());
  if (from.dims() != to.dims()) throw ShapeError("interpolate: " + from.str() + " and " + to.str() + " differ in dims");
  if (from == to) return v;
  Vec<Real> cur = v;
  Shape shape = from;
  for (int a = 0; a < from.dims(); ++a) {
    const Index n_in = shape.count(a);
    const Index n_out = to.count(a);
    if (n_in == n_out) continue;
    Shape next;
    cur = map_axis<Real>(
        cur, shape, a, n_out,
        [&](const std::vector<Real>& in, std::vector<Real>& out) {
          for (Index j = 0; j < n_out; ++j) {
            if (n_in == 1) {
              out[static_cast<std::size_t>(j)] = in[0];
              continue;
            }
            const double t = n_out == 1 ? 0.0
                                        : static_cast<double>(j) * static_cast<double>(n_in - 1) /
                                              static_cast<double>(n_out - 1);
            const Index i0 = std::min(static_cast<Index>(std::floor(t)), n_in - 2);
            const double w = t - static_cast<double>(i0);
            const double a0 = static_cast<double>(in[static_cast<std::size_t>(i0)]);
            const double a1 = static_cast<double>(in[static_cast<std::size_t>(i0 + 1)]);
            out[static_cast<std::size_t>(j)] = static_cast<Real>((1 - w) * a0 + w * a1);
          }
        },
        &next);
    shape = next;
  }
  return cur;
}

namespace {

double measure_nuclear(const Vec<double>& v, const Shape& s) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const DenseMatrix<double> dense = Eigen::Map<const RowMajor>(v.data(), s.counts[0], s.counts[1]);
  Eigen::BDCSVD<DenseMatrix<double>> svd(dense);
  return svd.singularValues().sum();
}

std::optional<SetDefinition> coarsen_definition(const SetDefinition& d, const CompGrid& fine,
                                                const CompGrid& coarse, int factor, const Vec<double>& mc) {
  const OperatorKind kind = parse_operator_kind(d.td_op);
  if (kind == OperatorKind::custom_banded) return std::nullopt;
  const auto fine_op = build_operator<double>(kind, fine);
  const auto coarse_op = build_operator<double>(kind, coarse);
  const double ratio =
      static_cast<double>(coarse_op->output_size()) / static_cast<double>(fine_op->output_size());
  const auto measured = [&](auto&& fn) { return fn(coarse_op->forward(mc)); };
  SetDefinition c = d;

  if (d.set_type == "bounds") {
    if (d.min.size() > 1 || d.max.size() > 1) {
      if (kind != OperatorKind::identity) return std::nullopt;
      const auto shrink = [&](const std::vector<double>& b) {
        if (b.size() == 1) return b;
        const Vec<double> bv = Eigen::Map<const Vec<double>>(b.data(), static_cast<Index>(b.size()));
        const Vec<double> cv = coarsen_field<double>(bv, fine.shape(), factor);
        return std::vector<double>(cv.data(), cv.data() + cv.size());
      };
      c.min = shrink(d.min);
      c.max = shrink(d.max);
    }
  } else if (d.set_type == "l1") {
    const double m_val = measured([&](const Vec<double>& s) {
      if (kind == OperatorKind::dft) {
        const Index n = mc.size();
        double t = 0;
        for (Index i = 0; i < n; ++i) t += std::hypot(s[i], s[n + i]);
        return t;
      }
      return s.lpNorm<1>();
    });
    c.sigma = std::max(m_val, d.sigma * ratio);
  } else if (d.set_type == "l2") {
    c.sigma = std::max(measured([](const Vec<double>& s) { return s.norm(); }), d.sigma * std::sqrt(ratio));
  } else if (d.set_type == "nuclear") {
    const Shape s = coarse_op->blocks().front().shape;
    c.sigma = std::max(measured([&](const Vec<double>& v) { return measure_nuclear(v, s); }),
                       d.sigma * std::sqrt(ratio));
  } else if (d.set_type == "annulus") {
    c.sigma_l = d.sigma_l * std::sqrt(ratio);
    c.sigma_u = d.sigma_u * std::sqrt(ratio);
  } else if (d.set_type == "cardinality") {
    c.k = std::clamp<Index>(static_cast<Index>(std::ceil(static_cast<double>(d.k) * ratio)), 1,
                            coarse_op->output_size());
  } else if (d.set_type == "rank") {
    const Shape s = coarse_op->blocks().front().shape;
    c.r = std::clamp<Index>(d.r, 1, std::min(s.counts[0], s.counts[1]) - 1);
  }
  return c;
}

}  // namespace

template <typename Real>
std::vector<std::optional<SetDefinition>> coarsen_definitions(const std::vector<SetDefinition>& defs,
                                                              const CompGrid& fine, const CompGrid& coarse,
                                                              int factor, const Vec<Real>& m_coarse) {
  const Vec<double> mc = m_coarse.template cast<double>();
  std::vector<std::optional<SetDefinition>> out;
  for (const auto& d : defs) out.push_back(coarsen_definition(d, fine, coarse, factor, mc));
  return out;
}

namespace {

template <typename Real>
Vec<Real> interpolate_blocks(const Vec<Real>& v, const LinearOperator<Real>& from, const LinearOperator<Real>& to) {
  const auto& bf = from.blocks();
  const auto& bt = to.blocks();
  if (bf.size() != bt.size() || bf.empty()) {
    throw ShapeError("operator field geometries differ between levels");
  }
  Vec<Real> out(to.output_size());
  for (std::size_t b = 0; b < bf.size(); ++b) {
    const Vec<Real> seg = v.segment(bf[b].offset, bf[b].shape.size());
    out.segment(bt[b].offset, bt[b].shape.size()) = interpolate_field<Real>(seg, bf[b].shape, bt[b].shape);
  }
  return out;
}

}  // namespace

template <typename Real>
MultilevelResult<Real> ml_parsdmm(const Vec<Real>& m, const std::vector<SetDefinition>& defs,
                                  const LevelPlan& plan, const SolverOptions& opts) {
  if (plan.grids.empty() || static_cast<int>(plan.grids.size()) != plan.n_levels) {
    throw ConfigError("level plan is inconsistent");
  }
  const CompGrid& fine = plan.grids.front();
  if (m.size() != fine.size()) throw ShapeError("model does not match the finest grid");

  // models per level, finest first
  std::vector<Vec<Real>> models{m};
  for (std::size_t l = 1; l < plan.grids.size(); ++l) {
    models.push_back(coarsen_field<Real>(models.back(), plan.grids[l - 1].shape(), plan.factor));
  }

  // definitions per level, finest first; parameters are rescaled from one level to the next
  std::vector<std::vector<std::optional<SetDefinition>>> chain(plan.grids.size());
  chain[0].assign(defs.begin(), defs.end());
  for (std::size_t l = 1; l < plan.grids.size(); ++l) {
    const Vec<double> mc = models[l].template cast<double>();
    for (const auto& d : chain[l - 1]) {
      chain[l].push_back(d ? coarsen_definition(*d, plan.grids[l - 1], plan.grids[l], plan.factor, mc)
                           : std::nullopt);
    }
  }

  MultilevelResult<Real> res;
  res.plan = plan;
  std::optional<SolverState<Real>> warm;
  std::vector<int> prev_index;  // definition index -> block index at the previous level, or -1
  std::vector<OperatorPtr<Real>> prev_ops;
  CompGrid prev_grid;

  for (int l = plan.n_levels - 1; l >= 0; --l) {
    const CompGrid& grid = plan.grids[static_cast<std::size_t>(l)];
    std::vector<SetDefinition> level_defs;
    std::vector<int> index(defs.size(), -1);
    for (std::size_t i = 0; i < defs.size(); ++i) {
      const auto& d = chain[static_cast<std::size_t>(l)][i];
      if (!d) continue;
      index[i] = static_cast<int>(level_defs.size());
      level_defs.push_back(*d);
    }

    ProjectionProblem<Real> problem;
    problem.m = models[static_cast<std::size_t>(l)];
    problem.grid = grid;
    if (!level_defs.empty()) {
      try {
        problem.pairs = setup_constraints<Real>(level_defs, grid, opts.band_budget).pairs;
      } catch (const Error& e) {
        throw ConfigError("level " + std::to_string(l) + ": " + e.what());
      }
    }

    std::optional<SolverState<Real>> init;
    if (warm) {
      SolverState<Real> st;
      const Shape from = prev_grid.shape();
      const Shape to = grid.shape();
      st.x = interpolate_field<Real>(warm->x, from, to);
      for (std::size_t i = 0; i < defs.size(); ++i) {
        if (index[i] < 0) continue;
        const auto& op = problem.pairs[static_cast<std::size_t>(index[i])].op;
        BlockState<Real> b;
        // penalties restart at every level: A_i^T A_i changes scale with the grid spacing
        b.rho = static_cast<Real>(opts.rho0);
        b.gamma = static_cast<Real>(opts.gamma0);
        if (prev_index[i] >= 0) {
          const auto& pb = warm->blocks[static_cast<std::size_t>(prev_index[i])];
          const auto& pop = *prev_ops[static_cast<std::size_t>(prev_index[i])];
          b.y = interpolate_blocks<Real>(pb.y, pop, *op);
          b.v = interpolate_blocks<Real>(pb.v, pop, *op);
        } else {
          b.y = op->forward(st.x);
          b.v = Vec<Real>::Zero(b.y.size());
        }
        st.blocks.push_back(std::move(b));
      }
      const auto& pd = warm->blocks.back();
      BlockState<Real> dist;
      dist.y = interpolate_field<Real>(pd.y, from, to);
      dist.v = interpolate_field<Real>(pd.v, from, to);
      dist.rho = static_cast<Real>(opts.rho0);
      dist.gamma = static_cast<Real>(opts.gamma0);
      st.blocks.push_back(std::move(dist));
      init = std::move(st);
    }

    ParsdmmResult<Real> r;
    try {
      r = parsdmm<Real>(problem, opts, init);
    } catch (const Error& e) {
      throw Error("level " + std::to_string(l) + ": " + e.what());
    }
    res.logs.push_back(std::move(r.log));
    prev_ops.clear();
    for (const auto& pr : problem.pairs) prev_ops.push_back(pr.op);
    prev_ops.push_back(build_operator<Real>(OperatorKind::identity, grid));
    prev_index = index;
    prev_grid = grid;
    r.state.x = r.x;
    warm = std::move(r.state);
    if (l == 0) {
      res.x = r.x;
      res.converged = res.logs.back().converged;
    }
  }
  res.state = std::move(*warm);
  return res;
}

#define SETPROJ_INSTANTIATE(Real)                                                                           \
  template Vec<Real> coarsen_model<Real>(const Vec<Real>&, const CompGrid&, int, CompGrid*);                \
  template Vec<Real> coarsen_field<Real>(const Vec<Real>&, const Shape&, int);                              \
  template Vec<Real> interpolate_field<Real>(const Vec<Real>&, const Shape&, const Shape&);                 \
  template std::vector<std::optional<SetDefinition>> coarsen_definitions<Real>(                             \
      const std::vector<SetDefinition>&, const CompGrid&, const CompGrid&, int, const Vec<Real>&);          \
  template MultilevelResult<Real> ml_parsdmm<Real>(const Vec<Real>&, const std::vector<SetDefinition>&,     \
                                                   const LevelPlan&, const SolverOptions&);

SETPROJ_INSTANTIATE(float)
SETPROJ_INSTANTIATE(double)

}  // namespace setproj
