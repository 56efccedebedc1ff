#include "setproj/projectors.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "setproj/errors.hpp"

namespace setproj {

std::string_view to_string(ProjectorKind kind) {
  switch (kind) {
    case ProjectorKind::bounds: return "bounds";
    case ProjectorKind::l1_ball: return "l1_ball";
    case ProjectorKind::l2_ball: return "l2_ball";
    case ProjectorKind::annulus: return "annulus";
    case ProjectorKind::cardinality: return "cardinality";
    case ProjectorKind::rank: return "rank";
    case ProjectorKind::nuclear_ball: return "nuclear_ball";
  }
  return "unknown";
}

std::string_view to_string(ApplyMode mode) {
  switch (mode) {
    case ApplyMode::whole: return "matrix";
    case ApplyMode::per_row: return "rows";
    case ApplyMode::per_column: return "cols";
    case ApplyMode::per_fiber: return "fibers";
  }
  return "unknown";
}

template <typename Real>
Vec<Real> project_bounds(const Vec<Real>& w, const Vec<Real>& lower, const Vec<Real>& upper) {
  const Index n = w.size();
  const bool scalar_lo = lower.size() == 1;
  const bool scalar_hi = upper.size() == 1;
  if ((!scalar_lo && lower.size() != n) || (!scalar_hi && upper.size() != n)) {
    throw ShapeError("bounds length must be 1 or match the vector");
  }
  Vec<Real> out(n);
  for (Index i = 0; i < n; ++i) {
    const Real lo = scalar_lo ? lower[0] : lower[i];
    const Real hi = scalar_hi ? upper[0] : upper[i];
    if (lo > hi) throw ParameterError("bounds: lower exceeds upper at entry " + std::to_string(i));
    out[i] = std::clamp(w[i], lo, hi);
  }
  return out;
}

template <typename Real>
Vec<Real> project_bounds(const Vec<Real>& w, Real lower, Real upper) {
  return project_bounds<Real>(w, Vec<Real>::Constant(1, lower), Vec<Real>::Constant(1, upper));
}

template <typename Real>
Vec<Real> project_l1_ball(const Vec<Real>& w, Real sigma) {
  if (sigma < Real(0)) throw ParameterError("l1 ball radius must be nonnegative");
  const Vec<Real> mag = w.cwiseAbs();
  if (mag.sum() <= sigma) return w;
  if (sigma == Real(0)) return Vec<Real>::Zero(w.size());
  std::vector<Real> u(mag.data(), mag.data() + mag.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  // largest j with u_j > (sum_{i<=j} u_i - sigma) / (j + 1)
  double cumsum = 0;
  double theta = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += static_cast<double>(u[j]);
    const double t = (cumsum - static_cast<double>(sigma)) / static_cast<double>(j + 1);
    if (static_cast<double>(u[j]) > t) theta = t;
  }
  Vec<Real> out(w.size());
  for (Index i = 0; i < w.size(); ++i) {
    const Real shrunk = std::max(mag[i] - static_cast<Real>(theta), Real(0));
    out[i] = w[i] < Real(0) ? -shrunk : shrunk;
  }
  return out;
}

template <typename Real>
Vec<Real> project_l2_ball(const Vec<Real>& w, Real sigma) {
  if (sigma < Real(0)) throw ParameterError("l2 ball radius must be nonnegative");
  const Real nrm = w.norm();
  if (nrm <= sigma) return w;
  return w * (sigma / nrm);
}

template <typename Real>
Vec<Real> project_annulus(const Vec<Real>& w, Real sigma_l, Real sigma_u) {
  if (sigma_l < Real(0) || sigma_l > sigma_u) {
    throw ParameterError("annulus requires 0 <= sigma_l <= sigma_u");
  }
  const Real nrm = w.norm();
  if (nrm > sigma_u) return w * (sigma_u / nrm);
  if (nrm >= sigma_l) return w;
  if (nrm == Real(0)) {
    Vec<Real> out = Vec<Real>::Zero(w.size());
    if (out.size() > 0) out[0] = sigma_l;
    return out;
  }
  return w * (sigma_l / nrm);
}

template <typename Real>
Vec<Real> project_cardinality(const Vec<Real>& w, Index k) {
  const Index n = w.size();
  if (k < 0 || k > n) throw ParameterError("cardinality k must lie in [0, length]");
  if (k == n) return w;
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  auto before = [&](Index a, Index b) {
    const Real ma = std::abs(w[a]);
    const Real mb = std::abs(w[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::nth_element(idx.begin(), idx.begin() + k, idx.end(), before);
  Vec<Real> out = Vec<Real>::Zero(n);
  for (Index j = 0; j < k; ++j) out[idx[j]] = w[idx[j]];
  return out;
}

namespace {

template <typename Real>
using RowMajorMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real, typename Shrink>
Vec<Real> svd_reconstruct(const Vec<Real>& w, Index rows, Index cols, Shrink&& shrink) {
  if (rows * cols != w.size()) throw ShapeError("matrix shape does not match the vector length");
  const Eigen::Map<const RowMajorMatrix<Real>> mat(w.data(), rows, cols);
  Eigen::BDCSVD<DenseMatrix<Real>> svd(DenseMatrix<Real>(mat), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD failed to converge");
  Vec<Real> s = svd.singularValues();
  if (!s.allFinite()) throw NumericError("SVD produced non-finite singular values");
  s = shrink(s);
  const RowMajorMatrix<Real> rec = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return Eigen::Map<const Vec<Real>>(rec.data(), rows * cols);
}

}  // namespace

template <typename Real>
Vec<Real> project_rank(const Vec<Real>& w, Index rows, Index cols, Index r) {
  if (r < 1) throw ParameterError("rank must be at least 1");
  if (r >= std::min(rows, cols)) {
    if (rows * cols != w.size()) throw ShapeError("matrix shape does not match the vector length");
    return w;
  }
  return svd_reconstruct<Real>(w, rows, cols, [r](Vec<Real> s) {
    for (Index j = r; j < s.size(); ++j) s[j] = Real(0);
    return s;
  });
}

template <typename Real>
Vec<Real> project_nuclear(const Vec<Real>& w, Index rows, Index cols, Real sigma) {
  if (sigma < Real(0)) throw ParameterError("nuclear ball radius must be nonnegative");
  return svd_reconstruct<Real>(w, rows, cols,
                               [sigma](const Vec<Real>& s) { return project_l1_ball<Real>(s, sigma); });
}

template <typename Real>
Vec<Real> prox_distance(const Vec<Real>& w, const Vec<Real>& m, Real rho) {
  if (!(rho > Real(0))) throw ParameterError("prox_distance requires rho > 0");
  if (w.size() != m.size()) throw ShapeError("prox_distance: length mismatch");
  return (m + rho * w) / (Real(1) + rho);
}

// ---- SimpleProjector ----------------------------------------------------------

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::bounds(Real lo, Real hi) {
  return bounds(Vec<Real>::Constant(1, lo), Vec<Real>::Constant(1, hi));
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::bounds(Vec<Real> lo, Vec<Real> hi) {
  SimpleProjector p;
  p.kind = ProjectorKind::bounds;
  p.lower = std::move(lo);
  p.upper = std::move(hi);
  return p;
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::l1_ball(Real sigma) {
  SimpleProjector p;
  p.kind = ProjectorKind::l1_ball;
  p.sigma = sigma;
  return p;
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::l2_ball(Real sigma) {
  SimpleProjector p;
  p.kind = ProjectorKind::l2_ball;
  p.sigma = sigma;
  return p;
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::annulus(Real sigma_l, Real sigma_u) {
  SimpleProjector p;
  p.kind = ProjectorKind::annulus;
  p.sigma_lower = sigma_l;
  p.sigma_upper = sigma_u;
  return p;
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::cardinality(Index k) {
  SimpleProjector p;
  p.kind = ProjectorKind::cardinality;
  p.k = k;
  return p;
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::rank(Index r, Shape shape) {
  SimpleProjector p;
  p.kind = ProjectorKind::rank;
  p.r = r;
  p.field_shape = std::move(shape);
  return p;
}

template <typename Real>
SimpleProjector<Real> SimpleProjector<Real>::nuclear_ball(Real sigma, Shape shape) {
  SimpleProjector p;
  p.kind = ProjectorKind::nuclear_ball;
  p.sigma = sigma;
  p.field_shape = std::move(shape);
  return p;
}

template <typename Real>
void SimpleProjector<Real>::validate() const {
  switch (kind) {
    case ProjectorKind::bounds: {
      if (lower.size() == 0 || upper.size() == 0) throw ParameterError("bounds need lower and upper");
      const Index n = std::max(lower.size(), upper.size());
      for (Index i = 0; i < n; ++i) {
        const Real lo = lower.size() == 1 ? lower[0] : lower[i];
        const Real hi = upper.size() == 1 ? upper[0] : upper[i];
        if (lo > hi) throw ParameterError("bounds: lower exceeds upper");
      }
      break;
    }
    case ProjectorKind::l1_ball:
    case ProjectorKind::l2_ball:
      if (sigma < Real(0)) throw ParameterError("norm-ball radius must be nonnegative");
      break;
    case ProjectorKind::annulus:
      if (sigma_lower < Real(0) || sigma_lower > sigma_upper) {
        throw ParameterError("annulus requires 0 <= sigma_l <= sigma_u");
      }
      break;
    case ProjectorKind::cardinality:
      if (k < 0) throw ParameterError("cardinality k must be nonnegative");
      break;
    case ProjectorKind::rank:
    case ProjectorKind::nuclear_ball:
      if (field_shape.dims() != 2) throw ConfigError("rank and nuclear sets need a 2D matrix shape");
      if (mode != ApplyMode::whole) throw ConfigError("rank and nuclear sets apply to whole matrices only");
      if (kind == ProjectorKind::rank &&
          (r < 1 || r >= std::min(field_shape.counts[0], field_shape.counts[1]))) {
        throw ParameterError("rank r must satisfy 1 <= r < min(rows, cols)");
      }
      if (kind == ProjectorKind::nuclear_ball && sigma < Real(0)) {
        throw ParameterError("nuclear ball radius must be nonnegative");
      }
      break;
  }
  if (mode != ApplyMode::whole) {
    if (field_shape.dims() == 0) throw ConfigError("slice modes need a field shape");
    if (mode == ApplyMode::per_fiber && field_shape.dims() != 3) {
      throw ConfigError("fiber mode needs a 3D field");
    }
  }
}

template <typename Real>
Vec<Real> SimpleProjector<Real>::project_whole(const Vec<Real>& w) const {
  switch (kind) {
    case ProjectorKind::bounds: return project_bounds<Real>(w, lower, upper);
    case ProjectorKind::l1_ball: return project_l1_ball<Real>(w, sigma);
    case ProjectorKind::l2_ball: return project_l2_ball<Real>(w, sigma);
    case ProjectorKind::annulus: return project_annulus<Real>(w, sigma_lower, sigma_upper);
    case ProjectorKind::cardinality: return project_cardinality<Real>(w, std::min(k, w.size()));
    case ProjectorKind::rank:
      return project_rank<Real>(w, field_shape.counts[0], field_shape.counts[1], r);
    case ProjectorKind::nuclear_ball:
      return project_nuclear<Real>(w, field_shape.counts[0], field_shape.counts[1], sigma);
  }
  throw ConfigError("unknown projector kind");
}

template <typename Real>
Vec<Real> SimpleProjector<Real>::project(const Vec<Real>& w) const {
  // bounds are separable, so every mode reduces to the whole-vector clamp
  if (mode == ApplyMode::whole || kind == ProjectorKind::bounds) return project_whole(w);
  const int axis = mode == ApplyMode::per_row ? kAxisX : mode == ApplyMode::per_column ? kAxisZ : kAxisY;
  return apply_per_slice(*this, w, field_shape, axis);
}

template <typename Real>
bool SimpleProjector<Real>::contains_zero() const {
  switch (kind) {
    case ProjectorKind::bounds:
      return (lower.array() <= Real(0)).all() && (upper.array() >= Real(0)).all();
    case ProjectorKind::annulus:
      return sigma_lower == Real(0);
    default:
      return true;
  }
}

template <typename Real>
Vec<Real> apply_per_slice(const SimpleProjector<Real>& p, const Vec<Real>& w, const Shape& shape,
                          int axis) {
  if (shape.size() != w.size()) throw ShapeError("per-slice projection: shape " + shape.str() +
                                                 " does not match length " + std::to_string(w.size()));
  if (axis >= shape.dims()) throw ShapeError("per-slice projection: axis exceeds field dimensions");
  const Index len = shape.count(axis);
  const Index stride = shape.stride(axis);
  Vec<Real> out(w.size());
  Vec<Real> line(len);
  for (Index i = 0; i < w.size(); ++i) {
    if ((i / stride) % len != 0) continue;
    for (Index j = 0; j < len; ++j) line[j] = w[i + j * stride];
    const Vec<Real> proj = p.project_whole(line);
    for (Index j = 0; j < len; ++j) out[i + j * stride] = proj[j];
  }
  return out;
}

template <typename Real>
Vec<Real> project_orthogonal_composite(const Vec<Real>& w, const LinearOperator<Real>& a,
                                       const SimpleProjector<Real>& inner) {
  if (!a.is_orthogonal()) {
    throw UnsupportedOperatorError("closed-form composite projection needs an orthonormal transform");
  }
  Vec<Real> coeff = a.forward(w);
  const bool by_modulus = a.kind() == OperatorKind::dft &&
                          (inner.kind == ProjectorKind::l1_ball || inner.kind == ProjectorKind::cardinality);
  if (by_modulus) {
    const Index n = a.input_size();
    Vec<Real> mod(n);
    for (Index i = 0; i < n; ++i) mod[i] = std::hypot(coeff[i], coeff[n + i]);
    SimpleProjector<Real> flat = inner;
    flat.mode = ApplyMode::whole;
    const Vec<Real> pm = flat.project(mod);
    for (Index i = 0; i < n; ++i) {
      const Real scale = mod[i] > Real(0) ? pm[i] / mod[i] : Real(0);
      coeff[i] *= scale;
      coeff[n + i] *= scale;
    }
  } else {
    coeff = inner.project(coeff);
  }
  return a.adjoint(coeff);
}

template <typename Real>
SetProjector<Real>::SetProjector(SimpleProjector<Real> inner, OperatorPtr<Real> transform)
    : inner_(std::move(inner)), transform_(std::move(transform)) {
  if (transform_ && !transform_->is_orthogonal()) {
    throw UnsupportedOperatorError("composite projectors need an orthonormal transform");
  }
  if (transform_ && transform_->kind() == OperatorKind::dft &&
      (inner_.kind == ProjectorKind::rank || inner_.kind == ProjectorKind::nuclear_ball)) {
    throw ConfigError("rank and nuclear sets are not defined on DFT coefficients");
  }
  inner_.validate();
}

template <typename Real>
Vec<Real> SetProjector<Real>::operator()(const Vec<Real>& w) const {
  if (transform_ && !transform_->is_identity()) {
    return project_orthogonal_composite(w, *transform_, inner_);
  }
  return inner_.project(w);
}

template <typename Real>
std::string SetProjector<Real>::label() const {
  std::string s(to_string(inner_.kind));
  if (transform_ && !transform_->is_identity()) s += "(" + std::string(to_string(transform_->kind())) + ")";
  return s;
}

#define SETPROJ_INSTANTIATE(Real)                                                                 \
  template Vec<Real> project_bounds<Real>(const Vec<Real>&, const Vec<Real>&, const Vec<Real>&);  \
  template Vec<Real> project_bounds<Real>(const Vec<Real>&, Real, Real);                          \
  template Vec<Real> project_l1_ball<Real>(const Vec<Real>&, Real);                               \
  template Vec<Real> project_l2_ball<Real>(const Vec<Real>&, Real);                               \
  template Vec<Real> project_annulus<Real>(const Vec<Real>&, Real, Real);                         \
  template Vec<Real> project_cardinality<Real>(const Vec<Real>&, Index);                          \
  template Vec<Real> project_rank<Real>(const Vec<Real>&, Index, Index, Index);                   \
  template Vec<Real> project_nuclear<Real>(const Vec<Real>&, Index, Index, Real);                 \
  template Vec<Real> prox_distance<Real>(const Vec<Real>&, const Vec<Real>&, Real);               \
  template struct SimpleProjector<Real>;                                                          \
  template Vec<Real> apply_per_slice<Real>(const SimpleProjector<Real>&, const Vec<Real>&,        \
                                           const Shape&, int);                                    \
  template Vec<Real> project_orthogonal_composite<Real>(const Vec<Real>&,                         \
                                                        const LinearOperator<Real>&,              \
                                                        const SimpleProjector<Real>&);            \
  template class SetProjector<Real>;

SETPROJ_INSTANTIATE(float)
SETPROJ_INSTANTIATE(double)

}  // namespace setproj
