#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "setproj/linops.hpp"

namespace setproj {

enum class ProjectorKind { bounds, l1_ball, l2_ball, annulus, cardinality, rank, nuclear_ball };
enum class ApplyMode { whole, per_row, per_column, per_fiber };

std::string_view to_string(ProjectorKind kind);
std::string_view to_string(ApplyMode mode);

// ---- closed-form projections onto simple sets -------------------------------

/// Elementwise clamp. `lower`/`upper` have length 1 (scalar) or w.size().
template <typename Real>
Vec<Real> project_bounds(const Vec<Real>& w, const Vec<Real>& lower, const Vec<Real>& upper);
template <typename Real>
Vec<Real> project_bounds(const Vec<Real>& w, Real lower, Real upper);

/// Euclidean projection onto {x : ||x||_1 <= sigma} by the sort-and-threshold method.
template <typename Real>
Vec<Real> project_l1_ball(const Vec<Real>& w, Real sigma);

template <typename Real>
Vec<Real> project_l2_ball(const Vec<Real>& w, Real sigma);

/// Radial projection onto {sigma_l <= ||x||_2 <= sigma_u}. At w = 0 with sigma_l > 0
/// the minimizer is not unique; returns sigma_l e_1.
template <typename Real>
Vec<Real> project_annulus(const Vec<Real>& w, Real sigma_l, Real sigma_u);

/// Keeps the k largest magnitudes (ties go to the lower index), zeroes the rest.
template <typename Real>
Vec<Real> project_cardinality(const Vec<Real>& w, Index k);

/// w is a row-major rows x cols matrix; keeps the r largest singular values.
template <typename Real>
Vec<Real> project_rank(const Vec<Real>& w, Index rows, Index cols, Index r);

/// Projects the singular values onto the l1 ball of radius sigma.
template <typename Real>
Vec<Real> project_nuclear(const Vec<Real>& w, Index rows, Index cols, Real sigma);

/// argmin_z 1/2||z - m||^2 + rho/2 ||z - w||^2 = (m + rho w) / (1 + rho).
template <typename Real>
Vec<Real> prox_distance(const Vec<Real>& w, const Vec<Real>& m, Real rho);

// ---- projector descriptions ---------------------------------------------------

/// Parameters of one simple set together with how it is applied to a field.
template <typename Real>
struct SimpleProjector {
  ProjectorKind kind = ProjectorKind::bounds;
  Vec<Real> lower;  ///< bounds; length 1 or the vector length
  Vec<Real> upper;
  Real sigma = 0;        ///< l1 / l2 / nuclear radius
  Real sigma_lower = 0;  ///< annulus
  Real sigma_upper = 0;
  Index k = 0;  ///< cardinality
  Index r = 0;  ///< rank
  ApplyMode mode = ApplyMode::whole;
  Shape field_shape;  ///< required by rank, nuclear and the slice modes

  static SimpleProjector bounds(Real lo, Real hi);
  static SimpleProjector bounds(Vec<Real> lo, Vec<Real> hi);
  static SimpleProjector l1_ball(Real sigma);
  static SimpleProjector l2_ball(Real sigma);
  static SimpleProjector annulus(Real sigma_l, Real sigma_u);
  static SimpleProjector cardinality(Index k);
  static SimpleProjector rank(Index r, Shape shape);
  static SimpleProjector nuclear_ball(Real sigma, Shape shape);

  /// Throws ParameterError / ConfigError when the parameters are inconsistent.
  void validate() const;
  Vec<Real> project(const Vec<Real>& w) const;
  /// Projection of one line or of the whole vector, ignoring `mode`.
  Vec<Real> project_whole(const Vec<Real>& w) const;
  bool contains_zero() const;
};

/// Applies the whole-vector projection independently to every line of `shape` along `axis`.
template <typename Real>
Vec<Real> apply_per_slice(const SimpleProjector<Real>& p, const Vec<Real>& w, const Shape& shape,
                          int axis);

/// A^T inner(A w) for an orthonormal transform A. For dft, l1 and cardinality act on the
/// complex moduli, and only the real part of the reconstruction is kept.
template <typename Real>
Vec<Real> project_orthogonal_composite(const Vec<Real>& w, const LinearOperator<Real>& a,
                                       const SimpleProjector<Real>& inner);

/// The projector P_i of one constraint pair: a simple projector, optionally wrapped
/// around an orthonormal transform.
template <typename Real>
class SetProjector {
 public:
  SetProjector() = default;
  explicit SetProjector(SimpleProjector<Real> inner, OperatorPtr<Real> transform = nullptr);

  Vec<Real> operator()(const Vec<Real>& w) const;
  ProjectorKind kind() const { return inner_.kind; }
  const SimpleProjector<Real>& inner() const { return inner_; }
  const OperatorPtr<Real>& transform() const { return transform_; }
  bool contains_zero() const { return inner_.contains_zero(); }
  std::string label() const;

 private:
  SimpleProjector<Real> inner_;
  OperatorPtr<Real> transform_;
};

}  // namespace setproj
