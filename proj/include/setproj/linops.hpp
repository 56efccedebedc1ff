#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "setproj/grid.hpp"
#include "setproj/parallel.hpp"
#include "setproj/types.hpp"

namespace setproj {

enum class OperatorKind { identity, deriv_z, deriv_x, deriv_y, tv_stack, dct, dft, haar, custom_banded };

std::string_view to_string(OperatorKind kind);
/// Accepts the operator names ("deriv_z", ...) and the config spellings ("D_z", "TV", "DCT", "wavelet", ...).
OperatorKind parse_operator_kind(std::string_view name);

/// A contiguous slice of an operator's output that lives on a grid of its own.
struct FieldBlock {
  Index offset = 0;
  Shape shape;
};

/// Linear map A: R^N -> R^M with its adjoint.
///
/// Materialized kinds keep a sparse matrix. The orthonormal transforms (dct, dft,
/// haar) are matrix-free; dft returns [Re; Im] stacked, so M = 2N and A^T A = I.
template <typename Real>
class LinearOperator {
 public:
  LinearOperator(OperatorKind kind, SparseMatrix<Real> matrix, std::vector<FieldBlock> blocks);
  LinearOperator(OperatorKind kind, Shape shape);

  OperatorKind kind() const { return kind_; }
  Index input_size() const { return in_; }
  Index output_size() const { return out_; }
  bool matrix_free() const { return matrix_free_; }
  bool is_identity() const { return kind_ == OperatorKind::identity; }
  /// True for the transforms with A^T A = I whose projections are closed form.
  bool is_orthogonal() const;

  /// Output geometry; empty when the output has no grid interpretation.
  const std::vector<FieldBlock>& blocks() const { return blocks_; }
  /// Input shape for matrix-free transforms.
  const Shape& input_shape() const { return shape_; }

  /// Throws UnsupportedOperatorError for matrix-free kinds.
  const SparseMatrix<Real>& matrix() const;

  void forward(const Vec<Real>& v, Vec<Real>& out, WorkerPool* pool = nullptr) const;
  void adjoint(const Vec<Real>& w, Vec<Real>& out, WorkerPool* pool = nullptr) const;
  Vec<Real> forward(const Vec<Real>& v) const;
  Vec<Real> adjoint(const Vec<Real>& w) const;

 private:
  OperatorKind kind_;
  Index in_ = 0;
  Index out_ = 0;
  bool matrix_free_ = false;
  SparseMatrix<Real> matrix_;
  SparseMatrix<Real> matrix_t_;
  std::vector<FieldBlock> blocks_;
  Shape shape_;
};

template <typename Real>
using OperatorPtr = std::shared_ptr<const LinearOperator<Real>>;

/// Forward difference (1/h)(x[i+1] - x[i]) along one axis of a field.
template <typename Real>
SparseMatrix<Real> difference_matrix(const Shape& shape, int axis, double h);

/// Throws ConfigError when the kind is unsupported for the grid (deriv_y in 2D, custom_banded).
template <typename Real>
OperatorPtr<Real> build_operator(OperatorKind kind, const CompGrid& grid);

/// Wraps a user matrix as a custom_banded operator.
template <typename Real>
OperatorPtr<Real> make_custom_operator(SparseMatrix<Real> matrix, std::vector<FieldBlock> blocks = {});

/// A^T A with exact zeros pruned. Throws UnsupportedOperatorError for matrix-free kinds.
template <typename Real>
SparseMatrix<Real> gram(const LinearOperator<Real>& op);

}  // namespace setproj
