#pragma once

#include <vector>

#include "setproj/parallel.hpp"
#include "setproj/types.hpp"

namespace setproj {

/// Square matrix in compressed diagonal storage (CDS).
///
/// Column b of the store holds diagonal offsets()[b]: store(i, b) = A(i, i + offset).
/// Entries whose column falls outside [0, n) are kept at zero.
template <typename Real>
class BandedMatrix {
 public:
  BandedMatrix() = default;
  BandedMatrix(Index n, std::vector<Index> offsets);

  /// Offsets are the sorted set of diagonals holding a nonzero entry.
  static BandedMatrix from_sparse(const SparseMatrix<Real>& a);
  /// Uses the given offset layout; throws ShapeError if `a` has an entry off those diagonals.
  static BandedMatrix from_sparse(const SparseMatrix<Real>& a, const std::vector<Index>& offsets);

  /// Nonzero entries only; explicit zeros in the bands are not emitted.
  SparseMatrix<Real> to_sparse() const;

  Index order() const { return n_; }
  const std::vector<Index>& offsets() const { return offsets_; }
  const DenseMatrix<Real>& store() const { return store_; }
  DenseMatrix<Real>& store() { return store_; }

  /// this += alpha * other; `other` must share the offset layout.
  void add_scaled(const BandedMatrix& other, Real alpha);

  void multiply(const Vec<Real>& v, Vec<Real>& out, WorkerPool* pool = nullptr) const;

 private:
  Index n_ = 0;
  std::vector<Index> offsets_;
  DenseMatrix<Real> store_;
};

/// Sorted distinct diagonal offsets (col - row) that hold nonzeros.
template <typename Real>
std::vector<Index> diagonal_offsets(const SparseMatrix<Real>& a);

/// Row-partitioned product with general sparse storage.
template <typename Real>
void sparse_multiply(const SparseMatrix<Real>& a, const Vec<Real>& v, Vec<Real>& out,
                     WorkerPool* pool = nullptr);

}  // namespace setproj
