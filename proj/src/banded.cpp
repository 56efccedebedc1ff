#include "setproj/banded.hpp"

#include <algorithm>
#include <set>

#include "setproj/errors.hpp"

namespace setproj {

template <typename Real>
BandedMatrix<Real>::BandedMatrix(Index n, std::vector<Index> offsets)
    : n_(n), offsets_(std::move(offsets)) {
  std::sort(offsets_.begin(), offsets_.end());
  offsets_.erase(std::unique(offsets_.begin(), offsets_.end()), offsets_.end());
  store_ = DenseMatrix<Real>::Zero(n_, static_cast<Index>(offsets_.size()));
}

template <typename Real>
std::vector<Index> diagonal_offsets(const SparseMatrix<Real>& a) {
  std::set<Index> offs;
  for (Index row = 0; row < a.outerSize(); ++row) {
    for (typename SparseMatrix<Real>::InnerIterator it(a, row); it; ++it) {
      if (it.value() != Real(0)) offs.insert(static_cast<Index>(it.col()) - row);
    }
  }
  return {offs.begin(), offs.end()};
}

template <typename Real>
BandedMatrix<Real> BandedMatrix<Real>::from_sparse(const SparseMatrix<Real>& a) {
  return from_sparse(a, diagonal_offsets(a));
}

template <typename Real>
BandedMatrix<Real> BandedMatrix<Real>::from_sparse(const SparseMatrix<Real>& a,
                                                   const std::vector<Index>& offsets) {
  if (a.rows() != a.cols()) throw ShapeError("CDS storage requires a square matrix");
  BandedMatrix out(a.rows(), offsets);
  for (Index row = 0; row < a.outerSize(); ++row) {
    for (typename SparseMatrix<Real>::InnerIterator it(a, row); it; ++it) {
      if (it.value() == Real(0)) continue;
      const Index off = static_cast<Index>(it.col()) - row;
      auto pos = std::lower_bound(out.offsets_.begin(), out.offsets_.end(), off);
      if (pos == out.offsets_.end() || *pos != off) {
        throw ShapeError("sparse entry lies outside the CDS band layout");
      }
      out.store_(row, pos - out.offsets_.begin()) = it.value();
    }
  }
  return out;
}

template <typename Real>
SparseMatrix<Real> BandedMatrix<Real>::to_sparse() const {
  std::vector<Triplet<Real>> trips;
  for (std::size_t b = 0; b < offsets_.size(); ++b) {
    const Index off = offsets_[b];
    for (Index i = std::max<Index>(0, -off); i < std::min(n_, n_ - off); ++i) {
      const Real val = store_(i, static_cast<Index>(b));
      if (val != Real(0)) trips.emplace_back(static_cast<int>(i), static_cast<int>(i + off), val);
    }
  }
  SparseMatrix<Real> a(n_, n_);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

template <typename Real>
void BandedMatrix<Real>::add_scaled(const BandedMatrix& other, Real alpha) {
  if (other.n_ != n_ || other.offsets_ != offsets_) {
    throw ShapeError("CDS update requires an identical band layout");
  }
  store_ += alpha * other.store_;
}

template <typename Real>
void BandedMatrix<Real>::multiply(const Vec<Real>& v, Vec<Real>& out, WorkerPool* pool) const {
  if (v.size() != n_) throw ShapeError("CDS product: vector length mismatch");
  out.resize(n_);
  const auto nb = static_cast<Index>(offsets_.size());
  auto kernel = [&](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) out[i] = Real(0);
    for (Index b = 0; b < nb; ++b) {
      const Index off = offsets_[b];
      const Index lo = std::max(begin, -off);
      const Index hi = std::min(end, n_ - off);
      const Real* diag = store_.col(b).data();
      const Real* src = v.data();
      Real* dst = out.data();
      for (Index i = lo; i < hi; ++i) dst[i] += diag[i] * src[i + off];
    }
  };
  if (pool) {
    pool->parallel_for(n_, kernel);
  } else {
    kernel(0, n_);
  }
}

template <typename Real>
void sparse_multiply(const SparseMatrix<Real>& a, const Vec<Real>& v, Vec<Real>& out,
                     WorkerPool* pool) {
  if (v.size() != a.cols()) throw ShapeError("sparse product: vector length mismatch");
  out.resize(a.rows());
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  const Real* vals = a.valuePtr();
  const int* nnz = a.innerNonZeroPtr();
  auto kernel = [&](Index begin, Index end) {
    for (Index row = begin; row < end; ++row) {
      Real acc(0);
      const int start = outer[row];
      const int stop = nnz ? start + nnz[row] : outer[row + 1];
      for (int p = start; p < stop; ++p) acc += vals[p] * v[inner[p]];
      out[row] = acc;
    }
  };
  if (pool) {
    pool->parallel_for(a.rows(), kernel);
  } else {
    kernel(0, a.rows());
  }
}

template class BandedMatrix<float>;
template class BandedMatrix<double>;
template std::vector<Index> diagonal_offsets(const SparseMatrix<float>&);
template std::vector<Index> diagonal_offsets(const SparseMatrix<double>&);
template void sparse_multiply(const SparseMatrix<float>&, const Vec<float>&, Vec<float>&, WorkerPool*);
template void sparse_multiply(const SparseMatrix<double>&, const Vec<double>&, Vec<double>&, WorkerPool*);

}  // namespace setproj
