#include "setproj/system_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "setproj/errors.hpp"

namespace setproj {

template <typename Real>
SystemMatrix<Real> SystemMatrix<Real>::assemble(std::vector<SparseMatrix<Real>> grams,
                                                std::vector<Real> rho, std::size_t band_budget) {
  if (grams.empty()) throw ShapeError("system matrix needs at least one Gram block");
  if (grams.size() != rho.size()) throw ShapeError("one rho per Gram block is required");
  SystemMatrix c;
  c.n_ = grams.front().rows();
  for (std::size_t i = 0; i < grams.size(); ++i) {
    if (!(rho[i] > Real(0))) {
      throw ParameterError("rho[" + std::to_string(i) + "] must be positive");
    }
    if (grams[i].rows() != c.n_ || grams[i].cols() != c.n_) {
      throw ShapeError("Gram block " + std::to_string(i) + " has the wrong order");
    }
  }
  std::set<Index> offs;
  for (const auto& g : grams) {
    for (Index o : diagonal_offsets(g)) offs.insert(o);
  }
  c.offsets_.assign(offs.begin(), offs.end());
  c.grams_ = std::move(grams);
  c.rho_ = std::move(rho);

  if (c.offsets_.size() <= band_budget) {
    BandedMatrix<Real> total(c.n_, c.offsets_);
    for (std::size_t i = 0; i < c.grams_.size(); ++i) {
      c.banded_grams_.push_back(BandedMatrix<Real>::from_sparse(c.grams_[i], c.offsets_));
      total.add_scaled(c.banded_grams_.back(), c.rho_[i]);
    }
    c.banded_ = std::move(total);
  } else {
    SparseMatrix<Real> total(c.n_, c.n_);
    for (std::size_t i = 0; i < c.grams_.size(); ++i) {
      total = SparseMatrix<Real>(total + c.rho_[i] * c.grams_[i]);
    }
    c.sparse_ = std::move(total);
  }
  return c;
}

template <typename Real>
void SystemMatrix<Real>::update(std::size_t u, Real rho_new, Real rho_old) {
  if (u >= grams_.size()) throw ParameterError("unknown Gram index " + std::to_string(u));
  if (!(rho_new > Real(0))) throw ParameterError("rho must stay positive");
  const Real delta = rho_new - rho_old;
  if (delta != Real(0)) {
    if (banded_) {
      banded_->add_scaled(banded_grams_[u], delta);
    } else {
      sparse_ = SparseMatrix<Real>(sparse_ + delta * grams_[u]);
    }
  }
  rho_[u] = rho_new;
}

template <typename Real>
void SystemMatrix<Real>::multiply(const Vec<Real>& v, Vec<Real>& out, WorkerPool* pool) const {
  if (banded_) {
    banded_->multiply(v, out, pool);
  } else {
    sparse_multiply(sparse_, v, out, pool);
  }
}

template <typename Real>
Vec<Real> SystemMatrix<Real>::multiply(const Vec<Real>& v) const {
  Vec<Real> out;
  multiply(v, out);
  return out;
}

template <typename Real>
SparseMatrix<Real> SystemMatrix<Real>::to_sparse() const {
  return banded_ ? banded_->to_sparse() : sparse_;
}

template <typename Real>
double relative_frobenius_gap(const SystemMatrix<Real>& a, const SystemMatrix<Real>& b) {
  const SparseMatrix<Real> sa = a.to_sparse();
  const SparseMatrix<Real> sb = b.to_sparse();
  const SparseMatrix<Real> diff = sa - sb;
  const double ref = static_cast<double>(sb.norm());
  const double gap = static_cast<double>(diff.norm());
  return ref > 0 ? gap / ref : gap;
}

template class SystemMatrix<float>;
template class SystemMatrix<double>;
template double relative_frobenius_gap(const SystemMatrix<float>&, const SystemMatrix<float>&);
template double relative_frobenius_gap(const SystemMatrix<double>&, const SystemMatrix<double>&);

}  // namespace setproj
