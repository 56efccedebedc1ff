#pragma once

#include <optional>
#include <vector>

#include "setproj/banded.hpp"

namespace setproj {

/// Diagonal-offset budget above which the system matrix falls back to general sparse storage.
inline constexpr std::size_t kDefaultBandBudget = 27;

/// C = sum_i rho_i B_i over precomputed Gram matrices B_i = A_i^T A_i.
///
/// The last Gram is expected to be the identity block of the distance term, which
/// keeps C positive definite for positive rho. Stored in CDS when the union of the
/// Grams' diagonals fits the band budget, otherwise in general sparse storage.
template <typename Real>
class SystemMatrix {
 public:
  SystemMatrix() = default;

  /// Throws ParameterError for nonpositive rho, ShapeError for inconsistent Grams.
  static SystemMatrix assemble(std::vector<SparseMatrix<Real>> grams, std::vector<Real> rho,
                               std::size_t band_budget = kDefaultBandBudget);

  /// Rank update C <- C + B_u (rho_new - rho_old); records rho_new as the current rho_u.
  void update(std::size_t u, Real rho_new, Real rho_old);

  void multiply(const Vec<Real>& v, Vec<Real>& out, WorkerPool* pool = nullptr) const;
  Vec<Real> multiply(const Vec<Real>& v) const;

  Index size() const { return n_; }
  bool is_banded() const { return banded_.has_value(); }
  const std::vector<Real>& rho() const { return rho_; }
  const std::vector<SparseMatrix<Real>>& grams() const { return grams_; }
  const std::vector<Index>& band_offsets() const { return offsets_; }

  /// Current matrix in general sparse form, regardless of storage.
  SparseMatrix<Real> to_sparse() const;

 private:
  Index n_ = 0;
  std::vector<SparseMatrix<Real>> grams_;
  std::vector<Real> rho_;
  std::vector<Index> offsets_;
  std::optional<BandedMatrix<Real>> banded_;
  std::vector<BandedMatrix<Real>> banded_grams_;
  SparseMatrix<Real> sparse_;
};

/// ||a - b||_F / ||b||_F for two system matrices (b the reference).
template <typename Real>
double relative_frobenius_gap(const SystemMatrix<Real>& a, const SystemMatrix<Real>& b);

}  // namespace setproj
