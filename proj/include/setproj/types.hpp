#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "setproj/grid.hpp"

namespace setproj {

template <typename Real>
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
using DenseMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

/// General sparse storage (compressed rows, so products can be split by row).
template <typename Real>
using SparseMatrix = Eigen::SparseMatrix<Real, Eigen::RowMajor, int>;

template <typename Real>
using Triplet = Eigen::Triplet<Real, int>;

}  // namespace setproj
