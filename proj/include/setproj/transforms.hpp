#pragma once

#include <complex>
#include <vector>

#include "setproj/grid.hpp"

namespace setproj {

// Separable orthonormal transforms on gridded fields, applied along every axis.
// All of them satisfy A^T A = I on real inputs.

/// Orthonormal DCT-II (forward) or its transpose DCT-III (inverse), in place.
template <typename Real>
void dct_inplace(std::vector<Real>& data, const Shape& shape, bool inverse);

/// Unitary DFT (1/sqrt(n) per axis), in place on complex data.
template <typename Real>
void dft_inplace(std::vector<std::complex<Real>>& data, const Shape& shape, bool inverse);

/// Full-depth orthonormal Haar decomposition along each axis, in place. Odd-length
/// levels carry their last sample to the next level unchanged.
template <typename Real>
void haar_inplace(std::vector<Real>& data, const Shape& shape, bool inverse);

}  // namespace setproj
