#include "setproj/linops.hpp"

#include <cmath>
#include <complex>

#include "setproj/banded.hpp"
#include "setproj/errors.hpp"
#include "setproj/transforms.hpp"

namespace setproj {

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::identity: return "identity";
    case OperatorKind::deriv_z: return "deriv_z";
    case OperatorKind::deriv_x: return "deriv_x";
    case OperatorKind::deriv_y: return "deriv_y";
    case OperatorKind::tv_stack: return "tv_stack";
    case OperatorKind::dct: return "dct";
    case OperatorKind::dft: return "dft";
    case OperatorKind::haar: return "haar";
    case OperatorKind::custom_banded: return "custom_banded";
  }
  return "unknown";
}

OperatorKind parse_operator_kind(std::string_view name) {
  if (name == "identity" || name == "I") return OperatorKind::identity;
  if (name == "deriv_z" || name == "D_z" || name == "D_Z") return OperatorKind::deriv_z;
  if (name == "deriv_x" || name == "D_x" || name == "D_X") return OperatorKind::deriv_x;
  if (name == "deriv_y" || name == "D_y" || name == "D_Y") return OperatorKind::deriv_y;
  if (name == "tv_stack" || name == "TV") return OperatorKind::tv_stack;
  if (name == "dct" || name == "DCT") return OperatorKind::dct;
  if (name == "dft" || name == "DFT") return OperatorKind::dft;
  if (name == "haar" || name == "wavelet") return OperatorKind::haar;
  if (name == "custom_banded" || name == "custom") return OperatorKind::custom_banded;
  throw ConfigError("unknown operator kind '" + std::string(name) + "'");
}

template <typename Real>
LinearOperator<Real>::LinearOperator(OperatorKind kind, SparseMatrix<Real> matrix,
                                     std::vector<FieldBlock> blocks)
    : kind_(kind),
      in_(matrix.cols()),
      out_(matrix.rows()),
      matrix_(std::move(matrix)),
      blocks_(std::move(blocks)) {
  matrix_.makeCompressed();
  matrix_t_ = SparseMatrix<Real>(matrix_.transpose());
  matrix_t_.makeCompressed();
  Index covered = 0;
  for (const auto& b : blocks_) covered = std::max(covered, b.offset + b.shape.size());
  if (covered > out_) throw ShapeError("operator field blocks exceed the output length");
}

template <typename Real>
LinearOperator<Real>::LinearOperator(OperatorKind kind, Shape shape)
    : kind_(kind), in_(shape.size()), matrix_free_(true), shape_(std::move(shape)) {
  if (kind != OperatorKind::dct && kind != OperatorKind::dft && kind != OperatorKind::haar) {
    throw ConfigError("only dct, dft and haar are matrix-free");
  }
  out_ = kind == OperatorKind::dft ? 2 * in_ : in_;
  blocks_.push_back({0, shape_});
  if (kind == OperatorKind::dft) blocks_.push_back({in_, shape_});
}

template <typename Real>
bool LinearOperator<Real>::is_orthogonal() const {
  return kind_ == OperatorKind::identity || matrix_free_;
}

template <typename Real>
const SparseMatrix<Real>& LinearOperator<Real>::matrix() const {
  if (matrix_free_) {
    throw UnsupportedOperatorError(std::string(to_string(kind_)) + " is matrix-free");
  }
  return matrix_;
}

template <typename Real>
void LinearOperator<Real>::forward(const Vec<Real>& v, Vec<Real>& out, WorkerPool* pool) const {
  if (v.size() != in_) {
    throw ShapeError(std::string(to_string(kind_)) + " forward: expected length " +
                     std::to_string(in_) + ", got " + std::to_string(v.size()));
  }
  if (kind_ == OperatorKind::identity) {
    out = v;
    return;
  }
  if (!matrix_free_) {
    sparse_multiply(matrix_, v, out, pool);
    return;
  }
  if (kind_ == OperatorKind::dft) {
    std::vector<std::complex<Real>> c(v.data(), v.data() + in_);
    dft_inplace(c, shape_, false);
    out.resize(out_);
    for (Index i = 0; i < in_; ++i) {
      out[i] = c[i].real();
      out[in_ + i] = c[i].imag();
    }
    return;
  }
  std::vector<Real> buf(v.data(), v.data() + in_);
  if (kind_ == OperatorKind::dct) {
    dct_inplace(buf, shape_, false);
  } else {
    haar_inplace(buf, shape_, false);
  }
  out = Eigen::Map<const Vec<Real>>(buf.data(), in_);
}

template <typename Real>
void LinearOperator<Real>::adjoint(const Vec<Real>& w, Vec<Real>& out, WorkerPool* pool) const {
  if (w.size() != out_) {
    throw ShapeError(std::string(to_string(kind_)) + " adjoint: expected length " +
                     std::to_string(out_) + ", got " + std::to_string(w.size()));
  }
  if (kind_ == OperatorKind::identity) {
    out = w;
    return;
  }
  if (!matrix_free_) {
    sparse_multiply(matrix_t_, w, out, pool);
    return;
  }
  if (kind_ == OperatorKind::dft) {
    std::vector<std::complex<Real>> c(static_cast<std::size_t>(in_));
    for (Index i = 0; i < in_; ++i) c[i] = {w[i], w[in_ + i]};
    dft_inplace(c, shape_, true);
    out.resize(in_);
    for (Index i = 0; i < in_; ++i) out[i] = c[i].real();
    return;
  }
  std::vector<Real> buf(w.data(), w.data() + out_);
  if (kind_ == OperatorKind::dct) {
    dct_inplace(buf, shape_, true);
  } else {
    haar_inplace(buf, shape_, true);
  }
  out = Eigen::Map<const Vec<Real>>(buf.data(), in_);
}

template <typename Real>
Vec<Real> LinearOperator<Real>::forward(const Vec<Real>& v) const {
  Vec<Real> out;
  forward(v, out);
  return out;
}

template <typename Real>
Vec<Real> LinearOperator<Real>::adjoint(const Vec<Real>& w) const {
  Vec<Real> out;
  adjoint(w, out);
  return out;
}

template <typename Real>
SparseMatrix<Real> difference_matrix(const Shape& shape, int axis, double h) {
  if (axis >= shape.dims()) throw ConfigError("derivative axis exceeds field dimensions");
  const Shape out_shape = shape.shrunk(axis);
  const Index stride = shape.stride(axis);
  const Real inv_h = static_cast<Real>(1.0 / h);
  std::vector<Triplet<Real>> trips;
  trips.reserve(static_cast<std::size_t>(2 * out_shape.size()));
  for (Index iy = 0; iy < out_shape.count(kAxisY); ++iy) {
    for (Index iz = 0; iz < out_shape.count(kAxisZ); ++iz) {
      for (Index ix = 0; ix < out_shape.count(kAxisX); ++ix) {
        const auto row = static_cast<int>(out_shape.index(iz, ix, iy));
        const Index col = shape.index(iz, ix, iy);
        trips.emplace_back(row, static_cast<int>(col), -inv_h);
        trips.emplace_back(row, static_cast<int>(col + stride), inv_h);
      }
    }
  }
  SparseMatrix<Real> d(out_shape.size(), shape.size());
  d.setFromTriplets(trips.begin(), trips.end());
  return d;
}

namespace {

int derivative_axis(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::deriv_z: return kAxisZ;
    case OperatorKind::deriv_x: return kAxisX;
    default: return kAxisY;
  }
}

template <typename Real>
SparseMatrix<Real> vstack(const std::vector<SparseMatrix<Real>>& parts) {
  Index rows = 0;
  std::vector<Triplet<Real>> trips;
  for (const auto& p : parts) {
    for (Index r = 0; r < p.outerSize(); ++r) {
      for (typename SparseMatrix<Real>::InnerIterator it(p, r); it; ++it) {
        trips.emplace_back(static_cast<int>(rows + r), it.col(), it.value());
      }
    }
    rows += p.rows();
  }
  SparseMatrix<Real> out(rows, parts.front().cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

template <typename Real>
OperatorPtr<Real> build_operator(OperatorKind kind, const CompGrid& grid) {
  const Shape shape = grid.shape();
  switch (kind) {
    case OperatorKind::identity: {
      SparseMatrix<Real> eye(grid.size(), grid.size());
      eye.setIdentity();
      return std::make_shared<LinearOperator<Real>>(kind, std::move(eye),
                                                    std::vector<FieldBlock>{{0, shape}});
    }
    case OperatorKind::deriv_z:
    case OperatorKind::deriv_x:
    case OperatorKind::deriv_y: {
      const int axis = derivative_axis(kind);
      if (axis >= grid.dims()) {
        throw ConfigError(std::string(to_string(kind)) + " requires a 3D grid");
      }
      return std::make_shared<LinearOperator<Real>>(
          kind, difference_matrix<Real>(shape, axis, grid.h(axis)),
          std::vector<FieldBlock>{{0, shape.shrunk(axis)}});
    }
    case OperatorKind::tv_stack: {
      std::vector<SparseMatrix<Real>> parts;
      std::vector<FieldBlock> blocks;
      Index offset = 0;
      for (int axis = 0; axis < grid.dims(); ++axis) {
        parts.push_back(difference_matrix<Real>(shape, axis, grid.h(axis)));
        blocks.push_back({offset, shape.shrunk(axis)});
        offset += parts.back().rows();
      }
      return std::make_shared<LinearOperator<Real>>(kind, vstack(parts), std::move(blocks));
    }
    case OperatorKind::dct:
    case OperatorKind::dft:
    case OperatorKind::haar:
      return std::make_shared<LinearOperator<Real>>(kind, shape);
    case OperatorKind::custom_banded:
      break;
  }
  throw ConfigError("custom_banded operators must be supplied as a matrix");
}

template <typename Real>
OperatorPtr<Real> make_custom_operator(SparseMatrix<Real> matrix, std::vector<FieldBlock> blocks) {
  return std::make_shared<LinearOperator<Real>>(OperatorKind::custom_banded, std::move(matrix),
                                                std::move(blocks));
}

template <typename Real>
SparseMatrix<Real> gram(const LinearOperator<Real>& op) {
  if (op.matrix_free()) {
    throw UnsupportedOperatorError("Gram of matrix-free " + std::string(to_string(op.kind())) +
                                   " is not formed; use the orthogonal-composite projector");
  }
  const SparseMatrix<Real>& a = op.matrix();
  SparseMatrix<Real> g = SparseMatrix<Real>(a.transpose()) * a;
  g.prune(Real(0), Real(0));
  g.makeCompressed();
  return g;
}

#define SETPROJ_INSTANTIATE(Real)                                                            \
  template class LinearOperator<Real>;                                                       \
  template SparseMatrix<Real> difference_matrix<Real>(const Shape&, int, double);            \
  template OperatorPtr<Real> build_operator<Real>(OperatorKind, const CompGrid&);            \
  template OperatorPtr<Real> make_custom_operator<Real>(SparseMatrix<Real>, std::vector<FieldBlock>); \
  template SparseMatrix<Real> gram<Real>(const LinearOperator<Real>&);

SETPROJ_INSTANTIATE(float)
SETPROJ_INSTANTIATE(double)

}  // namespace setproj
