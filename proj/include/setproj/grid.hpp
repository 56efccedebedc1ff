#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace setproj {

using Index = std::ptrdiff_t;

/// Axis identifiers. Counts and spacings are always listed in this order.
enum Axis : int { kAxisZ = 0, kAxisX = 1, kAxisY = 2 };

/// Logical shape of a gridded field (2D or 3D), listed as (n_z, n_x[, n_y]).
///
/// Vectorization: x varies fastest, then z, then y, so a 2D field M is stored
/// as m[i_z * n_x + i_x] and every y-slice of a 3D field is a 2D field in the
/// same layout.
struct Shape {
  std::vector<Index> counts;

  Shape() = default;
  explicit Shape(std::vector<Index> c);

  int dims() const { return static_cast<int>(counts.size()); }
  Index size() const;
  Index count(int axis) const { return axis < dims() ? counts[axis] : 1; }
  Index stride(int axis) const;
  Index index(Index iz, Index ix, Index iy = 0) const;

  /// Copy with the extent along `axis` reduced by `by` (forward-difference output).
  Shape shrunk(int axis, Index by = 1) const;

  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Regular-grid geometry: cell spacing and cell count per axis.
struct CompGrid {
  std::vector<double> spacing;
  std::vector<Index> counts;

  CompGrid() = default;
  /// Throws ConfigError unless dims is 2 or 3, spacings are positive and counts >= 2.
  CompGrid(std::vector<double> spacing, std::vector<Index> counts);

  int dims() const { return static_cast<int>(counts.size()); }
  Index size() const;
  Shape shape() const { return Shape(counts); }
  double h(int axis) const { return spacing.at(axis); }

  bool operator==(const CompGrid&) const = default;
};

}  // namespace setproj
