#include "setproj/grid.hpp"

#include <sstream>

#include "setproj/errors.hpp"

namespace setproj {

Shape::Shape(std::vector<Index> c) : counts(std::move(c)) {
  if (counts.size() < 2 || counts.size() > 3) {
    throw ShapeError("field shape must have 2 or 3 axes");
  }
  for (Index n : counts) {
    if (n < 1) throw ShapeError("field shape has an empty axis");
  }
}

Index Shape::size() const {
  Index n = 1;
  for (Index c : counts) n *= c;
  return counts.empty() ? 0 : n;
}

Index Shape::stride(int axis) const {
  switch (axis) {
    case kAxisX:
      return 1;
    case kAxisZ:
      return count(kAxisX);
    case kAxisY:
      return count(kAxisZ) * count(kAxisX);
    default:
      throw ShapeError("invalid axis");
  }
}

Index Shape::index(Index iz, Index ix, Index iy) const {
  return (iy * count(kAxisZ) + iz) * count(kAxisX) + ix;
}

Shape Shape::shrunk(int axis, Index by) const {
  Shape s = *this;
  if (axis >= dims() || s.counts[axis] - by < 1) {
    throw ShapeError("cannot shrink axis " + std::to_string(axis) + " of " + str());
  }
  s.counts[axis] -= by;
  return s;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < counts.size(); ++i) os << (i ? "x" : "") << counts[i];
  os << ")";
  return os.str();
}

CompGrid::CompGrid(std::vector<double> spacing_, std::vector<Index> counts_)
    : spacing(std::move(spacing_)), counts(std::move(counts_)) {
  if (counts.size() < 2 || counts.size() > 3) {
    throw ConfigError("grid must be 2D or 3D");
  }
  if (spacing.size() != counts.size()) {
    throw ConfigError("grid spacing and counts differ in length");
  }
  for (double h : spacing) {
    if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
  }
  for (Index n : counts) {
    if (n < 2) throw ConfigError("grid counts must be at least 2 per axis");
  }
}

Index CompGrid::size() const {
  Index n = 1;
  for (Index c : counts) n *= c;
  return n;
}

}  // namespace setproj
