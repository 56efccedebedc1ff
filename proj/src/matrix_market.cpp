#include "setproj/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "setproj/errors.hpp"

namespace setproj {

void write_matrix_market(std::ostream& os, const SparseMatrix<double>& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  os << std::setprecision(17);
  for (Index row = 0; row < a.outerSize(); ++row) {
    for (SparseMatrix<double>::InnerIterator it(a, row); it; ++it) {
      os << (row + 1) << " " << (it.col() + 1) << " " << it.value() << "\n";
    }
  }
}

void write_matrix_market(const std::string& path, const SparseMatrix<double>& a) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  write_matrix_market(os, a);
}

SparseMatrix<double> read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty Matrix Market stream");
  std::string lower = line;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.rfind("%%matrixmarket", 0) != 0 || lower.find("coordinate") == std::string::npos) {
    throw ConfigError("only Matrix Market coordinate format is supported");
  }
  if (lower.find("complex") != std::string::npos || lower.find("pattern") != std::string::npos) {
    throw ConfigError("Matrix Market field must be real or integer");
  }
  const bool symmetric = lower.find("symmetric") != std::string::npos;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream header(line);
  Index rows = 0, cols = 0, nnz = 0;
  if (!(header >> rows >> cols >> nnz) || rows <= 0 || cols <= 0 || nnz < 0) {
    throw ConfigError("malformed Matrix Market size line");
  }
  std::vector<Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  for (Index e = 0; e < nnz; ++e) {
    Index r = 0, c = 0;
    double v = 0;
    if (!(is >> r >> c >> v) || r < 1 || r > rows || c < 1 || c > cols) {
      throw ConfigError("malformed Matrix Market entry " + std::to_string(e + 1));
    }
    trips.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), v);
    if (symmetric && r != c) trips.emplace_back(static_cast<int>(c - 1), static_cast<int>(r - 1), v);
  }
  SparseMatrix<double> a(rows, cols);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

SparseMatrix<double> read_matrix_market(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  return read_matrix_market(is);
}

}  // namespace setproj
