#pragma once

#include <iosfwd>
#include <string>

#include "setproj/types.hpp"

namespace setproj {

/// Matrix Market "coordinate real general" text.
void write_matrix_market(std::ostream& os, const SparseMatrix<double>& a);
void write_matrix_market(const std::string& path, const SparseMatrix<double>& a);

/// Accepts coordinate real/integer matrices, general or symmetric. Throws ConfigError on malformed input.
SparseMatrix<double> read_matrix_market(std::istream& is);
SparseMatrix<double> read_matrix_market(const std::string& path);

}  // namespace setproj
