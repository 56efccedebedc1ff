#pragma once

#include <string>

#include "setproj/types.hpp"

namespace setproj {

/// Grayscale image, row-major, stored as a field of shape (height, width).
struct ImageBuffer {
  Index width = 0;
  Index height = 0;
  Vec<double> pixels;

  CompGrid grid() const { return CompGrid({1.0, 1.0}, {height, width}); }
  /// Throws ShapeError on a size mismatch and ConfigError on non-finite values.
  void validate() const;
};

/// 8-bit binary PGM (P5). Comments in the header are skipped.
ImageBuffer read_pgm(const std::string& path);
/// Pixels are rounded and clamped to [0, 255].
void write_pgm(const std::string& path, const ImageBuffer& img);

/// Comma-separated grid, one line per image row.
ImageBuffer read_csv_grid(const std::string& path);
/// Values are written with 17 significant digits.
void write_csv_grid(const std::string& path, const ImageBuffer& img);

/// Dispatches on the extension: .pgm or .csv.
ImageBuffer read_image(const std::string& path);
void write_image(const std::string& path, const ImageBuffer& img);

/// 10 log10(peak^2 / mse). Infinite for identical inputs.
double psnr(const Vec<double>& estimate, const Vec<double>& reference, double peak = 255.0);

}  // namespace setproj
