#include "setproj/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

#include "setproj/errors.hpp"

namespace setproj {

void ImageBuffer::validate() const {
  if (width < 1 || height < 1 || pixels.size() != width * height) {
    throw ShapeError("image buffer: " + std::to_string(pixels.size()) + " pixels for " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (!pixels.allFinite()) throw ConfigError("image buffer holds non-finite values");
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

std::string extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

ImageBuffer read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  if (next_token(in) != "P5") throw ConfigError(path + ": not a binary PGM (P5)");
  ImageBuffer img;
  int maxval = 0;
  try {
    img.width = std::stol(next_token(in));
    img.height = std::stol(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw ConfigError(path + ": malformed PGM header");
  }
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) {
    throw ConfigError(path + ": unsupported PGM dimensions or maxval");
  }
  in.get();
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.width * img.height));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw ConfigError(path + ": truncated PGM data");
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[static_cast<Index>(i)] = raw[i];
  return img;
}

void write_pgm(const std::string& path, const ImageBuffer& img) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.pixels.size()));
  for (Index i = 0; i < img.pixels.size(); ++i) {
    raw[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::clamp(std::lround(img.pixels[i]), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

ImageBuffer read_csv_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<double> values;
  ImageBuffer img;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    Index cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path + ": bad number '" + cell + "' on row " + std::to_string(img.height + 1));
      }
      ++cols;
    }
    if (img.height == 0) img.width = cols;
    if (cols != img.width) throw ConfigError(path + ": ragged rows");
    ++img.height;
  }
  if (values.empty()) throw ConfigError(path + ": empty grid");
  img.pixels = Eigen::Map<Vec<double>>(values.data(), static_cast<Index>(values.size()));
  img.validate();
  return img;
}

void write_csv_grid(const std::string& path, const ImageBuffer& img) {
  img.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(17);
  for (Index r = 0; r < img.height; ++r) {
    for (Index c = 0; c < img.width; ++c) {
      if (c) out << ',';
      out << img.pixels[r * img.width + c];
    }
    out << '\n';
  }
}

ImageBuffer read_image(const std::string& path) {
  const std::string ext = extension(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".csv") return read_csv_grid(path);
  throw ConfigError(path + ": unsupported image format (use .pgm or .csv)");
}

void write_image(const std::string& path, const ImageBuffer& img) {
  const std::string ext = extension(path);
  if (ext == ".pgm") return write_pgm(path, img);
  if (ext == ".csv") return write_csv_grid(path, img);
  throw ConfigError(path + ": unsupported image format (use .pgm or .csv)");
}

double psnr(const Vec<double>& estimate, const Vec<double>& reference, double peak) {
  if (estimate.size() != reference.size() || estimate.size() == 0) throw ShapeError("psnr: size mismatch");
  const double mse = (estimate - reference).squaredNorm() / static_cast<double>(estimate.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace setproj
