#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "setproj/constraints.hpp"
#include "setproj/dykstra.hpp"
#include "setproj/image_io.hpp"
#include "setproj/multilevel.hpp"
#include "setproj/spg.hpp"

namespace setproj {

// ---- operators and fixtures ---------------------------------------------------

/// Horizontal moving average of width kernel_len over the valid positions of every row of
/// `shape`, followed by keeping the rows listed in `keep` (indices into the blurred vector,
/// strictly increasing).
OperatorPtr<double> build_blur_restriction(Index kernel_len, const std::vector<Index>& keep, const Shape& shape);

/// Number of valid blurred samples for a field of `shape`.
Index blurred_size(Index kernel_len, const Shape& shape);

/// Sorted indices in [0, n) keeping round(n * (1 - missing_fraction)) entries, at least one.
std::vector<Index> random_keep(Index n, double missing_fraction, std::uint64_t seed);

/// Piecewise-smooth test images in [0, 255]. Kinds: blocks, layers, smooth.
ImageBuffer synthetic_image(const std::string& kind, Index height, Index width, std::uint64_t seed);

// ---- run configuration ----------------------------------------------------------

/// A file path, or a generated image.
struct ImageSource {
  std::string path;
  std::string synthetic;
  Index height = 0;
  Index width = 0;
  std::uint64_t seed = 1;

  bool empty() const { return path.empty() && synthetic.empty(); }
  ImageBuffer load(const std::string& base_dir) const;
};

struct LearnSpec {
  std::vector<ImageSource> images;
  std::vector<Family> families;
  double slack = 0;
};

struct RunConfig {
  std::string command;
  std::string base_dir;
  std::string mode = "parsdmm";  ///< parsdmm, ml-parsdmm, dykstra, consensus
  ImageSource input;
  std::vector<double> spacing{1.0, 1.0};
  std::vector<SetDefinition> constraints;
  std::optional<LearnSpec> learn;
  SolverOptions solver{};
  int levels = 3;
  int factor = 2;
  DykstraOptions dykstra{};
  NestedOptions nested{};
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // restore
  ImageSource truth;
  Index kernel_len = 5;
  double missing_fraction = 0.2;
  double noise_level = 0;  ///< uniform noise amplitude added to the synthetic observation
  double data_lower = 0;   ///< bounds on F x - d_obs
  double data_upper = 0;

  // desaturate
  ImageSource observed;
  double low = 60;
  double high = 125;

  // bench
  std::vector<std::string> bench_modes;
  int repetitions = 5;

  // spg
  ImageSource target;
  SpgOptions spg{};

  void validate() const;
};

/// Parses a config document. Relative paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

// ---- solver dispatch -------------------------------------------------------------

struct ModeRun {
  Vec<double> x;
  std::vector<SolverLog> logs;  ///< one per level for ml-parsdmm, original grid last
  bool converged = false;
};

/// Projects m onto the intersection of `defs` with the solver selected by cfg.mode.
ModeRun run_mode(const Vec<double>& m, const std::vector<SetDefinition>& defs, const CompGrid& grid,
                 const RunConfig& cfg);

/// Per-set transform-domain feasibility errors of x, recomputed from the definitions.
std::vector<double> verify_definitions(const Vec<double>& x, const std::vector<SetDefinition>& defs,
                                       const CompGrid& grid);

/// Definitions from the config plus the learned ones.
std::vector<SetDefinition> collect_definitions(const RunConfig& cfg, const CompGrid& grid);

/// Per-pixel desaturation bounds: equality where low < d < high, [0, low] at d <= low, [high, 255] at d >= high.
SetDefinition desaturation_bounds(const Vec<double>& d_obs, double low, double high);

// ---- commands ---------------------------------------------------------------------
// Exit status: 0 converged and re-verified, 2 finished without meeting the tolerances,
// 1 configuration or I/O error (reported on stderr).

int cmd_project(const RunConfig& cfg);
int cmd_restore(const RunConfig& cfg);
int cmd_desaturate(const RunConfig& cfg);
int cmd_bench(const RunConfig& cfg);
int cmd_spg(const RunConfig& cfg);

int run_command(const RunConfig& cfg);

}  // namespace setproj
