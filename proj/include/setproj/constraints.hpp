#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "setproj/parsdmm.hpp"

namespace setproj {

/// Declarative description of one constraint set {x : A x in C}.
struct SetDefinition {
  std::string set_type;         ///< bounds, l1, l2, annulus, nuclear, cardinality, rank
  std::string td_op = "identity";  ///< identity, D_z, D_x, D_y, TV, DCT, DFT, wavelet, custom
  std::vector<double> min;      ///< bounds; one value or one per transform-domain entry
  std::vector<double> max;
  double sigma = 0;
  double sigma_l = 0;
  double sigma_u = 0;
  Index k = 0;
  Index r = 0;
  std::string app_mode = "matrix";  ///< matrix, slice:rows, slice:cols, slice:fibers
  OperatorPtr<double> custom_op;    ///< required when td_op is custom
  std::string custom_op_file;       ///< Matrix Market source of custom_op, if any
  std::string provenance = "user";

  bool operator==(const SetDefinition& o) const;
};

struct SetProperties {
  std::string label;
  OperatorKind op_kind = OperatorKind::identity;
  ProjectorKind set_kind = ProjectorKind::bounds;
  bool composite = false;  ///< orthonormal transform folded into the projector
  bool banded_gram = true;
  std::vector<Index> band_offsets;
  std::string provenance;
};

template <typename Real>
struct ConstraintBundle {
  std::vector<ConstraintPair<Real>> pairs;
  std::vector<SetProperties> props;
};

ApplyMode parse_apply_mode(const std::string& mode);

/// One (operator, projector) pair per definition. Orthonormal transforms become
/// (identity, composite projector). Errors name the offending definition index.
template <typename Real>
ConstraintBundle<Real> setup_constraints(const std::vector<SetDefinition>& defs, const CompGrid& grid,
                                         std::size_t band_budget = kDefaultBandBudget);

/// Statistic families observable from exemplar images.
enum class Family { bounds, nuclear, tnv, tv, annulus, grad_annulus, dft_l1, slope, wavelet_l1 };

std::string_view to_string(Family f);
Family parse_family(std::string_view name);
std::vector<Family> all_families();

/// Observes each family's parameters on every image and aggregates them: the maximum for
/// upper limits, the minimum for lower limits, widened by `slack` times the magnitude.
std::vector<SetDefinition> learn_constraints(const std::vector<Vec<double>>& images, const CompGrid& grid,
                                             const std::vector<Family>& families, double slack = 0.0);

/// {x : l + d_obs <= F x <= u + d_obs}. `l` and `u` have length 1 or d_obs.size().
SetDefinition data_constraint(OperatorPtr<double> f, const Vec<double>& d_obs, const Vec<double>& l,
                              const Vec<double>& u);

nlohmann::json to_json(const SetDefinition& def);
/// Relative custom_op paths resolve against `base_dir`.
SetDefinition definition_from_json(const nlohmann::json& j, const std::string& base_dir = "");
nlohmann::json definitions_to_json(const std::vector<SetDefinition>& defs);
std::vector<SetDefinition> definitions_from_json(const nlohmann::json& j, const std::string& base_dir = "");

}  // namespace setproj
