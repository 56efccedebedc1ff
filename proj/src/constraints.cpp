#include "setproj/constraints.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "setproj/errors.hpp"
#include "setproj/matrix_market.hpp"

namespace setproj {

bool SetDefinition::operator==(const SetDefinition& o) const {
  return set_type == o.set_type && td_op == o.td_op && min == o.min && max == o.max && sigma == o.sigma &&
         sigma_l == o.sigma_l && sigma_u == o.sigma_u && k == o.k && r == o.r && app_mode == o.app_mode &&
         custom_op == o.custom_op && custom_op_file == o.custom_op_file && provenance == o.provenance;
}

ApplyMode parse_apply_mode(const std::string& mode) {
  if (mode.empty() || mode == "matrix") return ApplyMode::whole;
  if (mode == "slice:rows" || mode == "rows") return ApplyMode::per_row;
  if (mode == "slice:cols" || mode == "slice:columns" || mode == "cols" || mode == "columns") {
    return ApplyMode::per_column;
  }
  if (mode == "slice:fibers" || mode == "fibers") return ApplyMode::per_fiber;
  throw ConfigError("unknown application mode '" + mode + "'");
}

namespace {

ProjectorKind parse_set_type(const std::string& t) {
  if (t == "bounds") return ProjectorKind::bounds;
  if (t == "l1") return ProjectorKind::l1_ball;
  if (t == "l2") return ProjectorKind::l2_ball;
  if (t == "annulus") return ProjectorKind::annulus;
  if (t == "nuclear") return ProjectorKind::nuclear_ball;
  if (t == "cardinality") return ProjectorKind::cardinality;
  if (t == "rank") return ProjectorKind::rank;
  if (t == "subspace") throw ConfigError("subspace constraints are not supported");
  throw ConfigError("unknown set_type '" + t + "'");
}

template <typename Real>
Vec<Real> to_vec(const std::vector<double>& v) {
  Vec<Real> out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = static_cast<Real>(v[i]);
  return out;
}

template <typename Real>
OperatorPtr<Real> convert_custom(const OperatorPtr<double>& op) {
  if constexpr (std::is_same_v<Real, double>) {
    return op;
  } else {
    return make_custom_operator<Real>(op->matrix().template cast<Real>(), op->blocks());
  }
}

template <typename Real>
ConstraintPair<Real> setup_one(const SetDefinition& def, const CompGrid& grid, std::size_t band_budget,
                               SetProperties& props) {
  const ProjectorKind set_kind = parse_set_type(def.set_type);
  const OperatorKind op_kind = parse_operator_kind(def.td_op);

  OperatorPtr<Real> op;
  if (op_kind == OperatorKind::custom_banded) {
    if (!def.custom_op) throw ConfigError("TD_OP custom requires a custom operator");
    if (def.custom_op->input_size() != grid.size()) {
      throw ShapeError("custom operator expects length " + std::to_string(def.custom_op->input_size()) +
                       " but the grid has " + std::to_string(grid.size()));
    }
    op = convert_custom<Real>(def.custom_op);
  } else {
    op = build_operator<Real>(op_kind, grid);
  }

  SimpleProjector<Real> inner;
  switch (set_kind) {
    case ProjectorKind::bounds: {
      if (def.min.empty() || def.max.empty()) throw ConfigError("bounds need min and max");
      const auto check_len = [&](std::size_t n) {
        if (n != 1 && static_cast<Index>(n) != op->output_size()) {
          throw ShapeError("bounds of length " + std::to_string(n) + " do not match transform-domain size " +
                           std::to_string(op->output_size()));
        }
      };
      check_len(def.min.size());
      check_len(def.max.size());
      inner = SimpleProjector<Real>::bounds(to_vec<Real>(def.min), to_vec<Real>(def.max));
      break;
    }
    case ProjectorKind::l1_ball: inner = SimpleProjector<Real>::l1_ball(static_cast<Real>(def.sigma)); break;
    case ProjectorKind::l2_ball: inner = SimpleProjector<Real>::l2_ball(static_cast<Real>(def.sigma)); break;
    case ProjectorKind::annulus:
      inner = SimpleProjector<Real>::annulus(static_cast<Real>(def.sigma_l), static_cast<Real>(def.sigma_u));
      break;
    case ProjectorKind::cardinality:
      if (def.k > op->output_size()) throw ParameterError("cardinality k exceeds the transform-domain size");
      inner = SimpleProjector<Real>::cardinality(def.k);
      break;
    case ProjectorKind::rank:
    case ProjectorKind::nuclear_ball:
      inner.kind = set_kind;
      inner.r = def.r;
      inner.sigma = static_cast<Real>(def.sigma);
      break;
  }
  inner.mode = parse_apply_mode(def.app_mode);

  const bool needs_shape = set_kind == ProjectorKind::rank || set_kind == ProjectorKind::nuclear_ball ||
                           inner.mode != ApplyMode::whole;
  if (needs_shape) {
    if (op->blocks().size() != 1) {
      throw ConfigError("TD_OP " + def.td_op + " has no single field geometry for " + def.set_type +
                        " in mode " + def.app_mode);
    }
    inner.field_shape = op->blocks().front().shape;
  }

  props.op_kind = op_kind;
  props.set_kind = set_kind;
  props.provenance = def.provenance;
  if (op->matrix_free()) {
    props.composite = true;
    props.banded_gram = true;
    props.band_offsets = {0};
    ConstraintPair<Real> pair{build_operator<Real>(OperatorKind::identity, grid), SetProjector<Real>(inner, op)};
    props.label = pair.projector.label();
    return pair;
  }
  props.band_offsets = diagonal_offsets(gram(*op));
  props.banded_gram = props.band_offsets.size() <= band_budget;
  ConstraintPair<Real> pair{op, SetProjector<Real>(inner)};
  props.label = std::string(pair.projector.label()) + "(" + std::string(to_string(op_kind)) + ")";
  return pair;
}

}  // namespace

template <typename Real>
ConstraintBundle<Real> setup_constraints(const std::vector<SetDefinition>& defs, const CompGrid& grid,
                                         std::size_t band_budget) {
  if (defs.empty()) throw ConfigError("at least one set definition is required");
  ConstraintBundle<Real> bundle;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    SetProperties props;
    try {
      bundle.pairs.push_back(setup_one<Real>(defs[i], grid, band_budget, props));
    } catch (const Error& e) {
      throw ConfigError("set definition " + std::to_string(i) + " (" + defs[i].set_type + ", " +
                        defs[i].td_op + "): " + e.what());
    }
    bundle.props.push_back(std::move(props));
  }
  return bundle;
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::bounds: return "bounds";
    case Family::nuclear: return "nuclear";
    case Family::tnv: return "tnv";
    case Family::tv: return "tv";
    case Family::annulus: return "annulus";
    case Family::grad_annulus: return "grad_annulus";
    case Family::dft_l1: return "dft_l1";
    case Family::slope: return "slope";
    case Family::wavelet_l1: return "wavelet_l1";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : all_families()) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown constraint family '" + std::string(name) + "'");
}

std::vector<Family> all_families() {
  return {Family::bounds, Family::nuclear, Family::tnv,   Family::tv,        Family::annulus,
          Family::grad_annulus, Family::dft_l1, Family::slope, Family::wavelet_l1};
}

namespace {

double nuclear_norm(const Vec<double>& v, const Shape& shape) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> mat(v.data(), shape.counts[0], shape.counts[1]);
  const DenseMatrix<double> dense = mat;
  Eigen::BDCSVD<DenseMatrix<double>> svd(dense);
  return svd.singularValues().sum();
}

double dft_modulus_l1(const LinearOperator<double>& dft, const Vec<double>& v) {
  const Vec<double> c = dft.forward(v);
  const Index n = v.size();
  double total = 0;
  for (Index i = 0; i < n; ++i) total += std::hypot(c[i], c[n + i]);
  return total;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> per_image;

  void add(double lo_v, double hi_v) {
    lo = std::min(lo, lo_v);
    hi = std::max(hi, hi_v);
  }
};

double widen_up(double v, double slack) { return v + slack * std::abs(v); }
double widen_down(double v, double slack) { return v - slack * std::abs(v); }

std::string provenance_of(std::string_view family, std::size_t n_images, const std::vector<double>& stats) {
  std::ostringstream os;
  os.precision(10);
  os << "learned:" << family << " from " << n_images << " image(s) [";
  for (std::size_t i = 0; i < stats.size(); ++i) os << (i ? "," : "") << stats[i];
  os << "]";
  return os.str();
}

}  // namespace

std::vector<SetDefinition> learn_constraints(const std::vector<Vec<double>>& images, const CompGrid& grid,
                                             const std::vector<Family>& families, double slack) {
  if (families.empty()) throw ConfigError("no constraint families requested");
  if (images.empty()) throw ConfigError("at least one training image is required");
  if (!(slack >= 0)) throw ParameterError("slack must be nonnegative");
  for (const auto& img : images) {
    if (img.size() != grid.size()) throw ShapeError("training image does not match the grid");
  }
  const Shape shape = grid.shape();
  const std::size_t n_img = images.size();

  auto op = [&](OperatorKind k) { return build_operator<double>(k, grid); };
  auto require_2d = [&](Family f) {
    if (grid.dims() != 2) throw ConfigError(std::string(to_string(f)) + " constraints need a 2D grid");
  };

  std::vector<SetDefinition> defs;
  for (Family fam : families) {
    const std::string fname(to_string(fam));
    switch (fam) {
      case Family::bounds: {
        Range r;
        for (const auto& img : images) {
          r.add(img.minCoeff(), img.maxCoeff());
          r.per_image.push_back(img.minCoeff());
          r.per_image.push_back(img.maxCoeff());
        }
        SetDefinition d;
        d.set_type = "bounds";
        d.min = {widen_down(r.lo, slack)};
        d.max = {widen_up(r.hi, slack)};
        d.provenance = provenance_of(fname, n_img, r.per_image);
        defs.push_back(d);
        break;
      }
      case Family::nuclear: {
        require_2d(fam);
        Range r;
        for (const auto& img : images) {
          const double v = nuclear_norm(img, shape);
          r.add(v, v);
          r.per_image.push_back(v);
        }
        SetDefinition d;
        d.set_type = "nuclear";
        d.sigma = widen_up(r.hi, slack);
        d.provenance = provenance_of(fname, n_img, r.per_image);
        defs.push_back(d);
        break;
      }
      case Family::tnv: {
        require_2d(fam);
        for (OperatorKind k : {OperatorKind::deriv_z, OperatorKind::deriv_x}) {
          const auto a = op(k);
          Range r;
          for (const auto& img : images) {
            const double v = nuclear_norm(a->forward(img), a->blocks().front().shape);
            r.add(v, v);
            r.per_image.push_back(v);
          }
          SetDefinition d;
          d.set_type = "nuclear";
          d.td_op = k == OperatorKind::deriv_z ? "D_z" : "D_x";
          d.sigma = widen_up(r.hi, slack);
          d.provenance = provenance_of(fname, n_img, r.per_image);
          defs.push_back(d);
        }
        break;
      }
      case Family::tv:
      case Family::wavelet_l1:
      case Family::dft_l1: {
        const OperatorKind k = fam == Family::tv ? OperatorKind::tv_stack
                               : fam == Family::dft_l1 ? OperatorKind::dft
                                                       : OperatorKind::haar;
        const auto a = op(k);
        Range r;
        for (const auto& img : images) {
          const double v = k == OperatorKind::dft ? dft_modulus_l1(*a, img) : a->forward(img).lpNorm<1>();
          r.add(v, v);
          r.per_image.push_back(v);
        }
        SetDefinition d;
        d.set_type = "l1";
        d.td_op = k == OperatorKind::tv_stack ? "TV" : k == OperatorKind::dft ? "DFT" : "wavelet";
        d.sigma = widen_up(r.hi, slack);
        d.provenance = provenance_of(fname, n_img, r.per_image);
        defs.push_back(d);
        break;
      }
      case Family::annulus:
      case Family::grad_annulus: {
        const auto a = op(fam == Family::annulus ? OperatorKind::identity : OperatorKind::tv_stack);
        Range r;
        for (const auto& img : images) {
          const double v = a->forward(img).norm();
          r.add(v, v);
          r.per_image.push_back(v);
        }
        SetDefinition d;
        d.set_type = "annulus";
        d.td_op = fam == Family::annulus ? "identity" : "TV";
        d.sigma_l = std::max(0.0, widen_down(r.lo, slack));
        d.sigma_u = widen_up(r.hi, slack);
        d.provenance = provenance_of(fname, n_img, r.per_image);
        defs.push_back(d);
        break;
      }
      case Family::slope: {
        std::vector<OperatorKind> kinds{OperatorKind::deriv_z, OperatorKind::deriv_x};
        if (grid.dims() == 3) kinds.push_back(OperatorKind::deriv_y);
        for (OperatorKind k : kinds) {
          const auto a = op(k);
          Range r;
          for (const auto& img : images) {
            const Vec<double> g = a->forward(img);
            r.add(g.minCoeff(), g.maxCoeff());
            r.per_image.push_back(g.minCoeff());
            r.per_image.push_back(g.maxCoeff());
          }
          SetDefinition d;
          d.set_type = "bounds";
          d.td_op = k == OperatorKind::deriv_z ? "D_z" : k == OperatorKind::deriv_x ? "D_x" : "D_y";
          d.min = {widen_down(r.lo, slack)};
          d.max = {widen_up(r.hi, slack)};
          d.provenance = provenance_of(fname, n_img, r.per_image);
          defs.push_back(d);
        }
        break;
      }
    }
  }
  return defs;
}

SetDefinition data_constraint(OperatorPtr<double> f, const Vec<double>& d_obs, const Vec<double>& l,
                              const Vec<double>& u) {
  if (!f) throw ConfigError("data constraint needs a forward operator");
  if (d_obs.size() != f->output_size()) {
    throw ShapeError("observed data length " + std::to_string(d_obs.size()) +
                     " does not match the forward operator output " + std::to_string(f->output_size()));
  }
  const auto check = [&](const Vec<double>& b) {
    if (b.size() != 1 && b.size() != d_obs.size()) throw ShapeError("data bounds must be scalar or per datum");
  };
  check(l);
  check(u);
  SetDefinition d;
  d.set_type = "bounds";
  d.td_op = f->is_identity() ? "identity" : "custom";
  if (!f->is_identity()) d.custom_op = f;
  d.min.resize(static_cast<std::size_t>(d_obs.size()));
  d.max.resize(static_cast<std::size_t>(d_obs.size()));
  for (Index i = 0; i < d_obs.size(); ++i) {
    d.min[static_cast<std::size_t>(i)] = (l.size() == 1 ? l[0] : l[i]) + d_obs[i];
    d.max[static_cast<std::size_t>(i)] = (u.size() == 1 ? u[0] : u[i]) + d_obs[i];
  }
  d.provenance = "data";
  return d;
}

nlohmann::json to_json(const SetDefinition& def) {
  nlohmann::json j;
  j["set_type"] = def.set_type;
  j["TD_OP"] = def.td_op;
  const auto vec_or_scalar = [](const std::vector<double>& v) -> nlohmann::json {
    if (v.size() == 1) return v.front();
    return v;
  };
  if (def.set_type == "bounds") {
    j["min"] = vec_or_scalar(def.min);
    j["max"] = vec_or_scalar(def.max);
  } else if (def.set_type == "annulus") {
    j["sigma_l"] = def.sigma_l;
    j["sigma_u"] = def.sigma_u;
  } else if (def.set_type == "cardinality") {
    j["k"] = def.k;
  } else if (def.set_type == "rank") {
    j["r"] = def.r;
  } else {
    j["sigma"] = def.sigma;
  }
  const ApplyMode mode = parse_apply_mode(def.app_mode);
  if (mode == ApplyMode::whole) {
    j["app_mode"] = {"matrix", ""};
  } else {
    j["app_mode"] = {"slice", std::string(to_string(mode))};
  }
  if (!def.custom_op_file.empty()) j["custom_op"] = def.custom_op_file;
  j["provenance"] = def.provenance;
  return j;
}

SetDefinition definition_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("set definition must be a JSON object");
  SetDefinition d;
  try {
    d.set_type = j.at("set_type").get<std::string>();
    if (j.contains("TD_OP")) {
      d.td_op = j["TD_OP"].get<std::string>();
    } else if (j.contains("td_op")) {
      d.td_op = j["td_op"].get<std::string>();
    }
    const auto read_values = [](const nlohmann::json& v) {
      if (v.is_array()) return v.get<std::vector<double>>();
      return std::vector<double>{v.get<double>()};
    };
    if (j.contains("min")) d.min = read_values(j["min"]);
    if (j.contains("max")) d.max = read_values(j["max"]);
    d.sigma = j.value("sigma", 0.0);
    d.sigma_l = j.value("sigma_l", 0.0);
    d.sigma_u = j.value("sigma_u", 0.0);
    d.k = j.value("k", Index{0});
    d.r = j.value("r", Index{0});
    if (j.contains("app_mode")) {
      const auto& m = j["app_mode"];
      if (m.is_string()) {
        d.app_mode = m.get<std::string>();
      } else if (m.is_array() && !m.empty()) {
        const std::string first = m[0].get<std::string>();
        const std::string second = m.size() > 1 ? m[1].get<std::string>() : "";
        d.app_mode = first == "matrix" ? "matrix" : "slice:" + second;
      } else {
        throw ConfigError("app_mode must be a string or [mode, detail]");
      }
      parse_apply_mode(d.app_mode);
    }
    if (j.contains("custom_op")) {
      d.custom_op_file = j["custom_op"].get<std::string>();
      std::filesystem::path p(d.custom_op_file);
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      d.custom_op = make_custom_operator<double>(read_matrix_market(p.string()));
    }
    d.provenance = j.value("provenance", std::string("user"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed set definition: ") + e.what());
  }
  return d;
}

nlohmann::json definitions_to_json(const std::vector<SetDefinition>& defs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : defs) arr.push_back(to_json(d));
  return arr;
}

std::vector<SetDefinition> definitions_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_array()) throw ConfigError("set definitions must be a JSON array");
  std::vector<SetDefinition> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(definition_from_json(j[i], base_dir));
    } catch (const Error& e) {
      throw ConfigError("set definition " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

template ConstraintBundle<float> setup_constraints<float>(const std::vector<SetDefinition>&, const CompGrid&,
                                                          std::size_t);
template ConstraintBundle<double> setup_constraints<double>(const std::vector<SetDefinition>&,
                                                            const CompGrid&, std::size_t);

}  // namespace setproj
