#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "setproj/apps.hpp"
#include "setproj/errors.hpp"

using namespace setproj;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vec<double> random_vec(Index n, std::mt19937& rng, double scale = 1.0, double shift = 0.0) {
  std::normal_distribution<double> nd(shift, scale);
  Vec<double> v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("setproj_apps_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ImageBuffer image_of(const Vec<double>& pixels, Index h, Index w) {
  ImageBuffer img;
  img.height = h;
  img.width = w;
  img.pixels = pixels;
  return img;
}

double rel(const Vec<double>& a, const Vec<double>& b) { return (a - b).norm() / b.norm(); }

json read_json(const fs::path& p) {
  std::ifstream in(p);
  json j;
  in >> j;
  return j;
}

// Runs a config document with its output sent to dir.
int run_in(const fs::path& dir, json j) {
  j["output"] = {{"dir", (dir / "out").string()}};
  RunConfig cfg = config_from_json(j, dir.string());
  return run_command(cfg);
}

Vec<double> result_of(const fs::path& dir) { return read_csv_grid((dir / "out" / "result.csv").string()).pixels; }

}  // namespace

TEST_CASE("blur restriction operator") {
  SUBCASE("width one with every row kept is the identity") {
    const Shape s({3, 4});
    std::vector<Index> all(12);
    for (Index i = 0; i < 12; ++i) all[static_cast<std::size_t>(i)] = i;
    const auto f = build_blur_restriction(1, all, s);
    std::mt19937 rng(1);
    const Vec<double> v = random_vec(12, rng);
    CHECK(f->forward(v) == v);
  }
  SUBCASE("width two averages neighbours") {
    const auto f = build_blur_restriction(2, {0, 1}, Shape({1, 3}));
    const Vec<double> out = f->forward((Vec<double>(3) << 2, 4, 6).finished());
    REQUIRE(out.size() == 2);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 5.0);
  }
  SUBCASE("restriction picks blurred samples") {
    const Shape s({2, 4});
    CHECK(blurred_size(3, s) == 4);
    const auto f = build_blur_restriction(3, {1, 2}, s);
    Vec<double> v(8);
    v << 0, 3, 6, 9, 1, 1, 4, 7;
    const Vec<double> out = f->forward(v);
    CHECK(out[0] == doctest::Approx(6.0));
    CHECK(out[1] == doctest::Approx(2.0));
  }
  SUBCASE("adjoint identity") {
    const Shape s({7, 9});
    const auto keep = random_keep(blurred_size(4, s), 0.3, 5);
    const auto f = build_blur_restriction(4, keep, s);
    std::mt19937 rng(2);
    for (int t = 0; t < 20; ++t) {
      const Vec<double> x = random_vec(s.size(), rng);
      const Vec<double> y = random_vec(f->output_size(), rng);
      const double lhs = f->forward(x).dot(y), rhs = x.dot(f->adjoint(y));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
  SUBCASE("bad masks and kernels") {
    const Shape s({2, 4});
    CHECK_THROWS_AS(build_blur_restriction(2, {}, s), ConfigError);
    CHECK_THROWS_AS(build_blur_restriction(2, {1, 1}, s), ConfigError);
    CHECK_THROWS_AS(build_blur_restriction(2, {6}, s), ConfigError);
    CHECK_THROWS_AS(build_blur_restriction(0, {0}, s), ConfigError);
    CHECK_THROWS_AS(build_blur_restriction(5, {0}, s), ConfigError);
  }
}

TEST_CASE("random observation masks") {
  const auto a = random_keep(100, 0.2, 7);
  CHECK(a.size() == 80);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());
  CHECK(a.front() >= 0);
  CHECK(a.back() < 100);
  CHECK(random_keep(100, 0.2, 7) == a);
  CHECK(random_keep(100, 0.2, 8) != a);
  CHECK(random_keep(100, 0.0, 3).size() == 100);
  CHECK(random_keep(3, 0.99, 3).size() == 1);
  CHECK_THROWS_AS(random_keep(10, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(random_keep(0, 0.1, 1), ConfigError);
}

TEST_CASE("synthetic images") {
  for (const std::string kind : {"blocks", "layers", "smooth"}) {
    CAPTURE(kind);
    const ImageBuffer a = synthetic_image(kind, 24, 30, 4);
    CHECK(a.height == 24);
    CHECK(a.width == 30);
    CHECK(a.pixels.minCoeff() >= 0.0);
    CHECK(a.pixels.maxCoeff() <= 255.0);
    CHECK(a.pixels.maxCoeff() > a.pixels.minCoeff());
    CHECK(synthetic_image(kind, 24, 30, 4).pixels == a.pixels);
    CHECK(synthetic_image(kind, 24, 30, 5).pixels != a.pixels);
  }
  CHECK_THROWS_AS(synthetic_image("stripes", 8, 8, 1), ConfigError);
  CHECK_THROWS_AS(synthetic_image("blocks", 1, 8, 1), ConfigError);
}

TEST_CASE("image files") {
  const fs::path dir = scratch("io");
  std::mt19937 rng(3);
  const Vec<double> v = random_vec(15, rng, 40.0, 120.0);

  SUBCASE("csv round trip is exact") {
    write_csv_grid((dir / "a.csv").string(), image_of(v, 3, 5));
    const ImageBuffer b = read_image((dir / "a.csv").string());
    CHECK(b.height == 3);
    CHECK(b.width == 5);
    CHECK(b.pixels == v);
  }
  SUBCASE("pgm rounds and clamps") {
    Vec<double> p(4);
    p << -3.0, 12.4, 12.6, 300.0;
    write_image((dir / "a.pgm").string(), image_of(p, 2, 2));
    const ImageBuffer b = read_pgm((dir / "a.pgm").string());
    CHECK(b.pixels == (Vec<double>(4) << 0, 12, 13, 255).finished());
    write_pgm((dir / "b.pgm").string(), b);
    CHECK(read_image((dir / "b.pgm").string()).pixels == b.pixels);
  }
  SUBCASE("pgm comments are skipped") {
    std::ofstream os(dir / "c.pgm", std::ios::binary);
    os << "P5\n# made by hand\n2 1\n255\n";
    os.put(static_cast<char>(7)).put(static_cast<char>(200));
    os.close();
    const ImageBuffer b = read_pgm((dir / "c.pgm").string());
    CHECK(b.pixels == (Vec<double>(2) << 7, 200).finished());
  }
  SUBCASE("bad files") {
    std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
    std::ofstream(dir / "word.csv") << "1,x\n";
    std::ofstream(dir / "p2.pgm") << "P2\n1 1\n255\n0\n";
    CHECK_THROWS_AS(read_image((dir / "ragged.csv").string()), ConfigError);
    CHECK_THROWS_AS(read_image((dir / "word.csv").string()), ConfigError);
    CHECK_THROWS_AS(read_image((dir / "p2.pgm").string()), ConfigError);
    CHECK_THROWS_AS(read_image((dir / "missing.csv").string()), ConfigError);
    CHECK_THROWS_AS(read_image((dir / "a.png").string()), ConfigError);
    ImageBuffer bad = image_of(v, 3, 5);
    bad.pixels[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(image_of(v, 4, 5).validate(), ShapeError);
  }
}

TEST_CASE("psnr") {
  const Vec<double> ref = Vec<double>::Constant(4, 100.0);
  CHECK(std::isinf(psnr(ref, ref)));
  Vec<double> est = ref;
  est[0] += 2.0;  // mse = 1
  CHECK(psnr(est, ref) == doctest::Approx(20.0 * std::log10(255.0)));
  CHECK(psnr(est, ref, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr(est, Vec<double>::Zero(3)), ShapeError);
}

TEST_CASE("desaturation bounds") {
  const Vec<double> d = (Vec<double>(4) << 60, 80, 125, 10).finished();
  const SetDefinition b = desaturation_bounds(d, 60, 125);
  CHECK(b.set_type == "bounds");
  CHECK(b.td_op == "identity");
  CHECK(b.min == std::vector<double>{0, 80, 125, 0});
  CHECK(b.max == std::vector<double>{60, 80, 255, 60});
  CHECK_THROWS_AS(desaturation_bounds(d, 125, 60), ConfigError);
  CHECK_THROWS_AS(desaturation_bounds(d, -1, 60), ConfigError);
  CHECK_THROWS_AS(desaturation_bounds(d, 60, 256), ConfigError);
}

TEST_CASE("spectral projected gradient") {
  std::mt19937 rng(9);
  const Index n = 40;
  const Vec<double> t = random_vec(n, rng, 2.0);
  auto f = [&](const Vec<double>& m) { return 0.5 * (m - t).squaredNorm(); };
  auto g = [&](const Vec<double>& m) -> Vec<double> { return m - t; };

  SUBCASE("a target inside the box is reached") {
    auto box = [](const Vec<double>& x) -> Vec<double> { return x.cwiseMax(-100.0).cwiseMin(100.0); };
    const SpgResult r = spg_solve(f, g, box, Vec<double>::Zero(n));
    CHECK(r.converged);
    CHECK(rel(r.m, t) <= 1e-8);
  }
  SUBCASE("a target outside the box lands on its clamp") {
    auto box = [](const Vec<double>& x) -> Vec<double> { return x.cwiseMax(-1.0).cwiseMin(1.0); };
    const Vec<double> clamp = box(t);
    const SpgResult r = spg_solve(f, g, box, Vec<double>::Constant(n, 0.3));
    CHECK(r.evaluations <= 10);
    CHECK(rel(r.m, clamp) <= 1e-8);
  }
  SUBCASE("non-monotone window and budget") {
    // a nonconvex objective with an l2-ball projection exercises the line search
    auto fr = [](const Vec<double>& m) {
      double s = 0;
      for (Index i = 0; i + 1 < m.size(); ++i)
        s += 100 * std::pow(m[i + 1] - m[i] * m[i], 2) + std::pow(1 - m[i], 2);
      return s;
    };
    auto gr = [](const Vec<double>& m) -> Vec<double> {
      Vec<double> gg = Vec<double>::Zero(m.size());
      for (Index i = 0; i + 1 < m.size(); ++i) {
        const double a = m[i + 1] - m[i] * m[i];
        gg[i] += -400 * a * m[i] - 2 * (1 - m[i]);
        gg[i + 1] += 200 * a;
      }
      return gg;
    };
    auto ball = [](const Vec<double>& x) -> Vec<double> {
      const double nx = x.norm();
      return nx > 2.0 ? Vec<double>(x * (2.0 / nx)) : x;
    };
    SpgOptions o;
    o.max_evals = 60;
    o.memory = 4;
    const SpgResult r = spg_solve(fr, gr, ball, Vec<double>::Constant(6, -0.5), o);
    CHECK(r.evaluations <= o.max_evals);
    REQUIRE(r.f_history.size() >= 3);
    for (std::size_t k = 1; k < r.f_history.size(); ++k) {
      const std::size_t lo = k >= 4 ? k - 4 : 0;
      const double ref = *std::max_element(r.f_history.begin() + static_cast<long>(lo),
                                           r.f_history.begin() + static_cast<long>(k));
      CHECK(r.f_history[k] <= ref);
    }
    CHECK(r.f <= r.f_history.front());
    CHECK(r.m.norm() <= 2.0 + 1e-12);
  }
  SUBCASE("option checks") {
    SpgOptions o;
    o.max_evals = 0;
    CHECK_THROWS_AS(o.validate(), ParameterError);
    o = {};
    o.armijo = 1.5;
    CHECK_THROWS_AS(o.validate(), ParameterError);
  }
}

TEST_CASE("run configuration parsing") {
  const json base = {{"command", "project"},
                     {"input", {{"synthetic", "smooth"}, {"counts", {8, 6}}, {"seed", 3}}},
                     {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 50}, {"max", 150}}}},
                     {"solver", {{"eps_feas", 1e-4}, {"threads", 4}}},
                     {"restore", {{"noise_level", 2.5}}}};
  const RunConfig c = config_from_json(base);
  CHECK(c.command == "project");
  CHECK(c.mode == "parsdmm");
  CHECK(c.input.synthetic == "smooth");
  CHECK(c.input.height == 8);
  CHECK(c.input.width == 6);
  CHECK(c.input.seed == 3);
  REQUIRE(c.constraints.size() == 1);
  CHECK(c.constraints[0].max == std::vector<double>{150});
  CHECK(c.solver.eps_feas == 1e-4);
  CHECK(c.solver.threads == 4);
  CHECK(c.solver.parallel_sets);
  CHECK(c.data_lower == -2.5);
  CHECK(c.data_upper == 2.5);
  CHECK_NOTHROW(c.validate());

  json j = base;
  j["solver"]["eps_feaz"] = 1;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = base;
  j["colour"] = true;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = base;
  j["mode"] = "admm";
  CHECK_THROWS_AS(config_from_json(j).validate(), ConfigError);
  j = base;
  j["desaturate"] = {{"low", 130}, {"high", 125}};
  CHECK_THROWS_AS(config_from_json(j).validate(), ConfigError);
  j = base;
  j["input"] = {{"synthetic", "smooth"}, {"counts", {8}}};
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = base;
  j["learn"] = {{"images", json::array({"a.csv"})}, {"families", {"tv", "bounds"}}, {"slack", 0.1}};
  const RunConfig l = config_from_json(j);
  REQUIRE(l.learn.has_value());
  CHECK(l.learn->families == std::vector<Family>{Family::tv, Family::bounds});
  j["learn"].erase("families");
  CHECK(config_from_json(j).learn->families == all_families());
}

TEST_CASE("project command") {
  const json input = {{"synthetic", "smooth"}, {"counts", {16, 16}}, {"seed", 3}};
  const Vec<double> m = synthetic_image("smooth", 16, 16, 3).pixels;

  SUBCASE("bounds only gives the clamp") {
    const fs::path dir = scratch("project_clamp");
    const json j = {{"command", "project"},
                    {"input", input},
                    {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 60}, {"max", 150}}}},
                    {"solver", {{"eps_feas", 1e-5}, {"eps_evol", 1e-5}}}};
    CHECK(run_in(dir, j) == 0);
    const Vec<double> clamp = m.cwiseMax(60.0).cwiseMin(150.0);
    CHECK(rel(result_of(dir), clamp) <= 1e-4);
    for (const char* f : {"result.pgm", "log.csv", "summary.json", "constraints.json"}) {
      CHECK(fs::exists(dir / "out" / f));
    }
    const json s = read_json(dir / "out" / "summary.json");
    CHECK(s["verified"].get<bool>());
    CHECK(s["converged"].get<bool>());
  }
  SUBCASE("a feasible input is returned") {
    const fs::path dir = scratch("project_feasible");
    const json j = {{"command", "project"},
                    {"input", input},
                    {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 0}, {"max", 255}},
                                     {{"set_type", "l1"}, {"TD_OP", "TV"}, {"sigma", 1e6}}}}};
    CHECK(run_in(dir, j) == 0);
    CHECK(rel(result_of(dir), m) <= 1e-8);
    const json s = read_json(dir / "out" / "summary.json");
    for (const auto& e : s["feasibility"]) CHECK(e["r_feas"].get<double>() <= 1e-8);
  }
  SUBCASE("dykstra and parsdmm agree on a convex config") {
    json j = {{"command", "project"},
              {"input", input},
              {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 60}, {"max", 180}},
                               {{"set_type", "bounds"}, {"TD_OP", "D_z"}, {"min", 0}, {"max", 1e6}}}},
              {"solver", {{"eps_feas", 1e-5}, {"eps_evol", 1e-5}}},
              {"dykstra", {{"tol", 1e-7}, {"max_iter", 5000}, {"inner_tol", 1e-7}}}};
    const fs::path a = scratch("project_parsdmm"), b = scratch("project_dykstra");
    CHECK(run_in(a, j) == 0);
    j["mode"] = "dykstra";
    CHECK(run_in(b, j) == 0);
    CHECK(rel(result_of(b), result_of(a)) <= 1e-3);
  }
  SUBCASE("configuration errors exit with status 1") {
    const fs::path dir = scratch("project_errors");
    CHECK(run_in(dir, {{"command", "project"}, {"input", input}}) == 1);
    CHECK(run_in(dir, {{"command", "project"}, {"input", "nowhere.csv"},
                       {"constraints", {{{"set_type", "l1"}, {"TD_OP", "TV"}, {"sigma", 1}}}}}) == 1);
    CHECK(run_in(dir, {{"command", "sharpen"}, {"input", input}}) == 1);
  }
  SUBCASE("images are read relative to the config") {
    const fs::path dir = scratch("project_file");
    write_csv_grid((dir / "m.csv").string(), image_of(m, 16, 16));
    const json j = {{"command", "project"},
                    {"input", "m.csv"},
                    {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 0}, {"max", 255}}}}};
    CHECK(run_in(dir, j) == 0);
    CHECK(rel(result_of(dir), m) <= 1e-8);
  }
}

TEST_CASE("restore command") {
  const json truth = {{"synthetic", "blocks"}, {"counts", {24, 24}}, {"seed", 5}};
  const Vec<double> t = synthetic_image("blocks", 24, 24, 5).pixels;

  SUBCASE("noise free identity observation with covering bounds returns the observation") {
    const fs::path dir = scratch("restore_identity");
    const json j = {{"command", "restore"},
                    {"truth", truth},
                    {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 0}, {"max", 255}}}},
                    {"restore", {{"kernel_len", 1}, {"missing_fraction", 0.0}}}};
    CHECK(run_in(dir, j) == 0);
    CHECK(rel(result_of(dir), t) <= 1e-8);
    CHECK((read_csv_grid((dir / "out" / "initial_guess.csv").string()).pixels - t).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("blur and missing rows with learned constraints") {
    const fs::path dir = scratch("restore_learned");
    json images = json::array();
    for (int s : {21, 22, 23}) images.push_back({{"synthetic", "blocks"}, {"counts", {24, 24}}, {"seed", s}});
    const json j = {{"command", "restore"},
                    {"truth", truth},
                    {"learn", {{"images", images}, {"families", {"bounds", "tv"}}, {"slack", 0.1}}},
                    {"restore", {{"kernel_len", 5}, {"missing_fraction", 0.2}, {"noise_level", 0.0}}}};
    CHECK(run_in(dir, j) == 0);
    const json s = read_json(dir / "out" / "summary.json");
    CHECK(s["verified"].get<bool>());
    for (const auto& e : s["feasibility"]) CHECK(e["r_feas"].get<double>() < 1e-3);
    CHECK(s["feasibility"].back()["provenance"] == "data");
  }
  SUBCASE("over-estimated noise bounds keep the data residual inside the box") {
    const fs::path dir = scratch("restore_widened");
    const double w = 6.0;
    const double tv_truth = build_operator<double>(OperatorKind::tv_stack, CompGrid({1.0, 1.0}, {24, 24}))
                                ->forward(t)
                                .lpNorm<1>();
    const json j = {{"command", "restore"},
                    {"truth", truth},
                    {"seed", 3},
                    {"constraints", {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 0}, {"max", 255}},
                                     {{"set_type", "l1"}, {"TD_OP", "TV"}, {"sigma", tv_truth}}}},
                    {"restore", {{"kernel_len", 3}, {"missing_fraction", 0.3}, {"data_lower", -w}, {"data_upper", w}}}};
    CHECK(run_in(dir, j) == 0);
    const Shape s({24, 24});
    const auto f = build_blur_restriction(3, random_keep(blurred_size(3, s), 0.3, 3), s);
    const Vec<double> d = f->forward(t);
    const Vec<double> res = f->forward(result_of(dir)) - d;
    // distance of the residual to the box, relative to the transformed point
    const Vec<double> excess = res - res.cwiseMax(-w).cwiseMin(w);
    CHECK(excess.norm() <= 1e-3 * (f->forward(result_of(dir))).norm());
  }
}

TEST_CASE("desaturate command") {
  SUBCASE("an image without clipped pixels is returned unchanged") {
    const fs::path dir = scratch("desat_none");
    const Vec<double> m = (synthetic_image("smooth", 12, 12, 2).pixels.array() * (50.0 / 255.0) + 65.0).matrix();
    write_csv_grid((dir / "obs.csv").string(), image_of(m, 12, 12));
    const json j = {{"command", "desaturate"},
                    {"observed", "obs.csv"},
                    {"constraints", {{{"set_type", "l1"}, {"TD_OP", "TV"}, {"sigma", 1.0}}}},
                    {"desaturate", {{"low", 60}, {"high", 125}}}};
    run_in(dir, j);
    CHECK(result_of(dir) == m);
    CHECK(read_json(dir / "out" / "summary.json")["clipped_pixels"] == 0);
  }
  SUBCASE("a clipped-high pixel stays above the threshold under TV") {
    const fs::path dir = scratch("desat_single");
    Vec<double> m = Vec<double>::Constant(64, 100.0);
    m[27] = 125.0;
    write_csv_grid((dir / "obs.csv").string(), image_of(m, 8, 8));
    const json j = {{"command", "desaturate"},
                    {"observed", "obs.csv"},
                    {"constraints", {{{"set_type", "l1"}, {"TD_OP", "TV"}, {"sigma", 120.0}}}}};
    CHECK(run_in(dir, j) == 0);
    const Vec<double> x = result_of(dir);
    // four unit-spacing edges around the pixel bound it by 100 + 120 / 4
    CHECK(x[27] >= 125.0);
    CHECK(x[27] <= 130.0 + 1e-2);
    for (Index i = 0; i < 64; ++i)
      if (i != 27) CHECK(x[i] == 100.0);
  }
  SUBCASE("clipped synthetic image with learned constraints") {
    const fs::path dir = scratch("desat_learned");
    json images = json::array();
    for (int s : {2, 3, 4}) images.push_back({{"synthetic", "layers"}, {"counts", {24, 24}}, {"seed", s}});
    const json j = {{"command", "desaturate"},
                    {"truth", {{"synthetic", "layers"}, {"counts", {24, 24}}, {"seed", 2}}},
                    {"learn", {{"images", images}}}};
    CHECK(run_in(dir, j) == 0);
    const Vec<double> truth = synthetic_image("layers", 24, 24, 2).pixels;
    const Vec<double> x = result_of(dir);
    for (Index i = 0; i < x.size(); ++i) {
      if (truth[i] > 60 && truth[i] < 125) CHECK(x[i] == truth[i]);
      else if (truth[i] <= 60) CHECK(x[i] <= 60.0);
      else CHECK(x[i] >= 125.0);
    }
    const json s = read_json(dir / "out" / "summary.json");
    CHECK(s["clipped_pixels"].get<Index>() > 0);
    for (const auto& e : s["feasibility"]) CHECK(e["r_feas"].get<double>() <= 1e-3);
  }
}

TEST_CASE("bench and spg commands") {
  const json input = {{"synthetic", "smooth"}, {"counts", {16, 16}}, {"seed", 7}};
  const json cons = {{{"set_type", "bounds"}, {"TD_OP", "identity"}, {"min", 50}, {"max", 190}},
                     {{"set_type", "bounds"}, {"TD_OP", "D_z"}, {"min", 0}, {"max", 1e6}}};
  SUBCASE("bench") {
    const fs::path dir = scratch("bench");
    const json j = {{"command", "bench"},
                    {"input", input},
                    {"constraints", cons},
                    {"solver", {{"eps_feas", 1e-5}, {"eps_evol", 1e-5}}},
                    {"dykstra", {{"tol", 1e-6}, {"max_iter", 2000}, {"inner_tol", 1e-6}}},
                    {"bench", {{"modes", {"parsdmm", "dykstra"}}, {"repetitions", 1}}}};
    CHECK(run_in(dir, j) == 0);
    const json s = read_json(dir / "out" / "summary.json");
    REQUIRE(s["modes"].size() == 2);
    for (const auto& m : s["modes"]) CHECK(m["max_r_feas"].get<double>() <= 1e-3);
    CHECK(s["modes"][1]["relative_difference_to_first"].get<double>() <= 1e-3);

    // cumulative counters never decrease within a mode
    std::ifstream in(dir / "out" / "bench.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == std::string("mode,") + kLogCsvHeader);
    std::map<std::pair<std::string, std::string>, std::pair<long, long>> last;
    int rows = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      REQUIRE(cells.size() == 8);
      const auto key = std::make_pair(cells[0], cells[2]);
      const long iter = std::stol(cells[1]), cg = std::stol(cells[5]);
      if (last.count(key)) {
        CHECK(iter > last[key].first);
        CHECK(cg >= last[key].second);
      }
      last[key] = {iter, cg};
      ++rows;
    }
    CHECK(rows > 4);
    CHECK(fs::exists(dir / "out" / "timings.csv"));
    CHECK(run_in(scratch("bench_one"), {{"command", "bench"}, {"input", input}, {"constraints", cons},
                                         {"bench", {{"modes", {"parsdmm"}}}}}) == 1);
  }
  SUBCASE("spg") {
    const fs::path dir = scratch("spg");
    const json j = {{"command", "spg"},
                    {"input", {{"synthetic", "blocks"}, {"counts", {16, 16}}, {"seed", 12}}},
                    {"target", input},
                    {"constraints", cons},
                    {"solver", {{"eps_feas", 1e-5}, {"eps_evol", 1e-5}}}};
    CHECK(run_in(dir, j) == 0);
    const json s = read_json(dir / "out" / "summary.json");
    CHECK(s["evaluations"].get<int>() <= 10);
    CHECK(s["relative_difference_to_projection"].get<double>() <= 1e-3);
    CHECK(fs::exists(dir / "out" / "spg.csv"));
  }
}
