#include <algorithm>
#include <random>

#include <Eigen/LU>

#include "doctest.h"
#include "setproj/cg.hpp"
#include "setproj/errors.hpp"
#include "setproj/linops.hpp"
#include "setproj/parallel.hpp"

using namespace setproj;

namespace {

Vec<double> zeros(Index n) { return Vec<double>::Zero(n); }

Vec<double> random_vec(Index n, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Vec<double> v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

SystemMatrix<double> tv_system(Index nz, Index nx, double rho_tv, double rho_id) {
  const CompGrid g({1.0, 1.0}, {nz, nx});
  const auto dz = build_operator<double>(OperatorKind::deriv_z, g);
  const auto dx = build_operator<double>(OperatorKind::deriv_x, g);
  SparseMatrix<double> eye(g.size(), g.size());
  eye.setIdentity();
  return SystemMatrix<double>::assemble({gram(*dz), gram(*dx), eye}, {rho_tv, rho_tv, rho_id});
}

CgOptions tight(double tol, int max_iter = 1000) {
  CgOptions o;
  o.rel_tol = tol;
  o.max_iter = max_iter;
  return o;
}

}  // namespace

TEST_CASE("identity system solves in one iteration") {
  SparseMatrix<double> eye(5, 5);
  eye.setIdentity();
  const auto c = SystemMatrix<double>::assemble({eye}, {1.0});
  std::mt19937 rng(1);
  const Vec<double> b = random_vec(5, rng);
  const auto r = cg_solve(c, b, zeros(5), tight(1e-12));
  CHECK(r.iterations == 1);
  CHECK(r.converged);
  CHECK((r.x - b).norm() < 1e-14);
}

TEST_CASE("warm start at the solution takes zero iterations") {
  const auto c = tv_system(6, 7, 2.0, 1.0);
  std::mt19937 rng(2);
  const Vec<double> x = random_vec(42, rng);
  const Vec<double> b = c.multiply(x);
  const auto r = cg_solve(c, b, x, tight(1e-8));
  CHECK(r.iterations == 0);
  CHECK(r.converged);
  CHECK(r.x == x);
}

TEST_CASE("zero right-hand side returns zero") {
  const auto c = tv_system(4, 4, 1.0, 1.0);
  std::mt19937 rng(3);
  const auto r = cg_solve(c, zeros(16), random_vec(16, rng), tight(1e-6));
  CHECK(r.iterations == 0);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("tridiagonal 3x3 against a dense LU solve") {
  DenseMatrix<double> tri(3, 3);
  tri << 2, -1, 0, -1, 3, -1, 0, -1, 2;
  SparseMatrix<double> eye(3, 3);
  eye.setIdentity();
  const auto c = SystemMatrix<double>::assemble({SparseMatrix<double>(tri.sparseView()), eye}, {1.0, 1e-300});
  Vec<double> b(3);
  b << 1, 2, 3;
  const Vec<double> exact = tri.partialPivLu().solve(b);
  const double tol = 1e-10;
  const auto r = cg_solve(c, b, zeros(3), tight(tol));
  CHECK(r.converged);
  CHECK(r.iterations <= 3);
  CHECK((r.x - exact).norm() / exact.norm() <= 10 * tol);
}

TEST_CASE("random SPD systems match the dense oracle within 10 rel_tol") {
  std::mt19937 rng(4);
  for (const Index n : {5, 40, 120, 200}) {
    DenseMatrix<double> a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = std::normal_distribution<double>()(rng);
    const DenseMatrix<double> spd = a.transpose() * a / static_cast<double>(n) + DenseMatrix<double>::Identity(n, n);
    SparseMatrix<double> eye(n, n);
    eye.setIdentity();
    const DenseMatrix<double> shifted = spd - DenseMatrix<double>::Identity(n, n);
    const auto c = SystemMatrix<double>::assemble({SparseMatrix<double>(shifted.sparseView()), eye}, {1.0, 1.0});
    const Vec<double> b = random_vec(n, rng);
    const Vec<double> exact = spd.partialPivLu().solve(b);
    for (const double tol : {1e-4, 1e-8}) {
      const auto r = cg_solve(c, b, zeros(n), tight(tol));
      CHECK(r.converged);
      CHECK(r.rel_residual <= tol);
      CHECK((c.multiply(r.x) - b).norm() / b.norm() == doctest::Approx(r.rel_residual).epsilon(1e-6));
      CHECK((r.x - exact).norm() / exact.norm() <= 10 * tol);
    }
  }
}

TEST_CASE("residual history matches recomputed residuals") {
  std::mt19937 rng(5);
  for (const double rho_tv : {0.5, 5.0, 50.0}) {
    const auto c = tv_system(12, 10, rho_tv, 1.0);
    const Vec<double> b = random_vec(120, rng);
    const auto r = cg_solve(c, b, zeros(120), tight(1e-10));
    REQUIRE(r.residual_history.size() == static_cast<std::size_t>(r.iterations) + 1);
    CHECK(r.residual_history.front() == doctest::Approx(1.0));
    for (int k = 1; k <= r.iterations; k += 7) {
      // a capped run returns its best iterate so far
      const auto partial = cg_solve(c, b, zeros(120), tight(1e-300, k));
      const auto first = r.residual_history.begin();
      CHECK(*std::min_element(first, first + k + 1) ==
            doctest::Approx((c.multiply(partial.x) - b).norm() / b.norm()).epsilon(1e-6));
    }
    CHECK(r.residual_history.back() <= 1e-10);
  }
}

TEST_CASE("energy-norm error decreases every iteration") {
  const auto c = tv_system(8, 9, 10.0, 1.0);
  std::mt19937 rng(6);
  const Vec<double> x_true = random_vec(72, rng);
  const Vec<double> b = c.multiply(x_true);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 30; ++k) {
    const auto r = cg_solve(c, b, zeros(72), tight(1e-300, k));
    const Vec<double> e = r.x - x_true;
    const double energy = e.dot(c.multiply(e));
    CHECK(energy <= prev * (1 + 1e-12));
    prev = energy;
  }
}

TEST_CASE("iteration cap reports the achieved residual") {
  const auto c = tv_system(10, 10, 100.0, 1.0);
  std::mt19937 rng(7);
  const Vec<double> b = random_vec(100, rng);
  const auto r = cg_solve(c, b, zeros(100), tight(1e-14, 3));
  CHECK(r.iterations == 3);
  CHECK_FALSE(r.converged);
  CHECK(r.rel_residual == doctest::Approx((c.multiply(r.x) - b).norm() / b.norm()).epsilon(1e-8));
}

TEST_CASE("pooled products give the same iterates") {
  const auto c = tv_system(16, 16, 3.0, 1.0);
  std::mt19937 rng(8);
  const Vec<double> b = random_vec(256, rng);
  WorkerPool pool(4);
  const auto serial = cg_solve(c, b, zeros(256), tight(1e-9));
  const auto pooled = cg_solve(c, b, zeros(256), tight(1e-9), &pool);
  CHECK(serial.iterations == pooled.iterations);
  CHECK(serial.x == pooled.x);
}

TEST_CASE("matrix-free operator form and breakdown") {
  const ApplyFn<double> scale = [](const Vec<double>& v, Vec<double>& out) { out = 3.0 * v; };
  Vec<double> b(4);
  b << 3, 6, 9, 12;
  const auto r = cg_solve(scale, b, zeros(4), tight(1e-12));
  CHECK(r.iterations == 1);
  CHECK((r.x - b / 3.0).norm() < 1e-14);

  const ApplyFn<double> indefinite = [](const Vec<double>& v, Vec<double>& out) { out = -v; };
  const auto bad = cg_solve(indefinite, b, zeros(4), tight(1e-12));
  CHECK(bad.breakdown);
  CHECK_FALSE(bad.converged);
  CHECK(bad.x.allFinite());
}

TEST_CASE("option validation") {
  CHECK_THROWS_AS(tight(0.0).validate(), ParameterError);
  CHECK_THROWS_AS(tight(1e-3, 0).validate(), ParameterError);
  SparseMatrix<double> eye(3, 3);
  eye.setIdentity();
  const auto c = SystemMatrix<double>::assemble({eye}, {1.0});
  CHECK_THROWS_AS(cg_solve(c, Vec<double>(Vec<double>::Ones(4)), zeros(4), tight(1e-3)), ShapeError);
}
