#include "doctest.h"

#include <filesystem>
#include <random>

#include <Eigen/Eigenvalues>

#include "jointbe/error.hpp"
#include "jointbe/minifem.hpp"
#include "jointbe/rom.hpp"

using namespace jointbe;

namespace {

SpMat sparse(const Mat& m) { return m.sparseView(); }

FeModel small_model(const Mat& k, const Mat& m, std::vector<int> boundary) {
  FeModel f;
  f.stiffness = sparse(k);
  f.mass = sparse(m);
  f.boundary_dofs = std::move(boundary);
  f.dofs.resize(std::size_t(k.rows()));
  return f;
}

Mat random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = d(rng);
  return a * a.transpose() + n * Mat::Identity(n, n);
}

Vec sorted_eigenvalues(const Mat& k, const Mat& m) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(k, m);
  return es.eigenvalues();
}

FixtureModel block_fixture() {
  BrickMeshSpec s;
  s.extents = {20e-3, 10e-3, 5e-3};
  s.elements = {8, 4, 2};
  s.material = {194e9, 0.2854, 7861};
  s.clamped_faces = {Face::x_min};
  s.interface_face = Face::z_max;
  return build_brick_model(s);
}

}  // namespace

TEST_CASE("relative transform without pairs is the identity") {
  std::mt19937_64 rng(1);
  const Mat k = random_spd(4, rng);
  const FeModel f = small_model(k, Mat::Identity(4, 4), {});
  const FeModel g = relative_transform(f, {});
  CHECK(Mat(g.stiffness) == Mat(f.stiffness));
  CHECK(g.boundary_dofs.empty());
}

TEST_CASE("one matched pair decouples the relative coordinate") {
  const double k = 3.5;
  Mat kk(2, 2);
  kk << k, -k, -k, k;
  const FeModel f = small_model(kk, Mat::Identity(2, 2), {});
  const FeModel g = relative_transform(f, {{0, 1}});
  const Mat kt = Mat(g.stiffness);
  // q0 = r + q1: the relative DOF carries k, the absolute one nothing.
  CHECK(kt(0, 0) == doctest::Approx(k));
  CHECK(kt(1, 1) == doctest::Approx(0.0));
  CHECK(kt(0, 1) == doctest::Approx(0.0));
  CHECK(g.boundary_dofs == std::vector<int>{0});
  CHECK(g.dofs[0].relative);
}

TEST_CASE("relative transform preserves the strain energy") {
  std::mt19937_64 rng(2);
  const Mat k = random_spd(6, rng);
  FeModel f = small_model(k, random_spd(6, rng), {});
  const FeModel g = relative_transform(f, {{0, 3}, {1, 4}});
  std::normal_distribution<double> d;
  for (int t = 0; t < 5; ++t) {
    Vec qp(6);
    for (int i = 0; i < 6; ++i) qp(i) = d(rng);
    const Vec q = g.physical(qp);
    CHECK(qp.dot(g.stiffness * qp) == doctest::Approx(q.dot(k * q)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(relative_transform(f, {{0, 3}, {0, 4}}), Error);
}

TEST_CASE("two-spring chain condenses to half the spring stiffness") {
  // ground -k- inner(0) -k- boundary(1)
  const double k = 2e6;
  Mat kk(2, 2);
  kk << 2 * k, -k, -k, k;
  const FeModel f = small_model(kk, Mat::Identity(2, 2), {1});
  const ReducedModel r = craig_bampton(f, 0);
  REQUIRE(r.size() == 1);
  CHECK(r.k_red(0, 0) == doctest::Approx(k / 2).epsilon(1e-14));
  CHECK(r.basis(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("complete modal basis reproduces the full spectrum") {
  std::mt19937_64 rng(3);
  const int n = 12;
  const Mat k = random_spd(n, rng);
  const Mat m = random_spd(n, rng);
  const FeModel f = small_model(k, m, {2, 7, 9});
  const ReducedModel r = craig_bampton(f, n - 3);
  const Vec full = sorted_eigenvalues(k, m);
  const Vec red = sorted_eigenvalues(r.k_red, r.m_red);
  for (int i = 0; i < n; ++i) CHECK(std::abs(red(i) - full(i)) <= 1e-9 * full(i));
}

TEST_CASE("singular inner stiffness is rejected") {
  Mat kk = Mat::Zero(3, 3);
  kk(0, 0) = 1;  // DOFs 1 and 2 float once DOF 0 is the boundary
  const FeModel f = small_model(kk, Mat::Identity(3, 3), {0});
  CHECK_THROWS_AS(craig_bampton(f, 0), Error);
}

TEST_CASE("block fixture: static boundary exactness and modal structure") {
  const FixtureModel fx = block_fixture();
  const FeModel& f = fx.model;
  const ReducedModel r = craig_bampton(f, 25);
  const int nb = r.n_boundary;

  // Block structure of K and M.
  CHECK(r.k_red.topRightCorner(nb, 25).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.m_red.bottomRightCorner(25, 25) - Mat::Identity(25, 25)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((r.m_red - r.m_red.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.max_mode_residual <= 1e-8);
  for (int i = 1; i < 25; ++i) CHECK(r.fixed_interface_omega(i) >= r.fixed_interface_omega(i - 1));

  // Boundary compliance: full solve vs reduced solve for random boundary loads.
  Eigen::SimplicialLDLT<SpMat> full(f.stiffness);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  Mat fb(nb, 3);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < 3; ++j) fb(i, j) = d(rng);
  const Mat red = r.kbb().ldlt().solve(fb);
  for (int j = 0; j < 3; ++j) {
    Vec load = Vec::Zero(f.size());
    for (int i = 0; i < nb; ++i) load(f.boundary_dofs[std::size_t(i)]) = fb(i, j);
    const Vec q = full.solve(load);
    Vec qb(nb);
    for (int i = 0; i < nb; ++i) qb(i) = q(f.boundary_dofs[std::size_t(i)]);
    CHECK((red.col(j) - qb).norm() <= 1e-10 * qb.norm());
  }

  // Free-interface spectrum: the lowest eight frequencies match the parent model.
  const EigenPairs parent = lowest_modes(f.stiffness, f.mass, 8);
  const Vec reduced = sorted_eigenvalues(r.k_red, r.m_red);
  for (int i = 0; i < 8; ++i) {
    const double w = std::sqrt(reduced(i));
    CHECK(std::abs(w - parent.omega(i)) <= 0.005 * parent.omega(i));
  }
}

TEST_CASE("subspace iteration agrees with the dense eigensolver") {
  const FixtureModel fx = block_fixture();
  const EigenPairs dense = lowest_modes(fx.model.stiffness, fx.model.mass, 6, 100000);
  const EigenPairs sub = lowest_modes(fx.model.stiffness, fx.model.mass, 6, 10);
  for (int i = 0; i < 6; ++i) CHECK(sub.omega(i) == doctest::Approx(dense.omega(i)).epsilon(1e-9));
}

TEST_CASE("reduced model bundle round trip") {
  std::mt19937_64 rng(5);
  const Mat k = random_spd(6, rng);
  FeModel f = small_model(k, random_spd(6, rng), {0, 1});
  f.loads["preload"] = Vec::LinSpaced(6, 1, 6);
  const ReducedModel r = craig_bampton(f, 2);
  const auto path = std::filesystem::temp_directory_path() / "jointbe_rom_roundtrip.bin";
  write_reduced_model(path.string(), r);
  const ReducedModel s = read_reduced_model(path.string());
  CHECK(s.k_red == r.k_red);
  CHECK(s.m_red == r.m_red);
  CHECK(s.basis == r.basis);
  CHECK(s.boundary_dofs == r.boundary_dofs);
  CHECK(s.loads.at("preload") == r.loads.at("preload"));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_reduced_model(path.string()), Error);
}
