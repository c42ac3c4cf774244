#include "doctest.h"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "jointbe/error.hpp"
#include "jointbe/minifem.hpp"

using namespace jointbe;

namespace {

const Material kSteel{194e9, 0.2854, 7861};

BrickMeshSpec block(std::array<double, 3> ext, std::array<int, 3> el) {
  BrickMeshSpec s;
  s.extents = ext;
  s.elements = el;
  s.material = kSteel;
  return s;
}

LapJointSpec lap_spec() {
  LapJointSpec s;
  s.lower = block({40e-3, 16e-3, 4e-3}, {20, 8, 2});
  s.lower.origin = {0, 0, -4e-3};
  s.lower.clamped_faces = {Face::x_min};
  s.upper = block({40e-3, 16e-3, 4e-3}, {20, 8, 2});
  s.upper.origin = {24e-3, 0, 0};
  s.bolt_center = {32e-3, 8e-3};
  s.washer_radius = 4.1e-3;
  s.bolt_axial_stiffness = 4e8;
  s.bolt_shear_stiffness = 4e7;
  s.preload = 5710;
  s.sensor = {64e-3, 8e-3, 4e-3};
  return s;
}

}  // namespace

TEST_CASE("single element with one clamped face is positive definite") {
  auto s = block({1e-3, 1e-3, 1e-3}, {1, 1, 1});
  s.clamped_faces = {Face::z_min};
  const auto fx = build_brick_model(s);
  CHECK(fx.model.size() == 12);
  Eigen::SelfAdjointEigenSolver<Mat> es{Mat(fx.model.stiffness)};
  CHECK(es.eigenvalues().minCoeff() > 0);
}

TEST_CASE("unconstrained block has exactly six rigid modes") {
  const auto fx = build_brick_model(block({3e-3, 2e-3, 1e-3}, {3, 2, 1}));
  Eigen::SelfAdjointEigenSolver<Mat> es{Mat(fx.model.stiffness)};
  const Vec ev = es.eigenvalues();
  const double scale = ev.maxCoeff();
  int zeros = 0;
  for (int i = 0; i < ev.size(); ++i) zeros += std::abs(ev(i)) < 1e-10 * scale ? 1 : 0;
  CHECK(zeros == 6);
}

TEST_CASE("consistent mass integrates the block mass") {
  const auto fx = build_brick_model(block({3e-3, 2e-3, 1e-3}, {3, 2, 2}));
  Vec ux = Vec::Zero(fx.model.size());
  for (int i = 0; i < fx.model.size(); ++i) ux(i) = fx.model.dofs[std::size_t(i)].direction == 0;
  CHECK(ux.dot(fx.model.mass * ux) == doctest::Approx(kSteel.density * 6e-9).epsilon(1e-12));
}

TEST_CASE("patch test: a linear field leaves interior nodes unloaded") {
  const auto fx = build_brick_model(block({4e-3, 3e-3, 2e-3}, {4, 3, 2}));
  const double eps = 1e-4;
  Vec u = Vec::Zero(fx.model.size());
  for (int i = 0; i < fx.model.size(); ++i) {
    const auto& d = fx.model.dofs[std::size_t(i)];
    const auto& x = fx.mesh.nodes[std::size_t(d.node)];
    // General constant strain state.
    if (d.direction == 0) u(i) = eps * x[0] + 0.3 * eps * x[1];
    if (d.direction == 1) u(i) = -0.2 * eps * x[1] + 0.3 * eps * x[0];
    if (d.direction == 2) u(i) = 0.5 * eps * x[2] + 0.1 * eps * x[0];
  }
  const Vec f = fx.model.stiffness * u;
  const double fmax = f.cwiseAbs().maxCoeff();
  for (int i = 0; i < fx.model.size(); ++i) {
    const auto& x = fx.mesh.nodes[std::size_t(fx.model.dofs[std::size_t(i)].node)];
    const bool interior = x[0] > 1e-9 && x[0] < 4e-3 - 1e-9 && x[1] > 1e-9 && x[1] < 3e-3 - 1e-9 &&
                          x[2] > 1e-9 && x[2] < 2e-3 - 1e-9;
    if (interior) CHECK(std::abs(f(i)) <= 1e-9 * fmax);
  }
  // Uniaxial strain: the x_max face carries (lambda + 2G) eps A.
  Vec v = Vec::Zero(fx.model.size());
  for (int i = 0; i < fx.model.size(); ++i) {
    const auto& d = fx.model.dofs[std::size_t(i)];
    if (d.direction == 0) v(i) = eps * fx.mesh.nodes[std::size_t(d.node)][0];
  }
  const Vec g = fx.model.stiffness * v;
  double reaction = 0;
  for (int i = 0; i < fx.model.size(); ++i) {
    const auto& d = fx.model.dofs[std::size_t(i)];
    if (d.direction == 0 && fx.mesh.nodes[std::size_t(d.node)][0] > 4e-3 - 1e-9) reaction += g(i);
  }
  const double nu = kSteel.poisson_ratio;
  const double c11 = kSteel.youngs_modulus * (1 - nu) / ((1 + nu) * (1 - 2 * nu));
  CHECK(reaction == doctest::Approx(c11 * eps * 6e-6).epsilon(1e-10));
  // Linearity.
  CHECK(((fx.model.stiffness * (2.0 * v)) - 2.0 * g).norm() <= 1e-12 * g.norm());
}

TEST_CASE("slender cantilever bends at the Euler-Bernoulli frequency") {
  const double l = 100e-3, h = 10e-3;
  auto s = block({l, h, h}, {10, 1, 1});
  s.clamped_faces = {Face::x_min};
  const auto fx = build_brick_model(s);
  const EigenPairs modes = lowest_modes(fx.model.stiffness, fx.model.mass, 1);
  const double inertia = h * h * h * h / 12;
  const double analytic = 1.875104068711961 * 1.875104068711961 *
                          std::sqrt(kSteel.youngs_modulus * inertia / (kSteel.density * h * h * l * l * l * l));
  CHECK(std::abs(modes.omega(0) - analytic) / analytic < 0.10);
}

TEST_CASE("lap joint: conforming pairs, preload resultant and reducibility") {
  const LapJoint lj = build_lap_joint(lap_spec());
  const FeModel& f = lj.fixture.model;
  CHECK(lj.fixture.interface.node_xy.size() == 81);
  CHECK(lj.fixture.interface.faces.size() == 64);
  CHECK(f.boundary_dofs.size() == 243);
  CHECK(lj.fixture.sensor_dofs.size() == 3);

  // Equal and opposite washer loads, each of the requested magnitude.
  const Vec& p = f.loads.at("preload");
  CHECK(std::abs(p.sum()) <= 1e-10 * 5710);
  double down = 0;
  for (int i = 0; i < p.size(); ++i) down += std::min(0.0, p(i));
  CHECK(std::abs(-down - 5710) <= 1e-10 * 5710);

  double area = 0;
  for (double a : lj.fixture.interface.node_areas()) area += a;
  CHECK(area == doctest::Approx(16e-3 * 16e-3).epsilon(1e-12));

  const ReducedModel r = craig_bampton(f, 10);
  Eigen::LLT<Mat> llt(r.kbb());
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("lap joint rejects non-conforming overlaps") {
  LapJointSpec s = lap_spec();
  s.upper.elements = {21, 8, 2};
  CHECK_THROWS_AS(build_lap_joint(s), Error);
  s = lap_spec();
  s.upper.origin[2] = 1e-3;
  CHECK_THROWS_AS(build_lap_joint(s), Error);
}
