#include "doctest.h"

#include <random>

#include "jointbe/coupling.hpp"
#include "jointbe/error.hpp"
#include "jointbe/minifem.hpp"
#include "jointbe/rom.hpp"

using namespace jointbe;

namespace {

FixtureModel block_fixture() {
  BrickMeshSpec s;
  s.extents = {20e-3, 10e-3, 5e-3};
  s.elements = {8, 4, 2};
  s.material = {194e9, 0.2854, 7861};
  s.clamped_faces = {Face::x_min};
  s.interface_face = Face::z_max;
  return build_brick_model(s);
}

struct Lattice {
  std::vector<Point2> points;
  std::vector<int> ids;
};

// Cell centres of an nx x ny lattice covering [0, lx] x [0, ly].
Lattice lattice(int nx, int ny, double lx, double ly) {
  Lattice l;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      l.points.push_back({(i + 0.5) * lx / nx, (j + 0.5) * ly / ny});
      l.ids.push_back(j * nx + i);
    }
  }
  return l;
}

}  // namespace

TEST_CASE("bilinear weights: corners, unity, linear fields") {
  const std::array<Point2, 4> c{{{0, 0}, {2, 0}, {2.5, 1.5}, {-0.2, 1}}};
  for (int a = 0; a < 4; ++a) {
    const auto w = bilinear_weights(c, c[static_cast<std::size_t>(a)]);
    for (int b = 0; b < 4; ++b) CHECK(w[static_cast<std::size_t>(b)] == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-12));
  }
  const Point2 p{1.1, 0.7};
  const auto w = bilinear_weights(c, p);
  double sum = 0, x = 0, y = 0;
  for (int a = 0; a < 4; ++a) {
    sum += w[static_cast<std::size_t>(a)];
    x += w[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(a)].x;
    y += w[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(a)].y;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x == doctest::Approx(p.x).epsilon(1e-12));
  CHECK(y == doctest::Approx(p.y).epsilon(1e-12));
  CHECK_THROWS_AS(bilinear_weights(c, Point2{3.0, 0.1}), Error);
}

TEST_CASE("coupling interpolates nodal displacement fields") {
  const FixtureModel fx = block_fixture();
  const ReducedModel rom = craig_bampton(fx.model, 6);
  const Lattice l = lattice(16, 8, 20e-3, 10e-3);
  const CouplingMap cp = build_coupling(rom, fx.interface, l.points, l.ids);
  REQUIRE(cp.w_b.rows() == rom.n_boundary);
  REQUIRE(cp.w_b.cols() == 3 * int(l.points.size()));

  // A field linear in x and y on the free DOFs (zero on the clamped edge).
  Vec qb = Vec::Zero(rom.n_boundary);
  std::map<int, int> row;
  for (int i = 0; i < rom.n_boundary; ++i) row[rom.boundary_dofs[std::size_t(i)]] = i;
  const auto& im = fx.interface;
  auto field = [](Point2 p, int dir) { return p.x * (1.0 + dir) + 0.3 * p.x * p.y * (dir == 2); };
  for (std::size_t n = 0; n < im.node_xy.size(); ++n) {
    for (int dir = 0; dir < 3; ++dir) {
      const int dof = im.node_dofs[n][std::size_t(dir)];
      if (dof >= 0) qb(row[dof]) = field(im.node_xy[n], dir);
    }
  }
  const Vec u = cp.w_b.transpose() * qb;
  for (std::size_t j = 0; j < l.points.size(); ++j) {
    const Point2 p = l.points[j];
    CHECK(u(3 * int(j) + kTangent1) == doctest::Approx(field(p, 0)).epsilon(1e-12));
    CHECK(u(3 * int(j) + kTangent2) == doctest::Approx(field(p, 1)).epsilon(1e-12));
    CHECK(u(3 * int(j) + kNormal) == doctest::Approx(field(p, 2)).epsilon(1e-12));
  }
}

TEST_CASE("edge points go to the lowest face and orphans are reported") {
  const FixtureModel fx = block_fixture();
  const ReducedModel rom = craig_bampton(fx.model, 4);
  const std::vector<Point2> pts{{2.5e-3, 1.0e-3}, {5e-3, 2.5e-3}};
  const std::vector<int> ids{7, 8};
  const CouplingMap cp = build_coupling(rom, fx.interface, pts, ids);
  // x = 2.5 mm is the edge between faces 0 and 1 of the first row.
  CHECK(cp.face_of_point[0] == 0);
  // Corner shared by four faces: the lowest index is face 1 (second in row 0).
  CHECK(cp.face_of_point[1] == 1);

  const std::vector<Point2> bad{{1e-3, 1e-3}, {21e-3, 5e-3}};
  const std::vector<int> bad_ids{3, 42};
  try {
    build_coupling(rom, fx.interface, bad, bad_ids);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::input);
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
}

TEST_CASE("node mode matches face coupling at node positions") {
  const FixtureModel fx = block_fixture();
  const ReducedModel rom = craig_bampton(fx.model, 4);
  const CouplingMap nodes = node_coupling(rom, fx.interface);
  std::vector<int> ids(fx.interface.node_xy.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = int(i);
  const CouplingMap faces = build_coupling(rom, fx.interface, fx.interface.node_xy, ids);
  CHECK((nodes.w_b - faces.w_b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(nodes.node_based);
}

TEST_CASE("static condensation") {
  const FixtureModel fx = block_fixture();
  ReducedModel rom = craig_bampton(fx.model, 6);
  Vec f = Vec::Zero(rom.size());
  f(0) = 1.0;
  f(5) = -2.0;
  rom.loads["push"] = f;
  const Lattice l = lattice(8, 4, 20e-3, 10e-3);
  const ElasticHalfSpace hs{194e9, 0.2854};
  const ComplianceMatrix c = assemble_compliance(l.points, l.ids, 2.5e-3, 2.5e-3, hs, hs);
  const CouplingMap cp = build_coupling(rom, fx.interface, l.points, l.ids);
  std::vector<double> h(l.points.size(), -1e-6), area(l.points.size(), 6.25e-6);
  const CondensedSystem cs = condense_static(rom, cp, c, h, l.points, area);

  const Mat kbb = rom.kbb();
  const Mat expected = c.entries + cp.w_b.transpose() * kbb.ldlt().solve(cp.w_b);
  CHECK((cs.c_star - expected).cwiseAbs().maxCoeff() < 1e-9 * expected.cwiseAbs().maxCoeff());
  CHECK((cs.c_star - cs.c_star.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::LLT<Mat>(cs.c_star).info() == Eigen::Success);
  CHECK_FALSE(cs.direction_separable());
  CHECK(cs.heights(0) == -1e-6);
  CHECK(cs.heights(1) == 0.0);

  REQUIRE(cs.patterns.count("push") == 1);
  const Vec u = cp.w_b.transpose() * kbb.ldlt().solve(f.head(rom.n_boundary));
  CHECK((cs.patterns.at("push") - u).norm() < 1e-9 * u.norm());

  // Recovered boundary displacement reproduces the gap relation.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  Vec lam(cs.c_star.rows());
  for (int i = 0; i < lam.size(); ++i) lam(i) = d(rng);
  const Vec qb = cs.boundary_displacement(lam, Vec::Zero(rom.n_boundary));
  const Vec g1 = cs.c_star * lam;
  const Vec g2 = c.entries * lam + cp.w_b.transpose() * qb;
  CHECK((g1 - g2).norm() < 1e-9 * g1.norm());

  const CondensedSystem rigid = condense_static(rom, cp, c, h, l.points, area, {.rigid = true});
  CHECK(rigid.c_star == c.entries);
  CHECK(rigid.direction_separable());
  CHECK(rigid.patterns.at("approach")(0) == -1.0);
  CHECK(rigid.patterns.at("slide_x")(1) == 1.0);
  CHECK_THROWS_AS(rigid.pattern_for(f), Error);
}

TEST_CASE("condensation rejects inconsistent inputs") {
  const FixtureModel fx = block_fixture();
  const ReducedModel rom = craig_bampton(fx.model, 4);
  const Lattice l = lattice(4, 2, 20e-3, 10e-3);
  const ElasticHalfSpace hs{194e9, 0.2854};
  const ComplianceMatrix c = assemble_compliance(l.points, l.ids, 5e-3, 5e-3, hs, hs);
  const CouplingMap cp = build_coupling(rom, fx.interface, l.points, l.ids);
  std::vector<double> h(l.points.size(), 0.0), area(l.points.size(), 25e-6);
  std::vector<double> short_h(3, 0.0);
  CHECK_THROWS_AS(condense_static(rom, cp, c, short_h, l.points, area), Error);
  h[2] = std::nan("");
  CHECK_THROWS_AS(condense_static(rom, cp, c, h, l.points, area), Error);
}
