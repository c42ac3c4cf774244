#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "jointbe/contact.hpp"
#include "jointbe/error.hpp"
#include "jointbe/minifem.hpp"
#include "jointbe/qsma.hpp"

using namespace jointbe;

namespace {

// One contact point on a 3-DOF base of stiffness k0 and unit mass: the
// tangential response is a Jenkins element (k, f_s) in parallel with k0.
struct Jenkins {
  double k0 = 1e6, k = 1e7, kn = 1e8, preload = 100.0, mu = 0.5;
  ReducedModel rom;
  CondensedSystem cs;
  ContactState pre;
  ModeShape mode;

  double slip_force() const { return mu * preload; }

  Jenkins() {
    rom.n_boundary = 3;
    rom.n_modes = 0;
    rom.m_red = Mat::Identity(3, 3);
    rom.k_red = k0 * Mat::Identity(3, 3);
    rom.basis = Mat::Identity(3, 3);
    rom.boundary_dofs = {0, 1, 2};
    rom.fixed_interface_omega = Vec(0);
    CouplingMap cp;
    cp.w_b = Mat::Identity(3, 3);
    cp.point_index = {0};
    cp.face_of_point = {-1};
    ComplianceMatrix c;
    c.entries = Mat::Zero(3, 3);
    c.entries.diagonal() << 1 / kn, 1 / k, 1 / k;
    c.point_index = {0};
    Vec f = Vec::Zero(3);
    f(0) = -preload * (1 + k0 / kn);
    rom.loads["preload"] = f;
    const std::vector<double> h{0.0}, area{1.0};
    const std::vector<Point2> pos{{0, 0}};
    cs = condense_static(rom, cp, c, h, pos, area);
    ContactSolver solver(cs, mu);
    pre = solver.step(ContactState::initial(cs, mu), cs.patterns.at("preload"));
    mode.phi = Vec::Unit(3, kTangent1);
    mode.omega = std::sqrt(k0);
    mode.id = 1;
  }
};

std::vector<double> uniform(double a_max, int n) {
  std::vector<double> a;
  for (int i = 1; i <= n; ++i) a.push_back(a_max * i / n);
  return a;
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

TEST_CASE("Jenkins fixture: preload and modal load quantities") {
  Jenkins j;
  CHECK(j.pre.force(0) == doctest::Approx(j.preload).epsilon(1e-10));
  const ModalLoad load = modal_load(j.rom, j.cs, j.mode);
  CHECK(load.q_per_alpha == doctest::Approx(1 / j.k0));
  CHECK(load.q_per_force(kTangent1) == doctest::Approx(1 / j.k0));
  CHECK(load.gap_pattern(kTangent1) == doctest::Approx(1 / j.k0));
}

TEST_CASE("Jenkins fixture: dissipated energy and Masing versus direct cycle") {
  Jenkins j;
  ContactSolver solver(j.cs, j.mu);
  const ModalLoad load = modal_load(j.rom, j.cs, j.mode);
  const double fs = j.slip_force();
  const double knee = fs * (j.k0 + j.k) / j.k;
  const double a_hat = 4 * knee;
  const HysteresisRecord rec = modal_load_sweep(solver, j.pre, load, uniform(a_hat, 100), 1);
  REQUIRE(rec.failure.empty());
  REQUIRE(rec.alpha.size() == 101);

  // stick branch slope
  CHECK(rec.q_pos[10] == doctest::Approx(rec.alpha[10] / (j.k0 + j.k)).epsilon(1e-9));
  const ModalPoint p = modal_properties(rec, a_hat, 100);
  const double q_hat = (a_hat - fs) / j.k0;
  CHECK(p.q_hat == doctest::Approx(q_hat).epsilon(1e-9));
  const double e_ref = 4 * fs * (q_hat - fs / j.k);
  CHECK(std::abs(p.energy - e_ref) <= 0.01 * e_ref);
  const double d_ref = e_ref / (2 * std::numbers::pi * a_hat * q_hat);
  CHECK(std::abs(p.damping - d_ref) <= 0.02 * d_ref);
  CHECK(p.omega == doctest::Approx(std::sqrt(a_hat / q_hat)).epsilon(1e-9));

  const HysteresisLoop direct = direct_cycle(solver, j.pre, load, a_hat, 100);
  const double e_direct = loop_energy(direct);
  CHECK(std::abs(e_direct - e_ref) <= 0.01 * e_ref);
  CHECK(std::abs(p.energy - e_direct) <= 0.005 * e_direct);
  CHECK(direct.q.back() == doctest::Approx(direct.q.front()).epsilon(1e-9));
}

TEST_CASE("below the knee the loading curve is linear and nothing dissipates") {
  Jenkins j;
  ContactSolver solver(j.cs, j.mu);
  const ModalLoad load = modal_load(j.rom, j.cs, j.mode);
  const double knee = j.slip_force() * (j.k0 + j.k) / j.k;
  const HysteresisRecord rec = modal_load_sweep(solver, j.pre, load, uniform(0.9 * knee, 20), 3);
  const ModalPoint p = modal_properties(rec, 0.9 * knee);
  CHECK(std::abs(p.damping) < 1e-12);
  CHECK(p.omega == doctest::Approx(std::sqrt(j.k0 + j.k)).epsilon(1e-9));
}

TEST_CASE("Masing loop closes and is point symmetric") {
  Jenkins j;
  ContactSolver solver(j.cs, j.mu);
  const ModalLoad load = modal_load(j.rom, j.cs, j.mode);
  const HysteresisRecord rec = modal_load_sweep(solver, j.pre, load, uniform(300.0, 60), 2);
  const HysteresisLoop loop = masing_cycle(rec, 250.0, 50);
  REQUIRE(loop.alpha.size() == 201);
  CHECK(loop.q.front() == loop.q.back());
  for (std::size_t i = 0; i <= 100; ++i) {
    CHECK(loop.alpha[i + 100] == doctest::Approx(-loop.alpha[i]).scale(250.0));
    CHECK(loop.q[i + 100] == doctest::Approx(-loop.q[i]).epsilon(1e-9).scale(1e-4));
  }
  CHECK_THROWS_AS(masing_cycle(rec, 301.0), Error);
}

TEST_CASE("linear test hook recovers the linear eigenfrequency") {
  const FixtureModel fx = block_fixture();
  const ReducedModel rom = craig_bampton(fx.model, 10);
  const Mat kb = 1e9 * Mat::Identity(rom.n_boundary, rom.n_boundary);
  const auto modes = modes_with_stiffness(rom, kb, 3);
  Mat k = rom.k_red;
  k.topLeftCorner(rom.n_boundary, rom.n_boundary) += kb;
  for (const auto& m : modes) {
    CHECK(m.phi.dot(rom.m_red * m.phi) == doctest::Approx(1.0).epsilon(1e-10));
    const HysteresisRecord rec = linear_sweep(k, rom.m_red, m.phi, {1.0, 2.0, 5.0});
    const ModalPoint p = modal_properties(rec, 5.0);
    CHECK(std::abs(p.omega / m.omega - 1) < 1e-3);
    CHECK(std::abs(p.damping) <= 1e-10);
  }
}

TEST_CASE("tied and free interface spectra bracket the linearized one") {
  const FixtureModel fx = block_fixture();
  const ReducedModel rom = craig_bampton(fx.model, 12);
  // tying every relative boundary DOF leaves the fixed-interface modes
  const auto tied = constrained_modes(rom, Mat::Identity(rom.n_boundary, rom.n_boundary), 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(tied[std::size_t(i)].omega == doctest::Approx(rom.fixed_interface_omega(i)).epsilon(1e-9));
  }
  const auto free_modes = modes_with_stiffness(rom, Mat(), 4);
  const auto stiff = modes_with_stiffness(rom, 1e8 * Mat::Identity(rom.n_boundary, rom.n_boundary), 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(free_modes[std::size_t(i)].omega <= stiff[std::size_t(i)].omega);
    CHECK(stiff[std::size_t(i)].omega <= tied[std::size_t(i)].omega * (1 + 1e-12));
  }
}

TEST_CASE("linearization uses only closed points") {
  Jenkins j;
  const auto closed = linearized_modes(j.rom, j.cs, j.pre, 3);
  // normal: k0 + kn, tangential: k0 + k
  CHECK(closed[0].omega == doctest::Approx(std::sqrt(j.k0 + j.k)).epsilon(1e-9));
  CHECK(closed[2].omega == doctest::Approx(std::sqrt(j.k0 + j.kn)).epsilon(1e-9));
  const ContactState open = ContactState::initial(j.cs, j.mu);
  const ContactState lifted = [&] {
    ContactState s = open;
    s.gap(0) = 1e-6;
    return s;
  }();
  const auto free_modes = linearized_modes(j.rom, j.cs, lifted, 3);
  CHECK(free_modes[0].omega == doctest::Approx(std::sqrt(j.k0)).epsilon(1e-9));
  // node mode: C = 0 ties the point, which removes every coordinate here
  CondensedSystem tied = j.cs;
  tied.c_be.setZero();
  CHECK_THROWS_AS(linearized_modes(j.rom, tied, j.pre, 1), Error);
}

TEST_CASE("rigid-body modes are reported") {
  ReducedModel rom;
  rom.n_boundary = 2;
  rom.n_modes = 0;
  rom.m_red = Mat::Identity(2, 2);
  rom.k_red = Mat::Zero(2, 2);
  rom.k_red(1, 1) = 1.0;
  CHECK_THROWS_AS(modes_with_stiffness(rom, Mat(), 1), Error);
}

TEST_CASE("modal curves CSV round trip") {
  const std::vector<ModalCurveRow> rows{{1, 1.25e-7, 1234.5, 0.99, 1e-3}, {2, 3e-6, 4321.0, 0.9, 2.5e-2}};
  const auto path = std::filesystem::temp_directory_path() / "jointbe_modal_curves.csv";
  write_modal_curves(path, rows);
  const auto back = read_modal_curves(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].mode == 2);
  CHECK(back[1].amplitude == rows[1].amplitude);
  CHECK(back[0].omega_over_lin == rows[0].omega_over_lin);
  CHECK(back[1].damping == rows[1].damping);
  std::filesystem::remove(path);
}
