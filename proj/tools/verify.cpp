#include "verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "jointbe/error.hpp"
#include "jointbe/qsma.hpp"

namespace jointbe::verify {

namespace {

constexpr double kPi = std::numbers::pi;

Mat random_spd(int n, std::mt19937_64& rng, double shift) {
  std::normal_distribution<double> d;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = d(rng);
  return a * a.transpose() + shift * Mat::Identity(n, n);
}

double rel(double value, double ref) { return std::abs(value / ref - 1.0); }

// Normal-only LCP by enumerating all contact sets: x >= 0, y = Gx + c >= 0, x.y = 0.
Vec lcp_enumerate(const Mat& g, const Vec& c, int& solutions) {
  const int n = static_cast<int>(c.size());
  Vec found = Vec::Zero(n);
  solutions = 0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<int> act;
    for (int j = 0; j < n; ++j)
      if (mask & (1 << j)) act.push_back(j);
    Vec x = Vec::Zero(n);
    if (!act.empty()) {
      const int m = static_cast<int>(act.size());
      Mat a(m, m);
      Vec b(m);
      for (int p = 0; p < m; ++p) {
        b(p) = -c(act[p]);
        for (int q = 0; q < m; ++q) a(p, q) = g(act[p], act[q]);
      }
      const Vec xa = a.ldlt().solve(b);
      for (int p = 0; p < m; ++p) x(act[p]) = xa(p);
    }
    const Vec y = g * x + c;
    if (x.minCoeff() >= -1e-13 && y.minCoeff() >= -1e-13) {
      ++solutions;
      found = x;
    }
  }
  return found;
}

FeModel dense_model(const Mat& k, const Mat& m, std::vector<int> boundary) {
  FeModel f;
  f.stiffness = k.sparseView();
  f.mass = m.sparseView();
  f.boundary_dofs = std::move(boundary);
  f.dofs.resize(static_cast<std::size_t>(k.rows()));
  return f;
}

FixtureModel block_fixture(std::array<int, 3> elements) {
  BrickMeshSpec s;
  s.extents = {20e-3, 10e-3, 5e-3};
  s.elements = elements;
  s.material = {194e9, 0.2854, 7861};
  s.clamped_faces = {Face::x_min};
  s.interface_face = Face::z_max;
  return build_brick_model(s);
}

// One contact point on a three-DOF base of stiffness k0: tangentially a Jenkins
// element (k, mu P) in parallel with k0.
struct Jenkins {
  double k0 = 1e6, k = 1e7, kn = 1e8, preload = 100.0, mu = 0.5;
  ReducedModel rom;
  CondensedSystem cs;
  ContactState pre;
  ModeShape mode;

  Jenkins() {
    rom.n_boundary = 3;
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

Check make(int id, std::string title) {
  Check c;
  c.id = id;
  c.title = std::move(title);
  return c;
}

}  // namespace

Suite::Suite(std::filesystem::path config_dir) : dir_(std::move(config_dir)) {}

std::vector<int> Suite::criteria(const std::string& suite) {
  if (suite == "analytic") return {1, 2, 3, 4, 11};
  if (suite == "oracle") return {5, 6, 7, 8, 9};
  if (suite == "fixture") return {10, 12};
  if (suite == "all") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  throw Error(ErrorCategory::config, "unknown verification suite '" + suite + "' (analytic, oracle, fixture, all)");
}

std::vector<std::string> Suite::bundled_cases() {
  return {"hertz", "mindlin", "flat_punch", "lapjoint_form", "lapjoint_rough"};
}

const Suite::Bundled& Suite::bundled(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  RunConfig cfg = load_run_config(dir_ / (name + ".cfg"));
  cfg.output_directory.clear();
  cfg.write_step_states = false;
  spdlog::info("running bundled case {}", name);
  Bundled b;
  b.result = run_case(cfg);
  CondensedSystem& cs = b.result.system;
  b.c_star_asymmetry = (cs.c_star - cs.c_star.transpose()).cwiseAbs().maxCoeff() /
                       std::max(cs.c_star.cwiseAbs().maxCoeff(), 1e-300);
  b.c_star_spd = Eigen::LLT<Mat>(cs.c_star).info() == Eigen::Success;
  if (name == "flat_punch") {
    const Vec u = cs.c_be * b.result.preload_state.force;
    const BeGrid& g = cfg.grid;
    double lo = 1e300, hi = -1e300, sum = 0;
    int n = 0;
    for (int j = 0; j < cs.point_count(); ++j) {
      const int id = cs.point_index[static_cast<std::size_t>(j)];
      const int ix = g.ix(id), iy = g.iy(id);
      if (ix == 0 || iy == 0 || ix == g.nx - 1 || iy == g.ny - 1) continue;
      lo = std::min(lo, u(3 * j));
      hi = std::max(hi, u(3 * j));
      sum += u(3 * j);
      ++n;
    }
    b.punch_spread = (hi - lo) / std::abs(sum / n);
  }
  // The dense matrices are not needed by any later check.
  cs.c_star.resize(0, 0);
  cs.c_be.resize(0, 0);
  cs.w_b.resize(0, 0);
  return cache_.emplace(name, std::move(b)).first->second;
}

Check Suite::run(int id) {
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  try {
    switch (id) {
      case 1: c = self_influence(); break;
      case 2: c = hertz(); break;
      case 3: c = mindlin(); break;
      case 4: c = flat_punch(); break;
      case 5: c = pjor_enumeration(); break;
      case 6: c = condensation(); break;
      case 7: c = craig_bampton_exactness(); break;
      case 8: c = linear_limit(); break;
      case 9: c = jenkins(); break;
      case 10: c = fixture_trends(); break;
      case 11: c = roughness(); break;
      case 12: c = invariants(); break;
      default: throw Error(ErrorCategory::config, "no acceptance check " + std::to_string(id));
    }
  } catch (const std::exception& e) {
    c = make(id, "check");
    c.pass = false;
    c.detail = std::string("error: ") + e.what();
  }
  c.id = id;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

Check Suite::self_influence() {
  Check c = make(1, "self influence coefficient");
  const ElasticHalfSpace hs{210e9, 0.3};
  const double a = 0.25e-3;
  const InfluenceBlock b = influence_coefficients(0, 0, a, a, hs);
  const double nu = hs.poisson_ratio;
  const double ref = 4 * (1 - nu * nu) * std::log(1 + std::sqrt(2.0)) / (kPi * hs.youngs_modulus * a);
  const double err = rel(b.c_zz, ref);
  c.pass = err <= 1e-12;
  c.detail = fmt::format("c_zz {:.15e} m/N, closed form {:.15e}, rel err {:.1e} (<= 1e-12)", b.c_zz, ref, err);
  return c;
}

Check Suite::hertz() {
  Check c = make(2, "Hertz contact");
  const RunResult& r = bundled("hertz").result;
  const RunConfig& cfg = r.config;
  const double nu = cfg.material.poisson_ratio;
  const double estar = cfg.material.youngs_modulus / (2 * (1 - nu * nu));
  const double p = cfg.preload.force, radius = cfg.topography.sphere_radius;
  const double a_ref = std::cbrt(3 * p * radius / (4 * estar));
  const double p0_ref = 3 * p / (2 * kPi * a_ref * a_ref);
  const double area = cfg.grid.element_area();
  const Point2 o = cfg.topography.center;

  // Contact radius from a least-squares fit of p^2 = p0^2 (1 - r^2 / a^2) over the
  // inner part of the contact; the count-based radius only selects that part.
  const auto& s = r.preload_state;
  int closed = 0;
  double p_max = 0;
  for (int j = 0; j < s.point_count(); ++j) {
    if (s.force(3 * j) > 0) ++closed;
    p_max = std::max(p_max, s.force(3 * j) / area);
  }
  const double a_count = std::sqrt(closed * area / kPi);
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Eigen::Vector2d atb = Eigen::Vector2d::Zero();
  for (int j = 0; j < s.point_count(); ++j) {
    const Point2 q = r.system.positions[static_cast<std::size_t>(j)];
    const double r2 = (q.x - o.x) * (q.x - o.x) + (q.y - o.y) * (q.y - o.y);
    if (s.force(3 * j) <= 0 || r2 >= 0.64 * a_count * a_count) continue;
    const double pj = s.force(3 * j) / area;
    const Eigen::Vector2d row(1.0, r2);
    ata += row * row.transpose();
    atb += row * pj * pj;
  }
  const Eigen::Vector2d fit = ata.ldlt().solve(atb);
  const double a_fit = std::sqrt(-fit(0) / fit(1));
  const double across = 2 * a_ref / cfg.grid.pitch_x;
  const double ea = rel(a_fit, a_ref), ep = rel(p_max, p0_ref);
  c.pass = ea <= 0.02 && ep <= 0.02 && across >= 40;
  c.detail = fmt::format("a {:.4e} m vs {:.4e} ({:.2f}%), p0 {:.4e} Pa vs {:.4e} ({:.2f}%), {:.1f} elements across",
                         a_fit, a_ref, 100 * ea, p_max, p0_ref, 100 * ep, across);
  return c;
}

Check Suite::mindlin() {
  Check c = make(3, "Cattaneo-Mindlin partial slip");
  const RunResult& r = bundled("mindlin").result;
  const RunConfig& cfg = r.config;
  const double nu = cfg.material.poisson_ratio;
  const double estar = cfg.material.youngs_modulus / (2 * (1 - nu * nu));
  const double p = cfg.preload.force, q = cfg.preload.tangential_force, mu = cfg.mu;
  const double a = std::cbrt(3 * p * cfg.topography.sphere_radius / (4 * estar));
  const double p0 = 3 * p / (2 * kPi * a * a);
  const double c_ref = a * std::cbrt(1 - q / (mu * p));
  const double area = cfg.grid.element_area();
  const Point2 o = cfg.topography.center;
  const auto& s = r.final_state;
  int stick = 0, slip = 0;
  double worst = 0;
  for (int j = 0; j < s.point_count(); ++j) {
    const auto st = s.status(j);
    if (st == PointStatus::stick) ++stick;
    if (st != PointStatus::slip) continue;
    ++slip;
    const Point2 x = r.system.positions[static_cast<std::size_t>(j)];
    const double rr = std::hypot(x.x - o.x, x.y - o.y);
    if (rr > 0.9 * a) continue;
    const double t = std::hypot(s.force(3 * j + 1), s.force(3 * j + 2)) / area;
    const double ref = mu * p0 * std::sqrt(1 - rr * rr / (a * a));
    worst = std::max(worst, std::abs(t / ref - 1));
  }
  const double c_num = std::sqrt(stick * area / kPi);
  const double ec = rel(c_num, c_ref);
  c.pass = ec <= 0.05 && worst <= 0.05 && slip > 0;
  c.detail = fmt::format("stick radius {:.4e} m vs {:.4e} ({:.2f}%), slip tractions within {:.2f}% of mu p ({} slip points)",
                         c_num, c_ref, 100 * ec, 100 * worst, slip);
  return c;
}

Check Suite::flat_punch() {
  Check c = make(4, "flat punch equilibrium");
  const Bundled& b = bundled("flat_punch");
  const double p = b.result.config.preload.force;
  const double balance = std::abs(b.result.preload_state.normal_resultant() - p) / p;
  c.pass = balance <= 1e-8 && b.punch_spread <= 0.01;
  c.detail = fmt::format("force balance {:.2e} (<= 1e-8), interior displacement spread {:.2e} (<= 1e-2)", balance,
                         b.punch_spread);
  return c;
}

Check Suite::pjor_enumeration() {
  Check c = make(5, "PJOR vs enumeration");
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> d;
  double worst = 0;
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    Mat g = random_spd(n, rng, 0.1 * n);
    const Vec dinv = g.diagonal().cwiseSqrt().cwiseInverse();
    g = dinv.asDiagonal() * g * dinv.asDiagonal();
    Vec cv(n);
    for (int i = 0; i < n; ++i) cv(i) = d(rng);
    cv /= cv.cwiseAbs().maxCoeff();
    int solutions = 0;
    const Vec ref = lcp_enumerate(g, cv, solutions);
    if (solutions != 1) throw Error(ErrorCategory::numerical, "LCP oracle found no unique solution");
    const PjorResult res = pjor_solve(g, cv, 0.0, Vec::Zero(n), PjorOptions{}, true);
    worst = std::max(worst, (res.x - ref).cwiseAbs().maxCoeff());
    ++compared;
  }
  c.pass = compared == 200 && worst <= 1e-8;
  c.detail = fmt::format("{} instances, max |x - x_enum| {:.2e} (<= 1e-8)", compared, worst);
  return c;
}

Check Suite::condensation() {
  Check c = make(6, "condensation equivalence");
  std::mt19937_64 rng(77);
  std::normal_distribution<double> d;
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 14, nb = 6;
    const Mat k = random_spd(n, rng, n);
    const Mat m = random_spd(n, rng, n);
    std::vector<int> boundary;
    for (int i = 0; i < nb; ++i) boundary.push_back(2 * i + 1);
    const FeModel fe = dense_model(k, m, boundary);
    ReducedModel rom = craig_bampton(fe, 4);
    Vec f(n);
    for (int i = 0; i < n; ++i) f(i) = d(rng);
    rom.loads["f"] = rom.reduce_load(f);

    CouplingMap cp;
    cp.w_b = Mat(nb, nb);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) cp.w_b(i, j) = d(rng);
    cp.w_b += 3 * Mat::Identity(nb, nb);
    cp.point_index = {0, 1};
    cp.face_of_point = {-1, -1};
    ComplianceMatrix cm;
    cm.entries = 0.01 * random_spd(nb, rng, 1.0);
    cm.point_index = {0, 1};
    const std::vector<double> h{-0.3, 0.2}, area{1.0, 1.0};
    const std::vector<Point2> pos{{0, 0}, {1, 0}};
    const CondensedSystem cs = condense_static(rom, cp, cm, h, pos, area);
    const Vec g_ex = cs.patterns.at("f") - cs.heights;

    // Direct: full FE model and contact forces with every gap closed.
    Mat big = Mat::Zero(n + nb, n + nb);
    Vec rhs = Vec::Zero(n + nb);
    big.topLeftCorner(n, n) = k;
    for (int i = 0; i < nb; ++i) {
      for (int j = 0; j < nb; ++j) {
        big(boundary[static_cast<std::size_t>(i)], n + j) = -cp.w_b(i, j);
        big(n + j, boundary[static_cast<std::size_t>(i)]) = cp.w_b(i, j);
      }
    }
    big.bottomRightCorner(nb, nb) = cm.entries;
    rhs.head(n) = f;
    rhs.tail(nb) = cs.heights;
    const Vec sol = big.fullPivLu().solve(rhs);
    const Vec lam_direct = sol.tail(nb);
    Vec qb_direct(nb);
    for (int i = 0; i < nb; ++i) qb_direct(i) = sol(boundary[static_cast<std::size_t>(i)]);

    // Condensed: C* lambda + g_ex = 0.
    const Vec lam_cond = cs.c_star.ldlt().solve(-g_ex);
    const Vec qb_cond = cs.boundary_displacement(lam_cond, rom.loads.at("f").head(rom.n_boundary));

    // Active-set Schur form: point 1 active, point 0 sticking.
    const DelassusProblem dp = build_delassus(cs.c_star, {0}, {1}, g_ex);
    const Vec x = dp.g_mat.ldlt().solve(-dp.c_vec);
    const Mat css = cs.c_star.topLeftCorner(3, 3), csa = cs.c_star.topRightCorner(3, 3);
    Vec lam_schur(nb);
    lam_schur.tail(3) = x;
    lam_schur.head(3) = css.ldlt().solve(-(g_ex.head(3) + csa * x));

    const double scale = lam_direct.cwiseAbs().maxCoeff();
    worst = std::max({worst, (lam_cond - lam_direct).cwiseAbs().maxCoeff() / scale,
                      (lam_schur - lam_direct).cwiseAbs().maxCoeff() / scale,
                      (qb_cond - qb_direct).cwiseAbs().maxCoeff() / qb_direct.cwiseAbs().maxCoeff()});
  }
  c.pass = worst <= 1e-10;
  c.detail = fmt::format("10 random instances, direct / condensed / Schur max rel difference {:.2e} (<= 1e-10)", worst);
  return c;
}

Check Suite::craig_bampton_exactness() {
  Check c = make(7, "Craig-Bampton exactness");
  // Static boundary compliance on the lap-joint fixture.
  const LapJoint lj = build_lap_joint(default_lap_joint({194e9, 0.2854, 7861}, 5710));
  const FeModel& f = lj.fixture.model;
  const ReducedModel r = craig_bampton(f, 5);
  const int nb = r.n_boundary;
  Eigen::SimplicialLDLT<SpMat> full(f.stiffness);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  Mat fb(nb, 3);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < 3; ++j) fb(i, j) = d(rng);
  const Mat red = r.kbb().ldlt().solve(fb);
  double static_err = 0;
  for (int j = 0; j < 3; ++j) {
    Vec load = Vec::Zero(f.size());
    for (int i = 0; i < nb; ++i) load(f.boundary_dofs[static_cast<std::size_t>(i)]) = fb(i, j);
    const Vec q = full.solve(load);
    Vec qb(nb);
    for (int i = 0; i < nb; ++i) qb(i) = q(f.boundary_dofs[static_cast<std::size_t>(i)]);
    static_err = std::max(static_err, (red.col(j) - qb).norm() / qb.norm());
  }

  // Complete modal basis on a small block.
  const FixtureModel blk = block_fixture({3, 2, 1});
  const int n = blk.model.size();
  const int nbb = static_cast<int>(blk.model.boundary_dofs.size());
  const ReducedModel rb = craig_bampton(blk.model, n - nbb);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ef(Mat(blk.model.stiffness), Mat(blk.model.mass));
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> er(rb.k_red, rb.m_red);
  double eig_err = 0;
  for (int i = 0; i < n; ++i) eig_err = std::max(eig_err, rel(er.eigenvalues()(i), ef.eigenvalues()(i)));
  c.pass = static_err <= 1e-10 && eig_err <= 1e-9;
  c.detail = fmt::format("fixture boundary compliance rel err {:.2e} (<= 1e-10), complete basis eigenvalues {:.2e} "
                         "(<= 1e-9, {} DOFs)",
                         static_err, eig_err, n);
  return c;
}

Check Suite::linear_limit() {
  Check c = make(8, "QSMA linear limit");
  const FixtureModel fx = block_fixture({8, 4, 2});
  const ReducedModel rom = craig_bampton(fx.model, 10);
  const Mat kb = 1e9 * Mat::Identity(rom.n_boundary, rom.n_boundary);
  const auto modes = modes_with_stiffness(rom, kb, 3);
  Mat k = rom.k_red;
  k.topLeftCorner(rom.n_boundary, rom.n_boundary) += kb;
  double werr = 0, dmax = 0;
  for (const auto& m : modes) {
    const HysteresisRecord rec = linear_sweep(k, rom.m_red, m.phi, {1.0, 2.0, 5.0});
    const ModalPoint p = modal_properties(rec, 5.0);
    werr = std::max(werr, rel(p.omega, m.omega));
    dmax = std::max(dmax, std::abs(p.damping));
  }
  c.pass = werr <= 1e-3 && dmax <= 1e-10;
  c.detail = fmt::format("3 modes, omega rel err {:.2e} (<= 1e-3), |D| {:.2e} (<= 1e-10)", werr, dmax);
  return c;
}

Check Suite::jenkins() {
  Check c = make(9, "Jenkins oracle");
  Jenkins j;
  ContactSolver solver(j.cs, j.mu);
  const ModalLoad load = modal_load(j.rom, j.cs, j.mode);
  const double fs = j.mu * j.preload;
  const double a_hat = 4 * fs * (j.k0 + j.k) / j.k;
  std::vector<double> alphas;
  for (int i = 1; i <= 100; ++i) alphas.push_back(a_hat * i / 100);
  const HysteresisRecord rec = modal_load_sweep(solver, j.pre, load, alphas, 1);
  if (!rec.failure.empty()) throw Error(ErrorCategory::solver, rec.failure);
  const ModalPoint p = modal_properties(rec, a_hat, 100);
  const double q_hat = (a_hat - fs) / j.k0;
  const double e_ref = 4 * fs * (q_hat - fs / j.k);
  const double e_direct = loop_energy(direct_cycle(solver, j.pre, load, a_hat, 100));
  const double err_ref = rel(p.energy, e_ref), err_direct = rel(p.energy, e_direct);
  c.pass = err_ref <= 0.01 && err_direct <= 0.005;
  c.detail = fmt::format("E_diss {:.6e} vs analytic {:.6e} ({:.3f}%), Masing vs direct cycle {:.3f}%", p.energy, e_ref,
                         100 * err_ref, 100 * err_direct);
  return c;
}

Check Suite::fixture_trends() {
  Check c = make(10, "lap-joint fixture trends");
  const RunResult& r = bundled("lapjoint_form").result;
  if (r.modal.empty()) throw Error(ErrorCategory::config, "lapjoint_form has no modal analysis");
  const ModalResult& m = r.modal.front();
  std::vector<ModalCurveRow> rows;
  for (const auto& row : r.curves)
    if (row.mode == m.mode) rows.push_back(row);
  double d_min = 1e300, jump = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d_min = std::min(d_min, rows[i].damping);
    if (i > 0) jump = std::max(jump, rel(rows[i].omega, rows[i - 1].omega));
  }
  // Partial slip: samples that dissipate measurably. Longest run over which the
  // frequency does not rise and the damping does not fall.
  std::size_t best_lo = 0, best_hi = 0;
  for (std::size_t lo = 0; lo < rows.size(); ++lo) {
    if (rows[lo].damping <= 1e-9) continue;
    std::size_t hi = lo;
    while (hi + 1 < rows.size() && rows[hi + 1].omega_over_lin <= rows[hi].omega_over_lin * (1 + 1e-12) &&
           rows[hi + 1].damping >= rows[hi].damping)
      ++hi;
    if (hi - lo > best_hi - best_lo) {
      best_lo = lo;
      best_hi = hi;
    }
  }
  double run_d_min = 1e300;
  for (std::size_t i = best_lo; i <= best_hi && i < rows.size(); ++i) run_d_min = std::min(run_d_min, rows[i].damping);
  const double span = rows.empty() ? 0 : rows[best_hi].amplitude / rows[best_lo].amplitude;
  const double d_ratio = rows.empty() || rows[best_lo].damping <= 0 ? 0 : rows[best_hi].damping / rows[best_lo].damping;
  c.pass = !rows.empty() && span >= 10 && d_ratio >= 5 && run_d_min >= -1e-12;
  c.detail = fmt::format("mode {}: monotone over amplitudes {:.3e}..{:.3e} m ({:.1f}x), D {:.2e} -> {:.2e} ({:.1f}x), "
                         "omega/omega_lin {:.5f} -> {:.5f}, min D over all samples {:.1e}, max adjacent omega change {:.2f}%",
                         m.mode, rows.empty() ? 0 : rows[best_lo].amplitude, rows.empty() ? 0 : rows[best_hi].amplitude,
                         span, rows.empty() ? 0 : rows[best_lo].damping, rows.empty() ? 0 : rows[best_hi].damping,
                         d_ratio, rows.empty() ? 0 : rows[best_lo].omega_over_lin,
                         rows.empty() ? 0 : rows[best_hi].omega_over_lin, d_min, 100 * jump);
  return c;
}

Check Suite::roughness() {
  Check c = make(11, "roughness generator");
  const BeGrid g{48, 40, 0.1e-3, 0.1e-3, 0.0, 0.0};
  const RoughnessSpec spec{1e-6, 0.63e-3, 2.5e-3, 42};  // band edges off the DFT lattice
  const HeightProfile a = synthesize_roughness(g, spec);
  const HeightProfile b = synthesize_roughness(g, spec);
  RoughnessSpec other = spec;
  other.seed = 43;
  const bool deterministic = a.heights == b.heights && synthesize_roughness(g, other).heights != a.heights;

  double mean = 0;
  for (double h : a.heights) mean += h;
  mean /= static_cast<double>(a.heights.size());
  double var = 0;
  for (double h : a.heights) var += (h - mean) * (h - mean);
  const double std_err = rel(std::sqrt(var / static_cast<double>(a.heights.size())), spec.sigma);

  // Plain DFT, independent of the generator's FFT.
  const double lx = g.nx * g.pitch_x, ly = g.ny * g.pitch_y;
  double in_max = 0, out_max = 0;
  for (int ky = 0; ky < g.ny; ++ky) {
    for (int kx = 0; kx < g.nx; ++kx) {
      std::complex<double> s = 0;
      for (int y = 0; y < g.ny; ++y)
        for (int x = 0; x < g.nx; ++x)
          s += a.heights[static_cast<std::size_t>(g.id(x, y))] *
               std::polar(1.0, -2 * kPi * (double(kx * x) / g.nx + double(ky * y) / g.ny));
      const int mx = kx <= (g.nx - 1) / 2 ? kx : kx - g.nx;
      const int my = ky <= (g.ny - 1) / 2 ? ky : ky - g.ny;
      const double fr = std::hypot(mx / lx, my / ly);
      const bool in = fr > 0 && 1 / fr >= spec.lambda_min && 1 / fr <= spec.lambda_max;
      (in ? in_max : out_max) = std::max(in ? in_max : out_max, std::abs(s));
    }
  }
  const double leak = out_max / in_max;
  c.pass = deterministic && std_err <= 1e-12 && leak <= 1e-12;
  c.detail = fmt::format("std rel err {:.1e} (<= 1e-12), out-of-band / in-band magnitude {:.1e}, seeded repeat {}",
                         std_err, leak, deterministic ? "bit-identical" : "differs");
  return c;
}

Check Suite::invariants() {
  Check c = make(12, "invariant suite");
  std::vector<std::string> parts;
  bool all = true;
  for (const auto& name : bundled_cases()) {
    const Bundled& b = bundled(name);
    const InvariantStats& s = b.result.invariants;
    const bool ok = s.ok() && b.c_star_spd && b.c_star_asymmetry <= 1e-12 && s.steps > 0;
    all = all && ok;
    parts.push_back(fmt::format("{} {} steps {} (cone {:.0e}, compl {:.0e}, diss {:.0e}, balance {:.0e})", name,
                                s.steps, ok ? "ok" : "FAIL", s.worst.cone_excess, s.worst.complementarity,
                                s.worst.dissipation, s.force_balance));
  }
  c.pass = all;
  c.detail = fmt::format("{}", fmt::join(parts, "; "));
  return c;
}

std::string format_line(const Check& c) {
  return fmt::format("{} AC{} {}: {} [{:.1f} s]", c.pass ? "PASS" : "FAIL", c.id, c.title, c.detail, c.seconds);
}

std::string to_json(const std::vector<Check>& checks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : checks) {
    j.push_back({{"id", "AC" + std::to_string(c.id)},
                 {"title", c.title},
                 {"pass", c.pass},
                 {"detail", c.detail},
                 {"seconds", c.seconds}});
  }
  return j.dump(2);
}

}  // namespace jointbe::verify
