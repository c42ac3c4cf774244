#include "jointbe/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "jointbe/csv.hpp"
#include "jointbe/error.hpp"

namespace jointbe {

namespace fs = std::filesystem;

LapJointSpec default_lap_joint(const Material& material, double preload) {
  LapJointSpec s;
  s.lower.origin = {0.0, 0.0, -4e-3};
  s.lower.extents = {40e-3, 16e-3, 4e-3};
  s.lower.elements = {20, 8, 2};
  s.lower.material = material;
  s.lower.clamped_faces = {Face::x_min};
  s.upper.origin = {24e-3, 0.0, 0.0};
  s.upper.extents = {40e-3, 16e-3, 4e-3};
  s.upper.elements = {20, 8, 2};
  s.upper.material = material;
  s.bolt_center = {32e-3, 8e-3};
  s.washer_radius = 4.1e-3;
  s.bolt_axial_stiffness = 4e8;
  s.bolt_shear_stiffness = 4e7;
  s.preload = preload;
  s.sensor = {64e-3, 8e-3, 4e-3};
  return s;
}

// ---------------------------------------------------------------- config

namespace {

[[noreturn]] void config_error(const ConfigFile& cfg, const std::string& why) {
  throw Error(ErrorCategory::config, cfg.source() + ": " + why);
}

}  // namespace

RunConfig parse_run_config(const ConfigFile& cfg) {
  RunConfig r;
  r.name = cfg.get_string("output", "name", "case");

  r.material.youngs_modulus = cfg.get_double("material", "youngs_modulus");
  r.material.poisson_ratio = cfg.get_double("material", "poisson_ratio");
  r.material.density = cfg.get_double("material", "density", 0.0);
  ElasticHalfSpace{r.material.youngs_modulus, r.material.poisson_ratio}.validate();

  if (cfg.has("grid", "pitch")) {
    r.grid.pitch_x = r.grid.pitch_y = cfg.get_double("grid", "pitch");
  } else {
    r.grid.pitch_x = cfg.get_double("grid", "pitch_x");
    r.grid.pitch_y = cfg.get_double("grid", "pitch_y");
  }
  r.grid.nx = cfg.get_int("grid", "nx");
  r.grid.ny = cfg.get_int("grid", "ny");
  r.grid.x0 = cfg.get_double("grid", "x0", 0.0);
  r.grid.y0 = cfg.get_double("grid", "y0", 0.0);
  r.grid.validate();

  auto& t = r.topography;
  const std::string form = cfg.get_string("topography", "form", "flat");
  t.center = {cfg.get_double("topography", "center_x", 0.0), cfg.get_double("topography", "center_y", 0.0)};
  if (form == "flat") {
    t.form = FormKind::flat;
  } else if (form == "sphere") {
    t.form = FormKind::sphere;
    t.sphere_radius = cfg.get_double("topography", "sphere_radius");
    if (!(t.sphere_radius > 0)) config_error(cfg, "field 'topography.sphere_radius' must be > 0");
  } else if (form == "hill") {
    t.form = FormKind::hill;
    t.hill_height = cfg.get_double("topography", "hill_height");
    t.hill_width = cfg.get_double("topography", "hill_width");
    if (!(t.hill_width > 0)) config_error(cfg, "field 'topography.hill_width' must be > 0");
  } else if (form == "file") {
    t.form = FormKind::file;
    t.file = cfg.get_path("topography", "file");
  } else {
    config_error(cfg, "field 'topography.form' must be flat, sphere, hill or file");
  }
  t.roughness.sigma = cfg.get_double("topography", "roughness_sigma", 0.0);
  if (t.roughness.sigma < 0) config_error(cfg, "field 'topography.roughness_sigma' must be >= 0");
  if (t.roughness.sigma > 0) {
    t.roughness.lambda_min = cfg.get_double("topography", "roughness_lambda_min");
    t.roughness.lambda_max = cfg.get_double("topography", "roughness_lambda_max");
  }
  t.roughness.seed = static_cast<std::uint64_t>(cfg.get_int("topography", "seed", 1));
  t.hole_radius = cfg.get_double("topography", "hole_radius", 0.0);
  t.hole_center = {cfg.get_double("topography", "hole_x", t.center.x), cfg.get_double("topography", "hole_y", t.center.y)};
  if (cfg.has("topography", "restriction_depth")) {
    t.restriction_depth = cfg.get_double("topography", "restriction_depth");
    if (!(t.restriction_depth > 0)) config_error(cfg, "field 'topography.restriction_depth' must be > 0");
  }

  const bool fe = cfg.has_section("fe_model");
  if (fe && cfg.has_section("fixture")) config_error(cfg, "use either [fixture] or [fe_model], not both");
  if (fe) {
    r.fixture = FixtureKind::fe_model;
    if (cfg.has("fe_model", "directory")) {
      r.fe_files = FeModelFiles::in_directory(cfg.get_path("fe_model", "directory"));
    } else {
      r.fe_files.mass = cfg.get_path("fe_model", "mass");
      r.fe_files.stiffness = cfg.get_path("fe_model", "stiffness");
      r.fe_files.dof_map = cfg.get_path("fe_model", "dof_map");
      r.fe_files.interface_nodes = cfg.get_path("fe_model", "interface_nodes");
      r.fe_files.interface_faces = cfg.get_path("fe_model", "interface_faces");
      if (cfg.has("fe_model", "loads")) r.fe_files.loads = cfg.get_path("fe_model", "loads");
    }
    r.fe_modes = cfg.get_int("fe_model", "modes", 25);
    if (cfg.has("fe_model", "sensor_dofs")) r.sensor_dofs = cfg.get_ints("fe_model", "sensor_dofs");
  } else {
    const std::string type = cfg.get_string("fixture", "type", "rigid");
    if (type == "rigid") {
      r.fixture = FixtureKind::rigid;
    } else if (type == "lap_joint") {
      r.fixture = FixtureKind::lap_joint;
      r.lap_joint = default_lap_joint(r.material, 0.0);
      auto& l = r.lap_joint;
      l.bolt_axial_stiffness = cfg.get_double("fixture", "bolt_axial_stiffness", l.bolt_axial_stiffness);
      l.bolt_shear_stiffness = cfg.get_double("fixture", "bolt_shear_stiffness", l.bolt_shear_stiffness);
      l.washer_radius = cfg.get_double("fixture", "washer_radius", l.washer_radius);
      r.fe_modes = cfg.get_int("fixture", "modes", 25);
    } else {
      config_error(cfg, "field 'fixture.type' must be rigid or lap_joint");
    }
  }
  if (r.fixture != FixtureKind::rigid) {
    r.material.validate();
    if (r.fe_modes < 1) config_error(cfg, "the number of fixed-interface modes must be >= 1");
  }

  auto& p = r.preload;
  p.force = cfg.get_double("preload", "force", 0.0);
  p.steps = cfg.get_int("preload", "steps", 20);
  p.pattern = cfg.get_string("preload", "pattern", r.fixture == FixtureKind::rigid ? "approach" : "preload");
  p.tangential_force = cfg.get_double("preload", "tangential_force", 0.0);
  p.tangential_steps = cfg.get_int("preload", "tangential_steps", 20);
  p.tangential_pattern = cfg.get_string("preload", "tangential_pattern", "slide_x");
  if (p.force < 0 || p.tangential_force < 0) config_error(cfg, "preload forces must be >= 0");
  if (p.steps < 1 || p.tangential_steps < 1) config_error(cfg, "preload step counts must be >= 1");
  if (p.tangential_force > 0 && p.tangential_pattern != "slide_x" && p.tangential_pattern != "slide_y") {
    config_error(cfg, "field 'preload.tangential_pattern' must be slide_x or slide_y");
  }
  if (p.tangential_force > 0 && r.fixture != FixtureKind::rigid) {
    config_error(cfg, "a tangential preload phase is only available for rigid cases");
  }
  if (r.lap_joint.preload == 0.0) r.lap_joint.preload = p.force;

  if (cfg.has_section("qsma")) {
    auto& q = r.qsma;
    q.modes = cfg.get_ints("qsma", "modes");
    q.alpha_min = cfg.get_double("qsma", "alpha_min");
    q.alpha_max = cfg.get_double("qsma", "alpha_max");
    q.amplitudes = cfg.get_int("qsma", "amplitudes", 20);
    q.substeps = cfg.get_int("qsma", "substeps", 4);
    q.points_per_quarter = cfg.get_int("qsma", "points_per_quarter", 100);
    if (q.modes.empty()) config_error(cfg, "field 'qsma.modes' lists no mode");
    for (int m : q.modes) {
      if (m < 1) config_error(cfg, "field 'qsma.modes' must list mode numbers >= 1");
    }
    if (!(q.alpha_min > 0 && q.alpha_max > q.alpha_min)) {
      config_error(cfg, "qsma amplitudes must satisfy 0 < alpha_min < alpha_max");
    }
    if (q.amplitudes < 2 || q.substeps < 1 || q.points_per_quarter < 1) {
      config_error(cfg, "qsma amplitudes must be >= 2, substeps and points_per_quarter >= 1");
    }
    if (r.fixture == FixtureKind::rigid) config_error(cfg, "modal analysis needs a flexible structure");
  }

  r.mu = cfg.get_double("solver", "friction_coefficient");
  if (r.mu < 0) config_error(cfg, "field 'solver.friction_coefficient' must be >= 0");
  r.contact.pjor.omega = cfg.get_double("solver", "relaxation", r.contact.pjor.omega);
  r.contact.pjor.tolerance = cfg.get_double("solver", "tolerance", r.contact.pjor.tolerance);
  r.contact.pjor.max_iterations = cfg.get_int("solver", "max_iterations", r.contact.pjor.max_iterations);
  r.contact.max_retries = cfg.get_int("solver", "max_retries", r.contact.max_retries);
  r.node_based = cfg.get_bool("solver", "node_based", false);
  if (!(r.contact.pjor.omega > 0 && r.contact.pjor.omega < 2)) config_error(cfg, "field 'solver.relaxation' must lie in (0, 2)");
  if (!(r.contact.pjor.tolerance > 0)) config_error(cfg, "field 'solver.tolerance' must be > 0");
  if (r.contact.pjor.max_iterations < 1 || r.contact.max_retries < 0) config_error(cfg, "solver iteration bounds must be positive");
  if (r.node_based && r.fixture == FixtureKind::rigid) config_error(cfg, "node-based mode needs an FE model");

  if (cfg.has("output", "directory")) r.output_directory = cfg.get_path("output", "directory");
  r.write_step_states = cfg.get_bool("output", "step_states", false);

  cfg.check_all_used();
  r.config_hash = sha256_hex(cfg.canonical());
  return r;
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed) {
  const ConfigFile cfg = ConfigFile::load(path);
  RunConfig r = parse_run_config(cfg);
  if (seed) {
    r.topography.roughness.seed = *seed;
    r.config_hash = sha256_hex(cfg.canonical() + "cli.seed=" + std::to_string(*seed) + "\n");
  }
  return r;
}

HeightProfile build_profile(const RunConfig& cfg, RoughnessReport* report) {
  const auto& t = cfg.topography;
  HeightProfile form;
  switch (t.form) {
    case FormKind::flat: form = HeightProfile::flat(cfg.grid); break;
    case FormKind::sphere: form = sphere_profile(cfg.grid, t.center, t.sphere_radius); break;
    case FormKind::hill: form = hill_profile(cfg.grid, t.center, t.hill_height, t.hill_width); break;
    case FormKind::file: form = read_height_csv(t.file, cfg.grid); break;
  }
  if (t.hole_radius > 0) exclude_disk(form, t.hole_center, t.hole_radius);
  const HeightProfile rough =
      t.roughness.sigma > 0 ? synthesize_roughness(cfg.grid, t.roughness, report) : HeightProfile::flat(cfg.grid);
  return compose_profiles(form, rough);
}

void InvariantStats::add(const InvariantReport& r) {
  if (steps == 0) {
    worst = r;
  } else {
    worst.min_normal_force = std::min(worst.min_normal_force, r.min_normal_force);
    worst.min_gap = std::min(worst.min_gap, r.min_gap);
    worst.complementarity = std::max(worst.complementarity, r.complementarity);
    worst.cone_excess = std::max(worst.cone_excess, r.cone_excess);
    worst.dissipation = std::max(worst.dissipation, r.dissipation);
    worst.slip_alignment = std::max(worst.slip_alignment, r.slip_alignment);
  }
  ++steps;
}

bool InvariantStats::ok(double tol) const {
  return worst.ok(tol) && gap_consistency <= tol && force_balance <= 1e-8 && compliance_asymmetry <= 1e-12 &&
         compliance_spd;
}

// ---------------------------------------------------------------- run

namespace {

struct Structure {
  FeModel model;
  InterfaceMesh interface;
  ReducedModel rom;
  std::vector<int> sensors;  // rows for observation_matrix
};

Structure build_structure(const RunConfig& cfg) {
  Structure s;
  if (cfg.fixture == FixtureKind::lap_joint) {
    LapJoint lj = build_lap_joint(cfg.lap_joint);
    s.model = std::move(lj.fixture.model);
    s.interface = std::move(lj.fixture.interface);
    s.sensors = lj.fixture.sensor_dofs;
  } else {
    ExternalModel em = load_fe_model(cfg.fe_files);
    s.model = std::move(em.model);
    s.interface = std::move(em.interface);
    s.sensors = cfg.sensor_dofs;
  }
  s.rom = craig_bampton(s.model, cfg.fe_modes);
  spdlog::info("reduced model: {} boundary DOFs, {} modes, fixed-interface f1 = {:.2f} Hz", s.rom.n_boundary,
               s.rom.n_modes, s.rom.fixed_interface_omega(0) / (2 * M_PI));
  return s;
}

struct SystemBuild {
  CondensedSystem cs;
  double asymmetry = 0.0;
  bool spd = true;
};

SystemBuild build_system(const RunConfig& cfg, const HeightProfile& profile, const std::vector<int>& retained,
                         const Structure* st) {
  SystemBuild b;
  const ElasticHalfSpace hs{cfg.material.youngs_modulus, cfg.material.poisson_ratio};
  const BeGrid& g = cfg.grid;
  if (cfg.node_based) {
    // Interface nodes are the contact points; C = 0 and areas are nodal.
    const auto& im = st->interface;
    const auto node_area = im.node_areas();
    const CouplingMap all = node_coupling(st->rom, im);
    std::vector<int> keep;
    std::vector<Point2> pos;
    std::vector<double> h, areas;
    for (std::size_t n = 0; n < im.node_xy.size(); ++n) {
      const Point2 p = im.node_xy[n];
      const int ix = static_cast<int>(std::lround((p.x - g.x0) / g.pitch_x));
      const int iy = static_cast<int>(std::lround((p.y - g.y0) / g.pitch_y));
      if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny ||
          std::abs(g.x0 + ix * g.pitch_x - p.x) > 1e-9 || std::abs(g.y0 + iy * g.pitch_y - p.y) > 1e-9) {
        throw Error(ErrorCategory::config, "node-based mode: the grid must contain a point at every interface node");
      }
      const int id = g.id(ix, iy);
      if (profile.is_excluded(id)) continue;
      keep.push_back(static_cast<int>(n));
      pos.push_back(p);
      h.push_back(profile.heights[static_cast<std::size_t>(id)]);
      areas.push_back(node_area[n]);
    }
    CouplingMap cp;
    cp.node_based = true;
    cp.w_b = Mat(all.w_b.rows(), 3 * static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      cp.w_b.middleCols(3 * static_cast<int>(k), 3) = all.w_b.middleCols(3 * keep[k], 3);
      cp.point_index.push_back(keep[k]);
      cp.face_of_point.push_back(-1);
    }
    ComplianceMatrix c;
    c.entries = Mat::Zero(cp.w_b.cols(), cp.w_b.cols());
    c.point_index = cp.point_index;
    b.cs = condense_static(st->rom, cp, c, h, pos, areas);
    return b;
  }

  std::vector<Point2> pos;
  std::vector<double> h;
  for (int id : retained) {
    pos.push_back(g.position(id));
    h.push_back(profile.heights[static_cast<std::size_t>(id)]);
  }
  ComplianceMatrix c = assemble_compliance(pos, retained, g.pitch_x, g.pitch_y, hs, hs);
  b.asymmetry = c.max_asymmetry();
  b.spd = c.is_positive_definite();
  if (!b.spd) throw Error(ErrorCategory::numerical, "BE compliance is not positive definite");
  if (cfg.fixture == FixtureKind::rigid) {
    b.cs = condense_rigid(c, h, pos, g.element_area());
  } else {
    const CouplingMap cp = build_coupling(st->rom, st->interface, pos, retained);
    const std::vector<double> areas(pos.size(), g.element_area());
    b.cs = condense_static(st->rom, cp, c, h, pos, areas);
  }
  return b;
}

int component_of_pattern(const std::string& name) { return name == "slide_y" ? kTangent2 : kTangent1; }

double component_sum(const ContactState& s, int comp) {
  double sum = 0.0;
  for (int j = 0; j < s.point_count(); ++j) sum += s.force(3 * j + comp);
  return sum;
}

// Drives the contact solver, accumulates the external gap and checks every step.
class Stepper {
 public:
  Stepper(const RunConfig& cfg, const CondensedSystem& cs, RunResult& res)
      : cfg_(cfg), cs_(cs), res_(res), solver_(cs, cfg.mu, cfg.contact) {
    state_ = ContactState::initial(cs, cfg.mu);
    g_ex_ = -cs.heights;
    gap_scale_ = std::max(cs.heights.cwiseAbs().maxCoeff(), 1e-300);
  }

  ContactSolver& solver() { return solver_; }
  const ContactState& state() const { return state_; }
  double gap_scale() const { return gap_scale_; }
  void set_phase(std::string phase) {
    phase_ = std::move(phase);
    step_ = 0;
  }

  void step(const Vec& dg, double scale) {
    StepReport rep;
    state_ = solver_.step(state_, dg, &rep);
    g_ex_ += dg;
    gap_scale_ = std::max(gap_scale_, (g_ex_ + cs_.heights).cwiseAbs().maxCoeff());
    const Vec direct = cs_.c_star * state_.force + g_ex_;
    res_.invariants.gap_consistency =
        std::max(res_.invariants.gap_consistency, (direct - state_.gap).cwiseAbs().maxCoeff() / gap_scale_);
    record(state_, rep, scale);
  }

  void record(const ContactState& s, const StepReport& rep, double scale) {
    ++step_;
    double fmax = 0.0;
    for (int j = 0; j < s.point_count(); ++j) fmax = std::max(fmax, s.force(3 * j));
    res_.invariants.add(check_invariants(s, std::max(fmax, 1e-300), gap_scale_));
    res_.steps.push_back({phase_, step_, scale, rep});
    spdlog::debug("{} step {}: closed {} stick {} active {} sep {} | pjor {} it, residual {:.3e}, retries {}", phase_,
                  step_, rep.closed, rep.sticking, rep.active, rep.separated, rep.pjor_iterations, rep.pjor_residual,
                  rep.retries);
    if (cfg_.write_step_states && !cfg_.output_directory.empty()) {
      const fs::path dir = cfg_.output_directory / "states";
      fs::create_directories(dir);
      const fs::path p = dir / (phase_ + "_" + std::to_string(step_) + ".csv");
      write_state_csv(p, s, cs_);
      res_.files.push_back(p);
    }
  }

 private:
  const RunConfig& cfg_;
  const CondensedSystem& cs_;
  RunResult& res_;
  ContactSolver solver_;
  ContactState state_;
  Vec g_ex_;
  double gap_scale_ = 1.0;
  std::string phase_;
  int step_ = 0;
};

/// Load scale at which a frictionless single-step solve carries `target`.
double frictionless_estimate(const RunConfig& cfg, const CondensedSystem& cs, const Vec& u, double target) {
  ContactSolver solver(cs, 0.0, cfg.contact);
  const ContactState init = ContactState::initial(cs, 0.0);
  auto load = [&](double s) { return solver.step(init, u * s).normal_resultant(); };
  double s_lo = std::numeric_limits<double>::infinity();
  double u_max = 0.0, c_max = 0.0;
  for (int j = 0; j < cs.point_count(); ++j) {
    const double un = u(3 * j);
    if (un < 0) s_lo = std::min(s_lo, init.gap(3 * j) / -un);
    u_max = std::max(u_max, std::abs(un));
    c_max = std::max(c_max, cs.c_star(3 * j, 3 * j));
  }
  if (!std::isfinite(s_lo)) throw Error(ErrorCategory::input, "preload pattern does not close any contact point");
  double s_hi = s_lo + target * c_max / u_max;
  double p_hi = load(s_hi);
  for (int k = 0; p_hi < target; ++k) {
    if (k > 60) throw Error(ErrorCategory::solver, "preload: could not bracket the target force");
    s_hi = s_lo + 2 * (s_hi - s_lo);
    p_hi = load(s_hi);
  }
  double p_lo = 0.0;
  double s = s_hi;
  int side = 0;
  for (int k = 0; k < 60; ++k) {
    s = (s_lo * (p_hi - target) - s_hi * (p_lo - target)) / (p_hi - p_lo);
    const double p = load(s);
    if (std::abs(p - target) <= 1e-3 * target) break;
    if (p < target) {
      s_lo = s;
      p_lo = p;
      if (side == -1) p_hi = target + 0.5 * (p_hi - target);
      side = -1;
    } else {
      s_hi = s;
      p_hi = p;
      if (side == 1) p_lo = target + 0.5 * (p_lo - target);
      side = 1;
    }
  }
  return s;
}

/// Uniform ramp to `guess`, then secant increments until measure == target.
double load_control(Stepper& st, const Vec& u, const std::function<double(const ContactState&)>& measure,
                    double target, int steps, double guess) {
  double s = 0.0, m = measure(st.state());
  double s_prev = s, m_prev = m;
  for (int k = 1; k <= steps; ++k) {
    s_prev = s;
    m_prev = m;
    const double ds = guess / steps;
    st.step(u * ds, s + ds);
    s += ds;
    m = measure(st.state());
  }
  for (int it = 0; it < 60; ++it) {
    if (std::abs(m - target) <= 1e-10 * target) return s;
    double slope = (m - m_prev) / (s - s_prev);
    if (!(slope > 0)) slope = m / s;
    if (!(slope > 0) || !std::isfinite(slope)) throw Error(ErrorCategory::solver, "load control: the load does not respond to the pattern");
    const double ds = (target - m) / slope;
    s_prev = s;
    m_prev = m;
    st.step(u * ds, s + ds);
    s += ds;
    m = measure(st.state());
  }
  if (std::abs(m - target) <= 1e-8 * target) return s;
  std::ostringstream msg;
  msg << "load control: resultant " << m << " did not reach the target " << target;
  throw SolverError(msg.str(), std::abs(m - target) / target, 60);
}

struct PhaseOutcome {
  ContactState preload;
  ContactState final;
  double preload_scale = 0.0;
  double tangential_scale = 0.0;
};

PhaseOutcome run_phases(const RunConfig& cfg, const CondensedSystem& cs, RunResult& res) {
  PhaseOutcome out;
  Stepper st(cfg, cs, res);
  const auto& p = cfg.preload;
  const auto it = cs.patterns.find(p.pattern);
  if (it == cs.patterns.end()) throw Error(ErrorCategory::config, "unknown preload pattern '" + p.pattern + "'");
  const Vec& u = it->second;
  if (p.force > 0) {
    st.set_phase("preload");
    const double guess = frictionless_estimate(cfg, cs, u, p.force);
    out.preload_scale =
        load_control(st, u, [](const ContactState& s) { return s.normal_resultant(); }, p.force, p.steps, guess);
    res.invariants.force_balance =
        std::max(res.invariants.force_balance, std::abs(st.state().normal_resultant() - p.force) / p.force);
  }
  out.preload = st.state();
  if (p.tangential_force > 0) {
    st.set_phase("tangential");
    const Vec& ut = cs.patterns.at(p.tangential_pattern);
    const int comp = component_of_pattern(p.tangential_pattern);
    auto measure = [comp](const ContactState& s) { return -component_sum(s, comp); };
    // All-stick response of a small trial increment gives the initial stiffness.
    const double trial = 1e-3 * st.gap_scale();
    const ContactState probe = st.solver().step(st.state(), ut * trial);
    const double q_trial = measure(probe) - measure(st.state());
    if (!(q_trial > 0)) throw Error(ErrorCategory::solver, "tangential phase: the contact carries no tangential load");
    const double guess = 0.9 * (p.tangential_force - measure(st.state())) / (q_trial / trial);
    out.tangential_scale = load_control(st, ut, measure, p.tangential_force, p.tangential_steps, guess);
    res.invariants.force_balance = std::max(
        res.invariants.force_balance, std::abs(measure(st.state()) - p.tangential_force) / p.tangential_force);
  }
  out.final = st.state();
  return out;
}

std::vector<int> loaded_boundary(const HeightProfile& profile, const std::vector<int>& retained,
                                 const CondensedSystem& cs, const ContactState& s) {
  std::map<int, int> where;
  for (int j = 0; j < cs.point_count(); ++j) where[cs.point_index[static_cast<std::size_t>(j)]] = j;
  std::vector<int> out;
  for (int id : restriction_boundary(profile, retained)) {
    const auto it = where.find(id);
    if (it != where.end() && s.force(3 * it->second) > 0) out.push_back(id);
  }
  return out;
}

std::vector<double> geometric_samples(double lo, double hi, int n) {
  std::vector<double> a;
  for (int i = 0; i < n; ++i) a.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  a.back() = hi;
  return a;
}

void write_outputs(RunResult& res) {
  const RunConfig& cfg = res.config;
  const fs::path dir = cfg.output_directory;
  fs::create_directories(dir);
  auto add = [&](const fs::path& p) { res.files.push_back(p); };

  write_state_csv(dir / "preload_state.csv", res.preload_state, res.system);
  add(dir / "preload_state.csv");
  if (cfg.preload.tangential_force > 0) {
    write_state_csv(dir / "final_state.csv", res.final_state, res.system);
    add(dir / "final_state.csv");
  }
  {
    auto out = csv::open_output(dir / "steps.csv");
    out << "phase,step,scale,closed,sticking,active,separated,pjor_iterations,pjor_residual,retries\n";
    for (const auto& r : res.steps) {
      out << r.phase << ',' << r.step << ',' << csv::sci(r.scale) << ',' << r.report.closed << ',' << r.report.sticking
          << ',' << r.report.active << ',' << r.report.separated << ',' << r.report.pjor_iterations << ','
          << csv::sci(r.report.pjor_residual) << ',' << r.report.retries << '\n';
    }
    add(dir / "steps.csv");
  }
  if (!res.modal.empty()) {
    write_modal_curves(dir / "modal_curves.csv", res.curves);
    add(dir / "modal_curves.csv");
    for (const auto& m : res.modal) {
      const fs::path p = dir / ("hysteresis_mode" + std::to_string(m.mode) + ".csv");
      auto out = csv::open_output(p);
      out << "alpha,q_pos,q_neg\n";
      for (std::size_t i = 0; i < m.record.alpha.size(); ++i) {
        out << csv::sci(m.record.alpha[i]) << ',' << csv::sci(m.record.q_pos[i]) << ',' << csv::sci(m.record.q_neg[i])
            << '\n';
      }
      add(p);
    }
  }

  using nlohmann::json;
  json j;
  j["name"] = cfg.name;
  j["version"] = "1.0.0";
  j["config_hash"] = cfg.config_hash;
  j["seed"] = cfg.topography.roughness.seed;
  for (const auto& t : res.timer.records()) j["timings"].push_back({{"phase", t.phase}, {"wall_s", t.wall}, {"cpu_s", t.cpu}});
  int counts[3] = {0, 0, 0};
  for (int k = 0; k < res.final_state.point_count(); ++k) ++counts[static_cast<int>(res.final_state.status(k))];
  const auto& w = res.invariants.worst;
  j["summary"] = {{"retained_points", res.system.point_count()},
                  {"restriction_depth", std::isfinite(res.restriction_depth) ? json(res.restriction_depth) : json(nullptr)},
                  {"restriction_enlargements", res.enlargements},
                  {"preload_scale", res.preload_scale},
                  {"normal_resultant", res.preload_state.normal_resultant()},
                  {"tangential_scale", res.tangential_scale},
                  {"separated", counts[0]},
                  {"stick", counts[1]},
                  {"slip", counts[2]},
                  {"steps", res.steps.size()}};
  j["invariants"] = {{"steps_checked", res.invariants.steps},
                     {"min_normal_force", w.min_normal_force},
                     {"min_gap", w.min_gap},
                     {"complementarity", w.complementarity},
                     {"cone_excess", w.cone_excess},
                     {"dissipation", w.dissipation},
                     {"slip_alignment", w.slip_alignment},
                     {"gap_consistency", res.invariants.gap_consistency},
                     {"force_balance", res.invariants.force_balance},
                     {"compliance_asymmetry", res.invariants.compliance_asymmetry},
                     {"compliance_spd", res.invariants.compliance_spd},
                     {"ok", res.invariants.ok()}};
  for (const auto& m : res.modal) {
    json e = {{"mode", m.mode}, {"omega_lin", m.omega_lin}, {"omega_tied", m.omega_tied},
              {"samples", m.points.size()}};
    if (!m.record.failure.empty()) e["failure"] = m.record.failure;
    j["modes"].push_back(e);
  }
  for (const auto& f : res.files) j["files"].push_back(fs::relative(f, dir).generic_string());
  auto out = csv::open_output(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_case(const RunConfig& cfg) {
  RunResult res;
  res.config = cfg;
  spdlog::info("case '{}' (config {})", cfg.name, cfg.config_hash.substr(0, 12));

  std::optional<Structure> structure;
  {
    auto t = res.timer.scope("model");
    res.profile = build_profile(cfg);
    if (cfg.fixture != FixtureKind::rigid) structure = build_structure(cfg);
  }

  double depth = cfg.topography.restriction_depth;
  const int max_enlargements = 5;
  for (int attempt = 0;; ++attempt) {
    RunResult trial;
    std::vector<int> retained;
    if (!cfg.node_based) {
      retained = std::isfinite(depth) ? geometric_restriction(res.profile, depth)
                                      : geometric_restriction(res.profile, std::numeric_limits<double>::max());
    }
    SystemBuild b;
    {
      auto t = res.timer.scope("condensation");
      b = build_system(cfg, res.profile, retained, structure ? &*structure : nullptr);
    }
    spdlog::info("contact grid: {} points retained{}", b.cs.point_count(),
                 std::isfinite(depth) ? fmt::format(" (depth cutoff {:.3e} m)", depth) : std::string());
    res.invariants = InvariantStats{};
    res.invariants.compliance_asymmetry = b.asymmetry;
    res.invariants.compliance_spd = b.spd;
    res.steps.clear();
    PhaseOutcome o;
    {
      auto t = res.timer.scope("preload");
      o = run_phases(cfg, b.cs, res);
    }
    const auto loaded = std::isfinite(depth) && !cfg.node_based
                            ? loaded_boundary(res.profile, retained, b.cs, o.final)
                            : std::vector<int>{};
    if (!loaded.empty()) {
      if (attempt >= max_enlargements) {
        throw Error(ErrorCategory::solver, "geometric restriction still loaded at its boundary after " +
                                               std::to_string(max_enlargements) + " enlargements");
      }
      spdlog::warn("{} restriction-boundary points carry load; enlarging the depth cutoff by 1.5", loaded.size());
      depth *= 1.5;
      ++res.enlargements;
      continue;
    }
    res.retained = std::move(retained);
    res.restriction_depth = depth;
    res.system = std::move(b.cs);
    res.preload_state = std::move(o.preload);
    res.final_state = std::move(o.final);
    res.preload_scale = o.preload_scale;
    res.tangential_scale = o.tangential_scale;
    break;
  }
  spdlog::info("preload: sum lambda_n = {:.6e} N, load scale {:.6e}", res.preload_state.normal_resultant(),
               res.preload_scale);

  if (!cfg.qsma.modes.empty()) {
    auto t = res.timer.scope("qsma");
    const auto& q = cfg.qsma;
    const int n_modes = *std::max_element(q.modes.begin(), q.modes.end());
    const auto lin = linearized_modes(structure->rom, res.system, res.preload_state, n_modes);
    const auto tied = tied_modes(structure->rom, res.system, n_modes);
    const Mat obs = structure->sensors.empty() ? Mat()
                                               : observation_matrix(structure->model, structure->rom, structure->sensors);
    const auto alphas = geometric_samples(q.alpha_min, q.alpha_max, q.amplitudes);
    ContactSolver solver(res.system, cfg.mu, cfg.contact);
    const double gap_scale = std::max(res.system.heights.cwiseAbs().maxCoeff(), 1e-300);
    for (int m : q.modes) {
      ModalResult mr;
      mr.mode = m;
      mr.omega_lin = lin[static_cast<std::size_t>(m - 1)].omega;
      mr.omega_tied = tied[static_cast<std::size_t>(m - 1)].omega;
      spdlog::info("mode {}: linearized {:.2f} Hz, tied {:.2f} Hz", m, mr.omega_lin / (2 * M_PI),
                   mr.omega_tied / (2 * M_PI));
      const ModalLoad load = modal_load(structure->rom, res.system, lin[static_cast<std::size_t>(m - 1)], obs);
      int step = 0;
      const std::string phase = "qsma_mode" + std::to_string(m);
      mr.record = modal_load_sweep(solver, res.preload_state, load, alphas, q.substeps,
                                   [&](const ContactState& s, const StepReport& rep) {
                                     double fmax = 0.0;
                                     for (int j = 0; j < s.point_count(); ++j) fmax = std::max(fmax, s.force(3 * j));
                                     res.invariants.add(check_invariants(s, std::max(fmax, 1e-300), gap_scale));
                                     res.steps.push_back({phase, ++step, 0.0, rep});
                                   });
      if (!mr.record.failure.empty()) spdlog::warn("mode {}: {}", m, mr.record.failure);
      for (std::size_t i = 1; i < mr.record.alpha.size(); ++i) {
        const ModalPoint pt = modal_properties(mr.record, mr.record.alpha[i], q.points_per_quarter);
        mr.points.push_back(pt);
        res.curves.push_back({m, pt.amplitude, pt.omega, pt.omega / mr.omega_tied, pt.damping});
      }
      res.modal.push_back(std::move(mr));
    }
  }

  const auto& w = res.invariants.worst;
  spdlog::info("invariants over {} steps: cone {:.2e}, complementarity {:.2e}, dissipation {:.2e}, gap consistency {:.2e}",
               res.invariants.steps, w.cone_excess, w.complementarity, w.dissipation, res.invariants.gap_consistency);
  if (!cfg.output_directory.empty()) {
    write_outputs(res);
    spdlog::info("outputs written to {}", cfg.output_directory.string());
  }
  return res;
}

}  // namespace jointbe
