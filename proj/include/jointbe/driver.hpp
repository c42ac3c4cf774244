#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "jointbe/contact.hpp"
#include "jointbe/coupling.hpp"
#include "jointbe/halfspace.hpp"
#include "jointbe/io.hpp"
#include "jointbe/minifem.hpp"
#include "jointbe/qsma.hpp"
#include "jointbe/rom.hpp"
#include "jointbe/topography.hpp"

namespace jointbe {

enum class FormKind { flat, sphere, hill, file };
enum class FixtureKind { rigid, lap_joint, fe_model };

struct TopographyConfig {
  FormKind form = FormKind::flat;
  Point2 center;
  double sphere_radius = 0.0;
  double hill_height = 0.0;
  double hill_width = 0.0;
  std::filesystem::path file;
  RoughnessSpec roughness;  // sigma = 0 disables it
  double hole_radius = 0.0;
  Point2 hole_center;
  /// Initial depth cutoff of the geometric restriction; infinity keeps every point.
  double restriction_depth = std::numeric_limits<double>::infinity();
};

struct PreloadConfig {
  double force = 0.0;  // target sum of normal contact forces [N]
  int steps = 20;
  std::string pattern;  // default: "approach" (rigid) or "preload" (FE)
  double tangential_force = 0.0;  // target |sum of t1 forces| after the preload [N]
  int tangential_steps = 20;
  std::string tangential_pattern = "slide_x";
};

struct QsmaConfig {
  std::vector<int> modes;  // empty disables the modal analysis
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  int amplitudes = 20;  // geometric samples between alpha_min and alpha_max
  int substeps = 4;     // contact increments between samples
  int points_per_quarter = 100;
};

struct RunConfig {
  std::string name = "case";
  Material material;
  BeGrid grid;
  TopographyConfig topography;
  FixtureKind fixture = FixtureKind::rigid;
  LapJointSpec lap_joint;
  FeModelFiles fe_files;
  std::vector<int> sensor_dofs;  // external models: model coordinates
  int fe_modes = 25;
  bool node_based = false;
  PreloadConfig preload;
  QsmaConfig qsma;
  double mu = 0.0;
  ContactOptions contact;
  std::filesystem::path output_directory;
  bool write_step_states = false;
  std::string config_hash;
};

/// Built-in lap joint: two 40 x 16 x 4 mm steel bars overlapping by 16 mm,
/// lower one clamped at x = 0, bolt at the overlap centre.
LapJointSpec default_lap_joint(const Material& material, double preload);

/// Validates and converts a parsed config; unknown fields are errors.
RunConfig parse_run_config(const ConfigFile& cfg);
RunConfig load_run_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = {});

/// Composite height profile (form + roughness, hole excluded, top at zero).
HeightProfile build_profile(const RunConfig& cfg, RoughnessReport* report = nullptr);

/// Worst invariant values over every converged step of a run.
struct InvariantStats {
  int steps = 0;
  InvariantReport worst;
  double gap_consistency = 0.0;  // |g - (C* lambda + g_ex)| / gap scale
  double force_balance = 0.0;    // |sum lambda_n - P| / P after calibrated phases
  double compliance_asymmetry = 0.0;
  bool compliance_spd = true;

  void add(const InvariantReport& r);
  bool ok(double tol = 1e-6) const;
};

struct StepLogRow {
  std::string phase;
  int step = 0;
  double scale = 0.0;
  StepReport report;
};

struct ModalResult {
  int mode = 0;
  double omega_lin = 0.0;   // linearized at the preload state
  double omega_tied = 0.0;  // normalization
  HysteresisRecord record;
  std::vector<ModalPoint> points;
};

struct RunResult {
  RunConfig config;
  HeightProfile profile;
  std::vector<int> retained;
  double restriction_depth = 0.0;
  int enlargements = 0;
  CondensedSystem system;
  ContactState preload_state;
  ContactState final_state;  // after the tangential phase, if any
  double preload_scale = 0.0;
  double tangential_scale = 0.0;
  InvariantStats invariants;
  std::vector<StepLogRow> steps;
  std::vector<ModalResult> modal;
  std::vector<ModalCurveRow> curves;
  PhaseTimer timer;
  std::vector<std::filesystem::path> files;
};

/// Preload (and tangential) phase with restriction enlargement, then QSMA.
/// Writes outputs when the config names an output directory.
RunResult run_case(const RunConfig& cfg);

}  // namespace jointbe
