#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "jointbe/csv.hpp"
#include "jointbe/driver.hpp"
#include "jointbe/error.hpp"

using namespace jointbe;
namespace fs = std::filesystem;

namespace {

// Small rigid sphere case; a 21 x 21 grid keeps the dense matrices tiny.
std::string sphere_text(const std::string& extra_preload = "", const std::string& extra_topo = "") {
  return "[material]\n"
         "youngs_modulus = 200e9\n"
         "poisson_ratio = 0.3\n"
         "[grid]\n"
         "pitch = 40e-6\n"
         "nx = 21\n"
         "ny = 21\n"
         "x0 = -400e-6\n"
         "y0 = -400e-6\n"
         "[topography]\n"
         "form = sphere\n"
         "sphere_radius = 50e-3\n" +
         extra_topo +
         "[preload]\n"
         "force = 187.5\n"
         "steps = 4\n" +
         extra_preload +
         "[solver]\n"
         "friction_coefficient = 0.3\n";
}

RunConfig parse(const std::string& text) { return parse_run_config(ConfigFile::parse(text, "case.cfg")); }

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::config);
    return e.what();
  }
  FAIL("no error raised");
  return {};
}

struct Quiet {
  Quiet() { spdlog::set_level(spdlog::level::warn); }
} quiet;

}  // namespace

TEST_CASE("config errors name the offending field") {
  std::string text = sphere_text();
  const auto pos = text.find("pitch = 40e-6\n");
  std::string no_pitch = text;
  no_pitch.erase(pos, std::string("pitch = 40e-6\n").size());
  CHECK(config_error(no_pitch).find("grid.pitch_x") != std::string::npos);

  CHECK(config_error(text + "[qsma]\nmodes = 1\nalpha_min = 1\nalpha_max = 2\n").find("flexible") !=
        std::string::npos);
  std::string bad_mu = text;
  bad_mu.replace(bad_mu.find("0.3\n", bad_mu.find("friction")), 3, "-1");
  CHECK(config_error(bad_mu).find("solver.friction_coefficient") != std::string::npos);
  CHECK(config_error(text + "[output]\nnmae = x\n").find("output.nmae") != std::string::npos);
  std::string bad_form = text;
  bad_form.replace(bad_form.find("sphere\n"), 6, "cone");
  CHECK(config_error(bad_form).find("topography.form") != std::string::npos);
}

TEST_CASE("config hash follows the canonical content") {
  const RunConfig a = parse(sphere_text());
  const RunConfig b = parse("# comment\n" + sphere_text());
  CHECK(a.config_hash == b.config_hash);
  std::string changed = sphere_text();
  changed.replace(changed.find("187.5"), 5, "187.6");
  CHECK(parse(changed).config_hash != a.config_hash);
  CHECK(a.config_hash.size() == 64);
}

TEST_CASE("zero preload leaves every point unloaded") {
  std::string text = sphere_text();
  text.replace(text.find("187.5"), 5, "0");
  const RunResult r = run_case(parse(text));
  CHECK(r.preload_state.force.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.steps.empty());
}

TEST_CASE("flat on flat carries the preload with edge pressure peaks") {
  const std::string text =
      "[material]\nyoungs_modulus = 210e9\npoisson_ratio = 0.3\n"
      "[grid]\npitch = 0.5e-3\nnx = 12\nny = 12\n"
      "[preload]\nforce = 300\nsteps = 2\n"
      "[solver]\nfriction_coefficient = 0\n";
  const RunResult r = run_case(parse(text));
  const auto& s = r.preload_state;
  CHECK(std::abs(s.normal_resultant() - 300) <= 1e-8 * 300);
  int corner = -1, centre = -1;
  for (int j = 0; j < s.point_count(); ++j) {
    const int id = r.system.point_index[std::size_t(j)];
    if (id == 0) corner = j;
    if (id == 6 * 12 + 6) centre = j;
  }
  REQUIRE(corner >= 0);
  REQUIRE(centre >= 0);
  CHECK(s.force(3 * corner) > 2 * s.force(3 * centre));
  CHECK(r.invariants.ok());
}

TEST_CASE("sphere preload: force balance, restriction enlargement, determinism") {
  const RunResult full = run_case(parse(sphere_text()));
  CHECK(std::abs(full.preload_state.normal_resultant() - 187.5) <= 1e-8 * 187.5);
  CHECK(full.invariants.ok());
  CHECK(full.enlargements == 0);

  // A cutoff far inside the contact is enlarged until the boundary is unloaded.
  const RunResult tight = run_case(parse(sphere_text("", "restriction_depth = 0.3e-6\n")));
  CHECK(tight.enlargements > 0);
  CHECK(tight.restriction_depth > 0.3e-6);
  double worst = 0;
  for (int j = 0; j < tight.preload_state.point_count(); ++j) {
    const int id = tight.system.point_index[std::size_t(j)];
    int jf = -1;
    for (int k = 0; k < full.system.point_count(); ++k)
      if (full.system.point_index[std::size_t(k)] == id) jf = k;
    REQUIRE(jf >= 0);
    worst = std::max(worst, std::abs(tight.preload_state.force(3 * j) - full.preload_state.force(3 * jf)));
  }
  CHECK(worst <= 1e-6 * full.preload_state.force.maxCoeff());

  const RunResult again = run_case(parse(sphere_text()));
  CHECK(again.preload_state.force == full.preload_state.force);
}

TEST_CASE("halving the load steps barely changes the tangential state") {
  const std::string tangential = "tangential_force = 28.125\n";
  const RunResult coarse = run_case(parse(sphere_text(tangential + "tangential_steps = 4\n")));
  std::string fine_text = sphere_text(tangential + "tangential_steps = 8\n");
  fine_text.replace(fine_text.find("steps = 4"), 9, "steps = 8");
  const RunResult fine = run_case(parse(fine_text));
  const Vec& a = coarse.final_state.force;
  const Vec& b = fine.final_state.force;
  REQUIRE(a.size() == b.size());
  CHECK((a - b).norm() <= 1e-3 * b.norm());
  double qa = 0;
  for (int j = 0; j < coarse.final_state.point_count(); ++j) qa += a(3 * j + 1);
  CHECK(qa == doctest::Approx(-28.125).epsilon(1e-9));
  CHECK(coarse.invariants.ok());
}

TEST_CASE("outputs and manifest") {
  const fs::path dir = fs::temp_directory_path() / "jointbe_driver_out";
  fs::remove_all(dir);
  RunConfig cfg = parse(sphere_text("tangential_force = 10\ntangential_steps = 2\n"));
  cfg.output_directory = dir;
  const RunResult r = run_case(cfg);
  std::ifstream f(dir / "manifest.json");
  REQUIRE(f);
  const auto j = nlohmann::json::parse(f);
  CHECK(j["config_hash"] == cfg.config_hash);
  CHECK(j["invariants"]["ok"] == true);
  REQUIRE(j["files"].size() == 3);
  for (const auto& name : j["files"]) CHECK(fs::exists(dir / name.get<std::string>()));
  CHECK_FALSE(j["timings"].empty());

  const csv::Table t = csv::read(dir / "final_state.csv");
  CHECK(int(t.rows.size()) == r.system.point_count());
  const int col = t.column("lam_n");
  REQUIRE(col >= 0);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(csv::to_double(t.rows[i][std::size_t(col)], "", 0) == r.final_state.force(3 * int(i)));
  }
  const csv::Table steps = csv::read(dir / "steps.csv");
  CHECK(steps.rows.size() == r.steps.size());
  fs::remove_all(dir);
}
