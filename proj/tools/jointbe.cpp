#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <spdlog/spdlog.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "jointbe/driver.hpp"
#include "jointbe/error.hpp"
#include "jointbe/io.hpp"
#include "jointbe/topography.hpp"
#include "verify.hpp"

using namespace jointbe;
namespace fs = std::filesystem;

namespace {

int run(const fs::path& config, const std::optional<fs::path>& out, std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_run_config(config, seed);
  if (out) cfg.output_directory = *out;
  if (cfg.output_directory.empty()) cfg.output_directory = fs::path("out") / cfg.name;
  const RunResult r = run_case(cfg);
  std::printf("%s: sum lambda_n %.10e N, %d points, invariants %s, outputs in %s\n", cfg.name.c_str(),
              r.preload_state.normal_resultant(), r.system.point_count(), r.invariants.ok() ? "ok" : "VIOLATED",
              cfg.output_directory.string().c_str());
  return r.invariants.ok() ? 0 : static_cast<int>(ErrorCategory::numerical);
}

int verify_suite(const std::string& suite, const fs::path& configs, const std::optional<fs::path>& report) {
  verify::Suite s(configs);
  std::vector<verify::Check> checks;
  bool all = true;
  for (int id : verify::Suite::criteria(suite)) {
    checks.push_back(s.run(id));
    std::printf("%s\n", verify::format_line(checks.back()).c_str());
    std::fflush(stdout);
    all = all && checks.back().pass;
  }
  if (report) {
    std::ofstream f(*report);
    if (!f) throw Error(ErrorCategory::io, "cannot write " + report->string());
    f << verify::to_json(checks) << '\n';
  }
  return all ? 0 : 1;
}

int synth_surface(const fs::path& config, const std::optional<fs::path>& out, std::optional<std::uint64_t> seed) {
  const RunConfig cfg = load_run_config(config, seed);
  RoughnessReport rep;
  const HeightProfile p = build_profile(cfg, &rep);
  const fs::path path = out ? *out : fs::path(cfg.name + "_heights.csv");
  write_height_csv(path, p);
  std::printf("%d of %d points, heights %.6e..%.6e m, %d band frequencies -> %s\n", p.included_count(),
              p.grid.size(), p.min_height(), p.max_height(), rep.band_frequencies, path.string().c_str());
  return 0;
}

int reduce(const fs::path& dir, int modes, const fs::path& out) {
  const ExternalModel em = load_fe_model(FeModelFiles::in_directory(dir));
  const ReducedModel rom = craig_bampton(em.model, modes);
  write_reduced_model(out.string(), rom);
  std::printf("%d boundary DOFs, %d modes, max mode residual %.2e -> %s\n", rom.n_boundary, rom.n_modes,
              rom.max_mode_residual, out.string().c_str());
  for (int i = 0; i < rom.n_modes; ++i) std::printf("  f%d = %.6f Hz\n", i + 1, rom.fixed_interface_omega(i) / (2 * M_PI));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jointbe: frictional contact of jointed structures"};
  app.require_subcommand(1);
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
  app.add_option("--threads", threads, "worker threads for dense linear algebra")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "overrides the roughness seed of the config");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  fs::path config;
  std::optional<fs::path> out;
  auto* run_cmd = app.add_subcommand("run", "run a case from a config file");
  run_cmd->add_option("config", config)->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--output", out, "output directory (default out/<name>)");

  std::string suite;
  fs::path configs = JOINTBE_CONFIG_DIR;
  std::optional<fs::path> report;
  auto* verify_cmd = app.add_subcommand("verify", "run a verification suite");
  verify_cmd->add_option("suite", suite, "analytic, oracle, fixture or all")->required();
  verify_cmd->add_option("--configs", configs, "directory of the bundled configs");
  verify_cmd->add_option("--report", report, "write a JSON report");

  auto* synth_cmd = app.add_subcommand("synth-surface", "write the composite height profile of a config");
  synth_cmd->add_option("config", config)->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("-o,--output", out, "height CSV (default <name>_heights.csv)");

  fs::path fe_dir, rom_out = "reduced.jbrom";
  int modes = 25;
  auto* reduce_cmd = app.add_subcommand("reduce", "Craig-Bampton reduction of an external FE model");
  reduce_cmd->add_option("directory", fe_dir, "directory with mass.mtx, stiffness.mtx and the CSV maps")
      ->required()
      ->check(CLI::ExistingDirectory);
  reduce_cmd->add_option("-m,--modes", modes, "fixed-interface modes")->check(CLI::NonNegativeNumber);
  reduce_cmd->add_option("-o,--output", rom_out, "reduced model bundle");

  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::from_str(log_level));
  Eigen::setNbThreads(threads);
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif

  try {
    if (*run_cmd) return run(config, out, seed);
    if (*verify_cmd) return verify_suite(suite, configs, report);
    if (*synth_cmd) return synth_surface(config, out, seed);
    if (*reduce_cmd) return reduce(fe_dir, modes, rom_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", std::string(category_name(e.category())).c_str(), e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}
