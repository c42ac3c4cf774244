#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jointbe/driver.hpp"

namespace jointbe::verify {

struct Check {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Acceptance checks, numbered 1..12. Bundled cases are run at most once per
/// Suite and their results shared between checks.
class Suite {
 public:
  explicit Suite(std::filesystem::path config_dir);

  /// Criteria run by a named suite: analytic, oracle, fixture or all.
  static std::vector<int> criteria(const std::string& suite);
  static std::vector<std::string> bundled_cases();

  Check run(int id);

 private:
  struct Bundled {
    RunResult result;
    bool c_star_spd = false;
    double c_star_asymmetry = 0.0;
    double punch_spread = 0.0;  // interior normal displacement spread, relative
  };
  const Bundled& bundled(const std::string& name);

  Check self_influence();
  Check hertz();
  Check mindlin();
  Check flat_punch();
  Check pjor_enumeration();
  Check condensation();
  Check craig_bampton_exactness();
  Check linear_limit();
  Check jenkins();
  Check fixture_trends();
  Check roughness();
  Check invariants();

  std::filesystem::path dir_;
  std::map<std::string, Bundled> cache_;
};

/// One line per check: "PASS AC2 hertz contact: ...".
std::string format_line(const Check& c);
std::string to_json(const std::vector<Check>& checks);

}  // namespace jointbe::verify
